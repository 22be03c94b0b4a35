#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/capacity.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"
#include "wk/profiles.hpp"

namespace wk {

// Decay estimates differ in two ways: how the coefficient profile q damps
// the integrand (a rational factor 1 / (1 + q^{1/(alpha-p+1)}) when
// alpha > p - 1, the factor e^{-kq} when alpha = p - 1) and which geometric
// quantity drives it.
enum class Estimate {
  MinRational,             // min{(t Lambda)^{1/(p-1)}, Lambda^{1/p}}, spectral Lambda
  RootRational,            // Lambda^{1/p}, spectral Lambda, cone condition
  DiamRational,            // inverse diameter D, cone condition
  MinRationalDensity,      // min branch, capacity-density Lambda
  RootRationalDensity,     // root branch, capacity-density Lambda, cone condition
  LinearRationalCapacity,  // (t Lambda)^{1/(p-1)}, shell-capacity Lambda
  MinExponential,
  RootExponential,
  DiamExponential,
  MinExponentialDensity,
  RootExponentialDensity,
  LinearExponentialCapacity,
};

inline constexpr Estimate kAllEstimates[] = {
    Estimate::MinRational,          Estimate::RootRational,           Estimate::DiamRational,
    Estimate::MinRationalDensity,   Estimate::RootRationalDensity,    Estimate::LinearRationalCapacity,
    Estimate::MinExponential,       Estimate::RootExponential,        Estimate::DiamExponential,
    Estimate::MinExponentialDensity, Estimate::RootExponentialDensity, Estimate::LinearExponentialCapacity,
};

enum class IntegrandForm { Min, Root, InverseDiam, Linear };
enum class LambdaSource { Spectral, Density, Capacity, None };

struct EstimateInfo {
  Estimate id;
  const char* name;
  bool exponential;     // alpha = p - 1 family
  IntegrandForm form;
  LambdaSource lambda;
  bool needs_cone;
};

const EstimateInfo& estimate_info(Estimate id);
const char* to_string(Estimate id);
std::optional<Estimate> estimate_from_string(const std::string& name);

// Throws RegimeError unless alpha matches the family of `id`.
void check_regime(Estimate id, double p, double alpha);

struct IntegrandParams {
  double p = 2.0;
  double alpha = 2.0;
  double k = 1.0;   // decay constant of the exponential family
};

// Integrand at t from profile values. Throws RegimeError / PreconditionError.
double integrand(Estimate id, const IntegrandParams& params, double Lambda, double q, double D, double t);

// ---------------------------------------------------------------- divergence

enum class Divergence { Diverges, Converges, Indeterminate, Unresolved };

const char* to_string(Divergence d);

struct DivergenceOptions {
  double slope_band = 0.05;     // |a + 1| within this: decided by the log exponent
  double log_diverge = 1.05;    // beta at or below: divergent (log-log included)
  double log_converge = 1.15;   // beta at or above: convergent
  double critical_band = 0.15;  // |beta - 1| within this on a divergent tail: labelled log-log
  int min_rungs = 3;
  int min_tail = 4;
};

struct DivergenceResult {
  Divergence verdict = Divergence::Unresolved;
  double tail_exponent = 0.0;   // a in f ~ t^a L^{-beta}, L = log(1/t)
  double log_exponent = 0.0;    // beta
  std::string tail_kind;        // "power", "log" (1/t), "log-log" (1/(t log 1/t)), "zero"
  int rungs = 0;

  nlohmann::json to_json() const;
};

// Classifies int_0 f(t) dt from samples of f on an increasing ladder by a
// joint least-squares fit log f = c + a log t - beta log log(1/t) over the
// lowest half of the ladder. Non-finite or missing samples are skipped.
DivergenceResult divergence_test(std::span<const double> t, std::span<const double> f,
                                 std::span<const std::uint8_t> missing = {},
                                 const DivergenceOptions& opts = {});

// ---------------------------------------------------------------- Lambda variants

struct DensityLambdaOptions {
  int max_samples = 64;
  ShellSampling sampling{5, 24, 10};
  MuDeltaOptions mu;
  LocalCapacityOptions shell{24, {}};
};

// Lambda(r) = inf over sampled Omega_{r theta^{-1/3}, r theta^{1/3}} of mu_delta^p
//             + r^{-n} cap(closure(B_{r theta^{-2/3}, r theta^{-1/3}}) \ Omega, B_{r/theta, r}).
Profile density_lambda_profile(const DomainSpec& domain, const ExponentConfig& exps,
                               std::span<const double> ladder, const DensityLambdaOptions& opts = {});

// Lambda(r) = r^{-n} cap(closure(B_{r theta^{-2/3}, r theta^{-1/3}}) \ Omega, B_{r/theta, r}).
Profile capacity_lambda_profile(const DomainSpec& domain, const ExponentConfig& exps,
                                std::span<const double> ladder,
                                const LocalCapacityOptions& opts = {24, {}});

// ---------------------------------------------------------------- bound curves

struct EstimateInputs {
  double p = 2.0;
  double alpha = 2.0;
  double R = 1.0;
  const Profile* lambda_spectral = nullptr;
  const Profile* lambda_density = nullptr;
  const Profile* lambda_capacity = nullptr;
  const Profile* q = nullptr;
  const Profile* D = nullptr;
  std::optional<bool> cone_positive;  // nullopt: not evaluated
};

struct EstimateReport {
  Estimate id = Estimate::MinRational;
  std::vector<double> ladder;
  std::vector<double> integrand_values;   // NaN where a profile is missing
  std::vector<double> integrals;          // int_r^R per rung
  std::vector<double> bound;              // M_bound per rung
  DivergenceResult divergence;
  double R = 1.0;
  double M_R = 1.0;
  double C = 1.0;
  double k = 1.0;
  bool refused = false;
  std::string reason;

  nlohmann::json to_json() const;
};

struct BoundOptions {
  bool override_divergence = false;
  DivergenceOptions divergence;
};

// Trapezoidal quadrature in log t over the available rungs; above the top rung
// the integrand is continued to R as the power law through the two highest
// rungs. M_bound(r) = M_R exp(-C int_r^R f).
EstimateReport bound_curve(Estimate id, const EstimateInputs& in, double M_R, double C, double k,
                           const BoundOptions& opts = {});

// C with M_bound(r_cal) = M(r_cal), r_cal the largest rung below R / 2 where M is
// available. nullopt when no such rung exists or the integral vanishes there.
struct Calibration {
  double C = 0.0;
  double r_cal = 0.0;
  std::size_t index = 0;
};

std::optional<Calibration> calibrate(const EstimateReport& report, const Profile& measured);

// Report with the bound recomputed for a new C.
EstimateReport with_constant(EstimateReport report, double C);

// ---------------------------------------------------------------- closed forms

enum class Example { ConeComplement, PowerCusp, PowerCuspCritical };

struct ExampleParams {
  double p = 2.0;
  double alpha = 2.0;
  int n = 2;
  double s = 2.0;         // cusp exponent
  double l = 0.0;         // power of |x| in b
  double sigma = 0.0;     // power of log(1/|x|), used when log_form is set
  bool log_form = false;
};

struct CatalogEntry {
  bool guaranteed = false;
  std::string branch;                 // closed form of f, or the reason there is none
  std::function<double(double)> f;    // empty when not guaranteed
};

// Growth function f of the guaranteed decay M(r) <= M(R) e^{-C f(r)}.
CatalogEntry f_catalog(Example example, const ExampleParams& params);

struct ThresholdComparison {
  double literature = 0.0;      // earlier results need l strictly above this
  double here = 0.0;            // the estimates need l at or above this
  bool improvement = false;     // here <= literature; equality means the critical l itself is now covered
  double gap = 0.0;             // literature - here
};

ThresholdComparison literature_threshold(Example example, const ExampleParams& params);

}  // namespace wk
