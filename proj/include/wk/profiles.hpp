#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/capacity.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"

namespace wk {

enum class CoefficientKind { Zero, PowerLaw, PowerLog, CustomOracle };

const char* to_string(CoefficientKind kind);

// Lower-order coefficient b >= 0.
//   PowerLaw:  k2 |x|^l
//   PowerLog:  k2 |x|^l (log 1/|x|)^sigma, used inside the unit ball only
class Coefficient {
 public:
  static Coefficient zero();
  static Coefficient power_law(double k2, double l);
  static Coefficient power_log(double k2, double l, double sigma);
  static Coefficient custom(std::function<double(const Point&)> b, std::string label = "custom");
  static Coefficient from_json(const nlohmann::json& doc);

  CoefficientKind kind() const { return kind_; }
  double k2() const { return k2_; }
  double l() const { return l_; }
  double sigma() const { return sigma_; }
  bool radial() const { return kind_ != CoefficientKind::CustomOracle; }

  double operator()(const Point& x, int dim) const;

  // sup of b over r1 < |x| < r2; radial kinds only.
  double sup_on_shell(double r1, double r2) const;
  // sup of b over the sample points of a region.
  double sup_on_samples(const Region& region) const;

  nlohmann::json to_json() const;

 private:
  CoefficientKind kind_ = CoefficientKind::Zero;
  double k2_ = 0.0, l_ = 0.0, sigma_ = 0.0;
  std::function<double(const Point&)> custom_;
  std::string label_;
};

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Integrability exponent nu for the coefficient class:
//   alpha = p                     -> infinity
//   alpha = p - 1, n != p         -> max(n, p)
//   alpha = p - 1, n = p          -> p + margin
//   p - 1 < alpha < p, n != p     -> max(n, p) / (p - alpha)
//   p - 1 < alpha < p, n = p      -> p / (p - alpha) + margin
double select_nu(double p, double alpha, int dim, double margin = 1.0);

struct ExponentConfig {
  double p = 2.0;
  double alpha = 2.0;
  double nu = kInfinity;
  double theta = 2.0;
  double eps = 0.5;
  double delta = 0.1;
  double nu_margin = 1.0;
};

// Validates the exponents and fills in nu.
ExponentConfig make_exponents(double p, double alpha, int dim, double theta, double eps, double delta,
                              double nu_margin = 1.0);

struct NormOptions {
  int nodes_per_radius = 12;   // quadrature cells per diam radius
  int max_centers = 512;       // sampled ball centres (strided)
};

// |S_1|^{-1/nu} sup_x ( int_{omega ∩ B_d(x)} b^nu )^{1/nu} over sampled centres
// x of omega, with d = diam_eps omega. For nu = infinity the sup of b over
// the covered samples. nullopt when diam_eps was unresolved.
std::optional<double> lnu_eps_norm(const Coefficient& b, const Region& omega, double nu,
                                   const DiamResult& diam, const NormOptions& opts = {});

struct DiamProfileOptions {
  ShellSampling sampling;
  DiamOptions diam;
};

// diam_eps of Omega_{r/theta, r theta} at each rung; shared by q and the
// inverse-diameter profile.
struct DiamProfile {
  Profile diam;
  std::vector<DiamResult> results;
  nlohmann::json to_json() const;
};

DiamProfile diam_profile(const DomainSpec& domain, const ExponentConfig& exps,
                         std::span<const double> ladder, const DiamProfileOptions& opts = {});

enum class QMethod { Auto, General, Shortcut };

struct QProfileOptions {
  QMethod method = QMethod::Auto;
  NormOptions norm;
  ShellSampling sampling;
};

// q(r) = d^{p - alpha - n/nu} ||b||_{L_{nu,eps}(Omega_{r/theta, r theta})}, d the
// shell's diam_eps; for bounded b the shortcut d^{p - alpha} sup b.
Profile q_profile(const DomainSpec& domain, const Coefficient& b, const ExponentConfig& exps,
                  const DiamProfile& diams, const QProfileOptions& opts = {});

// 1 / diam_eps Omega_{r/theta, r theta}.
Profile d_profile(const DiamProfile& diams);

}  // namespace wk
