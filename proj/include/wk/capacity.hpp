#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"

namespace wk {

struct CapacityOptions {
  // outer iteration stops once the relative energy decrease falls below this
  double rel_tol = 1e-8;
  int max_iterations = 10000;
  // relative residual of the conjugate-gradient path
  double linear_tol = 1e-10;
  // unknown counts above these use conjugate gradients instead of LDL^T
  std::size_t direct_limit_2d = 400000;
  std::size_t direct_limit_3d = 8000;
  // |g|^2 -> |g|^2 + eps^2 in the lagged weights, eps relative to 1 / box width
  double regularization = 1e-6;
};

struct CapacityResult {
  double value = 0.0;
  std::vector<double> minimizer;       // node-indexed, in [0, 1]
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> energy_history;  // one entry per accepted iterate

  nlohmann::json to_json() const;
};

// Discrete p-capacity of the node set K relative to the open node set omega:
// the minimum over phi = 1 on K, phi = 0 off omega of
//
//   sum_cells sum_corners (h^n / 2^n) |g_corner|^p,
//
// where g_corner is the one-sided difference gradient at a cell corner.
// For p = 2 this is the standard (2n+1)-point Dirichlet energy.
CapacityResult capacity(const Grid& grid, std::span<const std::uint8_t> compact,
                        std::span<const std::uint8_t> open, double p,
                        const CapacityOptions& opts = {});

double discrete_energy(const Grid& grid, std::span<const double> phi, double p);

void write_minimizer_csv(std::ostream& os, const Grid& grid, const CapacityResult& result);

// cap(closure(B_a), B_b) from the radial minimizer.
double ball_capacity(double a, double b, int dim, double p);

// Capacities of sets attached to a ball B_r^x are computed on a lattice of
// spacing r / nodes_per_radius centred at x, so the discrete problem is the
// same at every scale.
struct LocalCapacityOptions {
  int nodes_per_radius = 8;
  CapacityOptions solver;
};

// cap(closure(B_r^x) \ omega, B_{2r}^x) for omega given by `member`.
double complement_ball_capacity(const Indicator& member, int dim, const Point& x, double r,
                                double p, const LocalCapacityOptions& opts = {});

// cap(closure(B_r), B_{2r}) on the same local lattice.
double discrete_ball_capacity(int dim, double r, double p, const LocalCapacityOptions& opts = {});

// cap(closure(B_{r theta^{-2/3}, r theta^{-1/3}}) \ Omega, B_{r/theta, r}).
double shell_complement_capacity(const DomainSpec& domain, double r, double theta, double p,
                                 const LocalCapacityOptions& opts = {});

// ---------------------------------------------------------------- laws

struct Ball {
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
};

// Nested configuration for the capacity laws. K1 = union of `compact`,
// K2 = K1 plus `extra`; omega1 = B(outer), omega2 = B(inner) with
// K2 inside omega2 inside omega1.
struct LawInstance {
  int dim = 2;
  double p = 2.0;
  double h = 0.05;
  std::vector<Ball> compact;
  std::vector<Ball> extra;
  Ball outer;
  Ball inner;
  std::vector<double> scales{0.5, 2.0};
};

struct LawCheck {
  std::string law;
  bool passed = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct LawReport {
  std::vector<LawCheck> checks;
  bool all_passed() const;
  std::optional<LawCheck> first_failure() const;
};

struct LawTolerances {
  double similarity = 0.02;
  double semiadditivity = 1e-3;
};

// Draws `count` random nested configurations (seeded, deterministic).
std::vector<LawInstance> random_law_instances(int count, std::uint64_t seed, int dim = 2);

// Monotonicity is checked without slack; similarity compares
// cap(lambda K, lambda omega), computed on the lattice scaled by lambda,
// with lambda^{n-p} cap(K, omega); semiadditivity allows a relative slack.
LawReport check_capacity_laws(std::span<const LawInstance> instances,
                              const LawTolerances& tol = {}, const CapacityOptions& opts = {});

// ---------------------------------------------------------------- diam_eps

enum class DiamStatus { Ok, Empty, Unresolved };

const char* to_string(DiamStatus status);

struct DiamOptions {
  double p = 2.0;
  double rel_width = 1e-2;        // bisection stops at hi / lo - 1 below this
  int max_candidates = 24;        // centres examined, best inscribed radius first
  int max_probes = 2048;          // samples ranked by the inscribed-radius probe
  LocalCapacityOptions local;
};

struct DiamResult {
  double value = 0.0;
  DiamStatus status = DiamStatus::Ok;
  Point center{0.0, 0.0, 0.0};
  int evaluations = 0;
};

// Lower-bound estimator of the eps-essential inner diameter:
// sup { r : exists sampled x with cap(closure(B_r^x) \ omega, B_2r^x) /
//       cap(closure(B_r), B_2r) < eps }.
DiamResult diam_eps(const Region& omega, double eps, const DiamOptions& opts = {});

// ---------------------------------------------------------------- mu_delta

struct MuDeltaOptions {
  int ladder = 16;                // geometric r-ladder in (0, delta |x|)
  double decades = 2.0;
  LocalCapacityOptions local{6, {}};
};

struct MuDeltaResult {
  double value = 0.0;
  double argmax_radius = 0.0;
};

// sup over r in (0, delta |x|) of (r^{1-n} cap(closure(B_r^x) \ Omega, B_2r^x))^{1/(p-1)}.
// theta, when positive, enforces delta < 1 - theta^{-1/3}.
MuDeltaResult mu_delta(const DomainSpec& domain, const Point& x, double delta, double p,
                       double theta = 0.0, const MuDeltaOptions& opts = {});

// ---------------------------------------------------------------- cone condition

struct ConeConditionOptions {
  double threshold = 1e-3;        // relative to cap(closure(B_1), B_2)
  LocalCapacityOptions local{16, {}};
};

struct ConeConditionResult {
  Profile scaled;                 // r^{p-n} cap(...) per rung
  double liminf_estimate = 0.0;
  double threshold = 0.0;
  bool positive = false;
  std::string failure;            // non-empty when a rung failed

  nlohmann::json to_json() const;
};

ConeConditionResult cone_condition(const DomainSpec& domain, double theta, double p,
                                   std::span<const double> ladder,
                                   const ConeConditionOptions& opts = {});

}  // namespace wk
