#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wk/estimates.hpp"
#include "wk/fit.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"
#include "wk/profiles.hpp"

namespace wk {

// Data on the outer arc S_R ∩ Omega.
//   FirstMode: first Dirichlet eigenfunction of the arc, max 1 (sin(pi phi / angle)
//              on a sector when p = 2)
//   Constant:  g = value
enum class BoundaryKind { FirstMode, Constant };

struct BoundaryData {
  BoundaryKind kind = BoundaryKind::FirstMode;
  double value = 1.0;
  double h_ang = 1e-3;   // arc mesh for the eigenfunction

  static BoundaryData from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// div(|Du|^{p-2} Du) + b |Du|^alpha = rho in B_R ∩ Omega, u = 0 on B_R ∩ ∂Omega,
// u = g on S_R ∩ Omega. rho >= 0 gives a strict subsolution of the inequality.
struct ProblemInstance {
  DomainSpec domain;
  double p = 2.0;
  double alpha = 2.0;
  Coefficient b;
  BoundaryData boundary;
  double forcing = 0.0;
};

struct SolveOptions {
  int cells_per_radius = 200;   // h = R / cells_per_radius
  double tol = 1e-9;            // max change between iterates relative to max |u|
  int max_iterations = 400;
  double relax = 1.0;           // relaxation of plain fixed-point steps
  int anderson_depth = 5;       // residual history for Anderson mixing, 0 = off
  double eps = 1e-8;            // |Du|^2 -> |Du|^2 + eps^2 in the diffusivity
  double min_fraction = 1e-6;   // shortest boundary arm as a fraction of h
};

// Nodal solution on the lattice h Z^2 ∩ [-R, R]^2. Nodes off the unknown set
// hold their Dirichlet value (0 off Omega, g beyond the outer arc).
struct SolutionField {
  double R = 1.0;
  double h = 0.0;
  int half = 0;                       // nodes -half .. half per axis
  std::vector<double> u;
  std::vector<std::uint8_t> unknown;  // 1 for solved nodes
  double residual = 0.0;              // max |discrete equation| at the last iterate
  int iterations = 0;
  std::vector<double> change_history;

  std::size_t index(int i, int j) const;
  // Bilinear interpolant; 0 outside the box.
  double at(const Point& x) const;
  double max_value() const;
  double min_unknown_value() const;

  nlohmann::json to_json() const;
};

// Boundary value function g evaluated on S_R.
std::function<double(const Point&)> boundary_function(const ProblemInstance& instance);

// Shortley-Weller finite differences with lagged diffusivity and a lagged
// gradient term; a single sparse LU solve when p = 2 and b = 0. Throws
// PreconditionError for n != 2 or a bad instance, ConvergenceError when the
// iteration stalls.
SolutionField solve(const ProblemInstance& instance, const SolveOptions& opts = {});

void write_solution_csv(std::ostream& os, const SolutionField& field);

struct MeasureOptions {
  int samples_per_cell = 4;     // arc samples per h
  double monotone_tol = 1e-9;   // relative noise floor for slope signs
};

struct DecayMeasurement {
  Profile M;
  // M is monotone on the ladder or falls on (0, R_star) and rises on (R_star, R);
  // R_star is the rung of the minimum, nullopt in the monotone case
  std::optional<double> R_star;
  bool flat = false;
  int sign_changes = 0;           // of the discrete slope of M
  LineFit fit;                    // log M against log r above R_star

  nlohmann::json to_json() const;
};

// M(r) = max of the interpolated solution over samples of S_r ∩ Omega. Rungs
// whose arc has no sample inside Omega are missing.
DecayMeasurement measure_M(const SolutionField& field, const DomainSpec& domain,
                           std::span<const double> ladder, const MeasureOptions& opts = {});

void write_measurement_csv(std::ostream& os, const DecayMeasurement& m);

enum class BoundStatus { Holds, Violated, Refused, Trivial, Uncalibrated };

const char* to_string(BoundStatus s);

struct BoundVerdict {
  BoundStatus status = BoundStatus::Uncalibrated;
  std::string reason;
  double C = 0.0;
  double r_cal = 0.0;
  std::optional<double> first_violation;
  std::vector<double> margin;     // M_bound / M per rung below r_cal (NaN elsewhere)
  double measured_slope = 0.0;
  double bound_slope = 0.0;
  bool slopes_agree = false;      // within 5 %
  EstimateReport calibrated;

  bool passed() const { return status == BoundStatus::Holds || status == BoundStatus::Trivial; }
  nlohmann::json to_json() const;
};

struct VerifyOptions {
  double rel_tol = 1e-9;          // rounding allowance in M <= M_bound
  double slope_tol = 0.05;
};

// Calibrates C at the largest rung below R/2 and checks M <= M_bound at every
// smaller rung.
BoundVerdict verify_bound(const DecayMeasurement& measurement, const EstimateReport& report,
                          const VerifyOptions& opts = {});

// r, M_bound, M_measured
void write_bound_csv(std::ostream& os, const EstimateReport& report, const Profile* measured);

}  // namespace wk
