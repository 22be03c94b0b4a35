#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"

namespace wk {

struct EigenOptions {
  double tol = 1e-10;          // relative change of the quotient between iterations
  int max_iterations = 5000;
};

struct EigenResult {
  double lambda_min = 0.0;
  std::vector<double> eigenfunction;  // per mesh node, >= 0, unit discrete L_p norm
  int iterations = 0;
  double residual = 0.0;
  bool no_dirichlet_boundary = false;
  std::vector<double> quotient_history;

  nlohmann::json to_json() const;
};

// First Dirichlet eigenvalue of the p-Laplace-Beltrami operator on the
// meshed section: the minimum of sum_T |T| |grad psi|^p / sum_i m_i |psi_i|^p
// over nodal fields vanishing off the section. Inverse iteration for p = 2,
// preconditioned nonlinear conjugate gradients on the quotient otherwise.
EigenResult lambda_min(const SphereMesh& mesh, double p, const EigenOptions& opts = {});

// Lumped mass of each node of the section.
std::vector<double> section_mass(const SphereMesh& mesh);

// Discrete Rayleigh quotient of a nodal field (outside nodes are ignored).
double rayleigh_quotient(const SphereMesh& mesh, std::span<const double> psi, double p);

void write_eigenfunction_csv(std::ostream& os, const SphereMesh& mesh, const EigenResult& result);

struct LambdaProfileOptions {
  double h_ang = 0.02;
  int min_inside = 24;          // refine h_ang until the section has this many nodes
  double min_h_ang = 1e-5;
  double min_h_ang_3d = 0.01;
  // t-sample r * kappa^j, |j| <= ..., restricted to (r / theta, r theta) ∩ (0, R);
  // the sample sets are nested in theta
  double kappa = 1.189207115002721;  // 2^{1/4}
  EigenOptions eigen;
};

struct LambdaProfileResult {
  Profile profile;
  std::vector<nlohmann::json> log;  // one record per eigen solve
};

// Lambda(r) = min over the t-sample of lambda_min(S_t ∩ Omega). A failed
// solve marks the rung missing.
LambdaProfileResult lambda_profile(const DomainSpec& domain, double p, double theta,
                                   std::span<const double> ladder,
                                   const LambdaProfileOptions& opts = {});

// Mesh of S_t ∩ Omega with h_ang halved until min_inside nodes lie in Omega.
SphereMesh resolved_section_mesh(const DomainSpec& domain, double t, const LambdaProfileOptions& opts);

}  // namespace wk
