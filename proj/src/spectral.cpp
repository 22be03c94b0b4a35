#include "wk/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "wk/error.hpp"

namespace wk {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr int kDenseLimit = 400;

double dot3(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Unknowns {
  std::vector<int> of_node;   // -1 for nodes held at zero
  std::vector<int> node_of;
};

Unknowns number_inside(const SphereMesh& mesh) {
  Unknowns u;
  u.of_node.assign(mesh.nodes.size(), -1);
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    if (mesh.inside[i]) {
      u.of_node[i] = static_cast<int>(u.node_of.size());
      u.node_of.push_back(static_cast<int>(i));
    }
  return u;
}

bool has_dirichlet_part(const SphereMesh& mesh) {
  for (const auto& s : mesh.simplices)
    for (int a = 0; a < s.vertex_count; ++a)
      if (s.vertex[a] < 0 || !mesh.inside[s.vertex[a]]) return true;
  return false;
}

// Gradient of the P1 interpolant on a simplex; vertices off the section count as zero.
Point simplex_gradient(const SphereMesh::Simplex& s, const SphereMesh& mesh, std::span<const double> psi) {
  Point g{0.0, 0.0, 0.0};
  for (int a = 0; a < s.vertex_count; ++a) {
    const int v = s.vertex[a];
    if (v < 0 || !mesh.inside[v]) continue;
    for (int k = 0; k < 3; ++k) g[k] += psi[v] * s.gradient[a][k];
  }
  return g;
}

SpMat stiffness(const SphereMesh& mesh, const Unknowns& u) {
  std::vector<Eigen::Triplet<double>> t;
  for (const auto& s : mesh.simplices)
    for (int a = 0; a < s.vertex_count; ++a) {
      if (s.vertex[a] < 0 || u.of_node[s.vertex[a]] < 0) continue;
      for (int b = 0; b < s.vertex_count; ++b) {
        if (s.vertex[b] < 0 || u.of_node[s.vertex[b]] < 0) continue;
        t.emplace_back(u.of_node[s.vertex[a]], u.of_node[s.vertex[b]],
                       s.measure * dot3(s.gradient[a], s.gradient[b]));
      }
    }
  const int m = static_cast<int>(u.node_of.size());
  SpMat K(m, m);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

double energy(const SphereMesh& mesh, std::span<const double> psi, double p) {
  double e = 0.0;
  for (const auto& s : mesh.simplices) {
    const Point g = simplex_gradient(s, mesh, psi);
    const double g2 = dot3(g, g);
    if (g2 > 0.0) e += s.measure * std::pow(g2, 0.5 * p);
  }
  return e;
}

double lp_mass(std::span<const double> mass, std::span<const double> psi, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (mass[i] > 0.0 && psi[i] != 0.0) s += mass[i] * std::pow(std::abs(psi[i]), p);
  return s;
}

void normalize(std::span<const double> mass, std::vector<double>& psi, double p) {
  const double n = std::pow(lp_mass(mass, psi, p), 1.0 / p);
  if (n > 0.0)
    for (double& v : psi) v /= n;
}

// d quotient / d psi at a field of unit L_p mass.
void quotient_gradient(const SphereMesh& mesh, std::span<const double> mass,
                       std::span<const double> psi, double p, double q, std::vector<double>& grad) {
  grad.assign(psi.size(), 0.0);
  for (const auto& s : mesh.simplices) {
    const Point g = simplex_gradient(s, mesh, psi);
    const double g2 = dot3(g, g);
    if (g2 <= 0.0) continue;
    const double c = p * s.measure * std::pow(g2, 0.5 * (p - 2.0));
    for (int a = 0; a < s.vertex_count; ++a) {
      const int v = s.vertex[a];
      if (v >= 0 && mesh.inside[v]) grad[v] += c * dot3(g, s.gradient[a]);
    }
  }
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (mesh.inside[i] && psi[i] != 0.0)
      grad[i] -= q * p * mass[i] * std::pow(std::abs(psi[i]), p - 2.0) * psi[i];
}

}  // namespace

std::vector<double> section_mass(const SphereMesh& mesh) {
  std::vector<double> m(mesh.nodes.size(), 0.0);
  if (mesh.dim == 3) {
    for (std::size_t i = 0; i < m.size(); ++i)
      if (mesh.inside[i]) m[i] = mesh.weights[i];
    return m;
  }
  for (const auto& s : mesh.simplices)
    for (int a = 0; a < s.vertex_count; ++a)
      if (s.vertex[a] >= 0 && mesh.inside[s.vertex[a]]) m[s.vertex[a]] += s.measure / s.vertex_count;
  return m;
}

double rayleigh_quotient(const SphereMesh& mesh, std::span<const double> psi, double p) {
  const auto mass = section_mass(mesh);
  const double d = lp_mass(mass, psi, p);
  if (!(d > 0.0)) throw PreconditionError("Rayleigh quotient of a zero field");
  return energy(mesh, psi, p) / d;
}

nlohmann::json EigenResult::to_json() const {
  return {{"lambda_min", lambda_min},
          {"iterations", iterations},
          {"residual", residual},
          {"no_dirichlet_boundary", no_dirichlet_boundary}};
}

EigenResult lambda_min(const SphereMesh& mesh, double p, const EigenOptions& opts) {
  if (!(p > 1.0)) throw PreconditionError("lambda_min needs p > 1");
  if (mesh.inside_count() == 0) throw PreconditionError("section mesh has no interior node");
  const auto mass = section_mass(mesh);
  const Unknowns u = number_inside(mesh);
  const std::size_t N = mesh.nodes.size();
  EigenResult res;
  res.eigenfunction.assign(N, 0.0);

  if (!has_dirichlet_part(mesh)) {
    res.no_dirichlet_boundary = true;
    for (int v : u.node_of) res.eigenfunction[v] = 1.0;
    normalize(mass, res.eigenfunction, p);
    res.quotient_history.push_back(0.0);
    return res;
  }

  const int m = static_cast<int>(u.node_of.size());
  const SpMat K = stiffness(mesh, u);
  Eigen::SimplicialLDLT<SpMat> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("stiffness factorization failed", 1.0, 0);
  Vec M(m);
  for (int k = 0; k < m; ++k) M[k] = mass[u.node_of[k]];

  // Few unknowns: dense solve. Disconnected sections (two horns) carry a
  // near-degenerate pair that stalls inverse iteration.
  Vec x;
  double q = 0.0;
  bool converged = false;
  int it = 0;
  if (m <= kDenseLimit) {
    const Vec s = M.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd A = s.asDiagonal() * Eigen::MatrixXd(K) * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigen solve failed", 1.0, 0);
    q = es.eigenvalues()[0];
    x = s.cwiseProduct(es.eigenvectors().col(0));
    res.quotient_history.push_back(q);
    converged = true;
  } else {
    // inverse iteration for the quadratic problem
    x = Vec::Ones(m);
    x /= std::sqrt(x.dot(M.cwiseProduct(x)));
    q = x.dot(K * x);
    res.quotient_history.push_back(q);
    for (; it < opts.max_iterations; ++it) {
      Vec y = ldlt.solve(M.cwiseProduct(x));
      x = y / std::sqrt(y.dot(M.cwiseProduct(y)));
      const double qn = x.dot(K * x);
      const double change = std::abs(q - qn) / qn;
      q = qn;
      res.quotient_history.push_back(q);
      if (change < opts.tol) {
        converged = true;
        break;
      }
    }
  }
  res.iterations = it + 1;
  res.residual = (K * x - q * M.cwiseProduct(x)).norm() / (q * M.cwiseProduct(x).norm());
  if (!converged) throw ConvergenceError("inverse iteration did not converge", q, res.iterations);
  for (int k = 0; k < m; ++k) res.eigenfunction[u.node_of[k]] = std::abs(x[k]);
  normalize(mass, res.eigenfunction, p);

  if (p == 2.0) {
    res.lambda_min = q;
    return res;
  }

  // nonlinear CG on the quotient, preconditioned by the quadratic stiffness
  std::vector<double>& psi = res.eigenfunction;
  res.quotient_history.assign(1, energy(mesh, psi, p));
  double R = res.quotient_history.back();
  std::vector<double> grad, grad_old, trial(N);
  Vec g(m), z(m), z_old(m), d(m);
  auto gather = [&](const std::vector<double>& full, Vec& out) {
    for (int k = 0; k < m; ++k) out[k] = full[u.node_of[k]];
  };
  quotient_gradient(mesh, mass, psi, p, R, grad);
  gather(grad, g);
  z = ldlt.solve(g);
  d = -z;
  double zg = z.dot(g);
  double step = 0.0;
  {
    const double dmax = d.cwiseAbs().maxCoeff();
    double pmax = 0.0;
    for (double v : psi) pmax = std::max(pmax, v);
    step = dmax > 0.0 ? 0.1 * pmax / dmax : 0.0;
  }
  int small = 0;
  converged = false;
  int k = 0;
  for (; k < opts.max_iterations; ++k) {
    bool accepted = false;
    double Rt = R;
    for (int restart = 0; restart < 2 && !accepted; ++restart) {
      double a = 2.0 * step;
      for (int h = 0; h < 60; ++h, a *= 0.5) {
        for (std::size_t i = 0; i < N; ++i) trial[i] = psi[i];
        for (int j = 0; j < m; ++j) trial[u.node_of[j]] = std::max(0.0, psi[u.node_of[j]] + a * d[j]);
        const double mt = lp_mass(mass, trial, p);
        if (!(mt > 0.0)) continue;
        Rt = energy(mesh, trial, p) / mt;
        if (Rt < R) {
          accepted = true;
          step = a;
          break;
        }
      }
      if (!accepted) {
        if (d.isApprox(-z)) break;
        d = -z;  // fall back to the preconditioned steepest descent
      }
    }
    if (!accepted) {
      converged = true;  // no descent left at floating-point resolution
      break;
    }
    normalize(mass, trial, p);
    const double rel = (R - Rt) / R;
    psi.swap(trial);
    R = Rt;
    res.quotient_history.push_back(R);
    small = rel < opts.tol ? small + 1 : 0;
    if (small >= 3) {
      converged = true;
      break;
    }
    grad_old.swap(grad);
    z_old = z;
    const Vec g_old = g;
    quotient_gradient(mesh, mass, psi, p, R, grad);
    gather(grad, g);
    z = ldlt.solve(g);
    const double beta = zg != 0.0 ? std::max(0.0, z.dot(g - g_old) / zg) : 0.0;
    zg = z.dot(g);
    d = -z + beta * d;
    if (d.dot(g) >= 0.0) d = -z;
  }
  res.iterations += k + 1;
  res.residual = g.norm() / std::max(R, 1e-300);
  if (!converged) throw ConvergenceError("quotient descent did not converge", R, res.iterations);
  res.lambda_min = R;
  return res;
}

void write_eigenfunction_csv(std::ostream& os, const SphereMesh& mesh, const EigenResult& result) {
  os << "x,y,z,inside,value\n";
  char buf[160];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const Point& x = mesh.nodes[i];
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%d,%.12e\n", x[0], x[1], x[2],
                  mesh.inside[i] ? 1 : 0, result.eigenfunction[i]);
    os << buf;
  }
}

SphereMesh resolved_section_mesh(const DomainSpec& domain, double t, const LambdaProfileOptions& opts) {
  double h = opts.h_ang;
  for (;;) {
    SphereMesh mesh = sphere_section_mesh(domain, t, h);
    if (static_cast<int>(mesh.inside_count()) >= opts.min_inside) return mesh;
    h *= 0.5;
    if (h < (domain.dim() == 2 ? opts.min_h_ang : opts.min_h_ang_3d))
      throw PreconditionError("section at t = " + std::to_string(t) + " is not resolved");
  }
}

LambdaProfileResult lambda_profile(const DomainSpec& domain, double p, double theta,
                                   std::span<const double> ladder, const LambdaProfileOptions& opts) {
  if (!(theta > 1.0)) throw PreconditionError("theta must exceed 1");
  if (!(opts.kappa > 1.0)) throw PreconditionError("kappa must exceed 1");
  LambdaProfileResult out;
  out.profile = Profile(std::vector<double>(ladder.begin(), ladder.end()), "Lambda");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    if (!(r > 0.0 && r < domain.R())) throw PreconditionError("ladder must lie in (0, R)");
    const int J = static_cast<int>(std::ceil(std::log(theta) / std::log(opts.kappa))) + 1;
    double best = 1e300;
    bool ok = true;
    for (int j = -J; j <= J; ++j) {
      const double t = r * std::pow(opts.kappa, j);
      // strict containment with a relative guard against rounding at the ends
      if (!(t > r / theta * (1.0 + 1e-12) && t < r * theta * (1.0 - 1e-12) && t < domain.R())) continue;
      nlohmann::json rec = {{"r", r}, {"t", t}};
      try {
        const SphereMesh mesh = resolved_section_mesh(domain, t, opts);
        const EigenResult e = lambda_min(mesh, p, opts.eigen);
        rec["h_ang"] = mesh.h_ang;
        rec["inside_nodes"] = mesh.inside_count();
        rec["result"] = e.to_json();
        best = std::min(best, e.lambda_min);
      } catch (const Error& e) {
        rec["error"] = e.what();
        ok = false;
      }
      out.log.push_back(std::move(rec));
    }
    if (ok && best < 1e300) out.profile.set(i, best);
    else out.profile.mark_missing(i);
  }
  return out;
}

}  // namespace wk
