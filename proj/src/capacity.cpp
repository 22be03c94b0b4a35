#include "wk/capacity.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <tuple>

#include "wk/error.hpp"

namespace wk {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

int corner_count(int dim) { return dim == 2 ? 4 : 8; }

// Node indices of the cell whose lowest corner is `base`; bit a of the
// corner number selects the upper node along axis a.
void cell_corners(const Grid& g, std::size_t base, std::size_t* idx) {
  for (int c = 0; c < corner_count(g.dim()); ++c) {
    std::size_t i = base;
    for (int a = 0; a < g.dim(); ++a)
      if (c & (1 << a)) i += g.stride(a);
    idx[c] = i;
  }
}

template <class F>
void for_each_cell(const Grid& g, F&& f) {
  const auto& n = g.count();
  const int kmax = g.dim() == 3 ? n[2] - 1 : 1;
  for (int k = 0; k < kmax; ++k)
    for (int j = 0; j + 1 < n[1]; ++j)
      for (int i = 0; i + 1 < n[0]; ++i) f(g.index({i, j, k}));
}

double cell_volume(const Grid& g) { return std::pow(g.h() / 2.0, g.dim()); }

// Edge weights such that the lagged quadratic energy is sum_e w_e (phi_i - phi_j)^2.
// w[a * N + i] belongs to the edge (i, i + stride_a).
void lagged_weights(const Grid& g, std::span<const double> phi, double p, double eps,
                    std::vector<double>& w) {
  const std::size_t N = g.size();
  w.assign(static_cast<std::size_t>(g.dim()) * N, 0.0);
  const double vol = cell_volume(g);
  const double ih2 = 1.0 / (g.h() * g.h());
  const int nc = corner_count(g.dim());
  const double e2 = eps * eps;
  std::size_t idx[8];
  for_each_cell(g, [&](std::size_t base) {
    cell_corners(g, base, idx);
    for (int c = 0; c < nc; ++c) {
      double g2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double d = phi[idx[c ^ (1 << a)]] - phi[idx[c]];
        g2 += d * d;
      }
      g2 *= ih2;
      const double coeff = vol * std::pow(g2 + e2, 0.5 * (p - 2.0)) * ih2;
      for (int a = 0; a < g.dim(); ++a) w[a * N + idx[c & ~(1 << a)]] += coeff;
    }
  });
}

bool edge_exists(const Grid& g, const std::array<int, 3>& c, int a) { return c[a] + 1 < g.count()[a]; }

struct System {
  std::vector<long> unknown;  // node -> unknown index, -1 when fixed
  std::vector<std::size_t> free_nodes;
};

System number_unknowns(std::span<const std::uint8_t> compact, std::span<const std::uint8_t> open) {
  System s;
  s.unknown.assign(open.size(), -1);
  for (std::size_t i = 0; i < open.size(); ++i)
    if (open[i] && !compact[i]) {
      s.unknown[i] = static_cast<long>(s.free_nodes.size());
      s.free_nodes.push_back(i);
    }
  return s;
}

// Assembles the weighted graph Laplacian on free nodes; fixed values enter b.
void assemble(const Grid& g, const System& sys, std::span<const double> fixed,
              const std::vector<double>* weights, SpMat& A, Vec& b) {
  const std::size_t N = g.size();
  const long m = static_cast<long>(sys.free_nodes.size());
  const double w_const = std::pow(g.h(), g.dim() - 2);
  auto weight = [&](int a, std::size_t lower) { return weights ? (*weights)[a * N + lower] : w_const; };

  A.resize(m, m);
  Eigen::VectorXi per_col = Eigen::VectorXi::Constant(m, 1 + 2 * g.dim());
  A.reserve(per_col);
  b.setZero(m);
  std::vector<std::pair<long, double>> row;
  for (long col = 0; col < m; ++col) {
    const std::size_t i = sys.free_nodes[col];
    const auto c = g.coords(i);
    double diag = 0.0;
    row.clear();
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      if (c[a] > 0) {
        const std::size_t j = i - s;
        const double w = weight(a, j);
        diag += w;
        if (sys.unknown[j] >= 0) row.emplace_back(sys.unknown[j], -w);
        else b[col] += w * fixed[j];
      }
      if (edge_exists(g, c, a)) {
        const std::size_t j = i + s;
        const double w = weight(a, i);
        diag += w;
        if (sys.unknown[j] >= 0) row.emplace_back(sys.unknown[j], -w);
        else b[col] += w * fixed[j];
      }
    }
    row.emplace_back(col, diag);
    std::sort(row.begin(), row.end());
    for (const auto& [r, v] : row) A.insert(r, col) = v;
  }
  A.makeCompressed();
}

class LinearSolver {
 public:
  LinearSolver(bool direct, double tol) : direct_(direct), tol_(tol) {}

  // Returns the relative residual.
  double solve(const SpMat& A, const Vec& b, Vec& x) {
    if (direct_) {
      if (!analyzed_) {
        ldlt_.analyzePattern(A);
        analyzed_ = true;
      }
      ldlt_.factorize(A);
      if (ldlt_.info() != Eigen::Success) throw ConvergenceError("LDL^T factorization failed", 1.0, 0);
      x = ldlt_.solve(b);
    } else {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(tol_);
      cg.setMaxIterations(std::max<long>(1000, 4 * A.rows()));
      cg.compute(A);
      x = cg.solveWithGuess(b, x.size() == b.size() ? x : Vec(Vec::Zero(b.size())));
      if (cg.info() != Eigen::Success)
        throw ConvergenceError("conjugate gradients did not converge", cg.error(),
                               static_cast<int>(cg.iterations()));
    }
    const double nb = b.norm();
    return nb > 0.0 ? (A * x - b).norm() / nb : (A * x).norm();
  }

 private:
  bool direct_;
  double tol_;
  bool analyzed_ = false;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

void scatter(const System& sys, const Vec& x, std::vector<double>& phi) {
  for (std::size_t k = 0; k < sys.free_nodes.size(); ++k)
    phi[sys.free_nodes[k]] = std::clamp(x[static_cast<long>(k)], 0.0, 1.0);
}

}  // namespace

nlohmann::json CapacityResult::to_json() const {
  return {{"value", value}, {"iterations", iterations}, {"residual", residual}};
}

double discrete_energy(const Grid& g, std::span<const double> phi, double p) {
  if (phi.size() != g.size()) throw PreconditionError("field size does not match the grid");
  const double vol = cell_volume(g);
  const double ih2 = 1.0 / (g.h() * g.h());
  const int nc = corner_count(g.dim());
  std::size_t idx[8];
  double e = 0.0;
  for_each_cell(g, [&](std::size_t base) {
    cell_corners(g, base, idx);
    bool flat = true;
    for (int c = 1; c < nc && flat; ++c) flat = phi[idx[c]] == phi[idx[0]];
    if (flat) return;
    for (int c = 0; c < nc; ++c) {
      double g2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double d = phi[idx[c ^ (1 << a)]] - phi[idx[c]];
        g2 += d * d;
      }
      if (g2 > 0.0) e += vol * std::pow(g2 * ih2, 0.5 * p);
    }
  });
  return e;
}

CapacityResult capacity(const Grid& grid, std::span<const std::uint8_t> compact,
                        std::span<const std::uint8_t> open, double p, const CapacityOptions& opts) {
  if (!(p > 1.0)) throw PreconditionError("capacity needs p > 1");
  if (compact.size() != grid.size() || open.size() != grid.size())
    throw PreconditionError("node masks do not match the grid");
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!compact[i]) continue;
    if (!open[i]) throw PreconditionError("compact set is not contained in the open set");
    any = true;
  }
  // the open set must not touch the box faces, otherwise phi = 0 off omega is not imposed
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!open[i]) continue;
    const auto c = grid.coords(i);
    for (int a = 0; a < grid.dim(); ++a)
      if (c[a] == 0 || c[a] + 1 == grid.count()[a])
        throw PreconditionError("open set touches the grid boundary");
  }

  CapacityResult res;
  res.minimizer.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (compact[i]) res.minimizer[i] = 1.0;
  if (!any) {
    res.energy_history.push_back(0.0);
    return res;
  }

  const System sys = number_unknowns(compact, open);
  if (sys.free_nodes.empty()) {
    res.value = discrete_energy(grid, res.minimizer, p);
    res.energy_history.push_back(res.value);
    return res;
  }
  const std::size_t limit = grid.dim() == 2 ? opts.direct_limit_2d : opts.direct_limit_3d;
  LinearSolver solver(sys.free_nodes.size() <= limit, opts.linear_tol);

  SpMat A;
  Vec b, x;
  assemble(grid, sys, res.minimizer, nullptr, A, b);
  res.residual = solver.solve(A, b, x);
  scatter(sys, x, res.minimizer);
  res.iterations = 1;
  double E = discrete_energy(grid, res.minimizer, p);
  res.energy_history.push_back(E);
  if (p == 2.0) {
    res.value = E;
    return res;
  }

  const double width = (grid.count()[0] - 1) * grid.h();
  const double eps = opts.regularization / width;
  std::vector<double> w, trial(grid.size());
  bool converged = false;
  double rel = 1.0;
  while (res.iterations < opts.max_iterations) {
    lagged_weights(grid, res.minimizer, p, eps, w);
    assemble(grid, sys, res.minimizer, &w, A, b);
    solver.solve(A, b, x);
    // the lagged solution gives a descent direction; halve the step until E drops
    double tau = 1.0, Et = E;
    bool accepted = false;
    std::vector<double> target(res.minimizer);
    scatter(sys, x, target);
    while (tau > 1e-12) {
      for (std::size_t k : sys.free_nodes)
        trial[k] = std::clamp(res.minimizer[k] + tau * (target[k] - res.minimizer[k]), 0.0, 1.0);
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (sys.unknown[i] < 0) trial[i] = res.minimizer[i];
      Et = discrete_energy(grid, trial, p);
      if (Et <= E) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    ++res.iterations;
    if (!accepted) {
      rel = 0.0;
      converged = true;
      break;
    }
    rel = E > 0.0 ? (E - Et) / E : 0.0;
    res.minimizer.swap(trial);
    E = Et;
    res.energy_history.push_back(E);
    if (rel < opts.rel_tol) {
      converged = true;
      break;
    }
  }
  res.residual = rel;
  res.value = E;
  if (!converged)
    throw ConvergenceError("capacity iteration reached the iteration limit", rel, res.iterations);
  return res;
}

void write_minimizer_csv(std::ostream& os, const Grid& grid, const CapacityResult& result) {
  os << (grid.dim() == 2 ? "x,y,value\n" : "x,y,z,value\n");
  char buf[128];
  for (std::size_t i = 0; i < grid.size() && i < result.minimizer.size(); ++i) {
    const Point x = grid.node(i);
    if (grid.dim() == 2)
      std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e\n", x[0], x[1], result.minimizer[i]);
    else
      std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%.12e\n", x[0], x[1], x[2],
                    result.minimizer[i]);
    os << buf;
  }
}

double ball_capacity(double a, double b, int dim, double p) {
  if (!(a > 0.0) || !(b > a)) throw PreconditionError("ball_capacity requires 0 < a < b");
  if (!(p > 1.0)) throw PreconditionError("ball_capacity requires p > 1");
  const double s = unit_sphere_measure(dim);
  if (std::abs(p - dim) < 1e-14) return s * std::pow(std::log(b / a), 1.0 - dim);
  const double gamma = (p - dim) / (p - 1.0);
  return s * std::pow(std::abs(gamma / (std::pow(b, gamma) - std::pow(a, gamma))), p - 1.0);
}

// ---------------------------------------------------------------- local lattices

namespace {

long offset_sq(const Grid& g, std::size_t i, int half) {
  const auto c = g.coords(i);
  long s = 0;
  for (int a = 0; a < g.dim(); ++a) s += static_cast<long>(c[a] - half) * (c[a] - half);
  return s;
}

double local_capacity(const Indicator* member, int dim, const Point& x, double r, double p,
                      const LocalCapacityOptions& opts) {
  if (!(r > 0.0)) throw PreconditionError("ball radius must be positive");
  const int m = opts.nodes_per_radius;
  if (m < 2) throw PreconditionError("nodes_per_radius must be at least 2");
  const double h = r / m;
  const int half = 2 * m + 1;
  const Point o{x[0] - half * h, x[1] - half * h, dim == 3 ? x[2] - half * h : 0.0};
  Grid g(dim, o, h, {2 * half + 1, 2 * half + 1, 2 * half + 1});
  std::vector<std::uint8_t> K(g.size(), 0), W(g.size(), 0);
  const long m2 = static_cast<long>(m) * m;
  bool any = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const long s = offset_sq(g, i, half);
    W[i] = s < 4 * m2 ? 1 : 0;
    if (s <= m2 && (!member || !(*member)(g.node(i)))) {
      K[i] = 1;
      any = true;
    }
  }
  if (!any) return 0.0;
  return capacity(g, K, W, p, opts.solver).value;
}

}  // namespace

double complement_ball_capacity(const Indicator& member, int dim, const Point& x, double r,
                                double p, const LocalCapacityOptions& opts) {
  return local_capacity(&member, dim, x, r, p, opts);
}

double discrete_ball_capacity(int dim, double r, double p, const LocalCapacityOptions& opts) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, int>, double> cache;
  const auto key = std::make_tuple(dim, p, opts.nodes_per_radius);
  double unit;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) {
      unit = it->second;
      return unit * std::pow(r, dim - p);
    }
  }
  unit = local_capacity(nullptr, dim, {0.0, 0.0, 0.0}, 1.0, p, opts);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, unit);
  return unit * std::pow(r, dim - p);
}

double shell_complement_capacity(const DomainSpec& domain, double r, double theta, double p,
                                 const LocalCapacityOptions& opts) {
  if (!(theta > 1.0)) throw PreconditionError("theta must exceed 1");
  if (!(r > 0.0)) throw PreconditionError("radius must be positive");
  const int dim = domain.dim();
  const int m = opts.nodes_per_radius;
  const double h = r / m;
  const int half = m + 1;
  Grid g(dim, {-half * h, -half * h, dim == 3 ? -half * h : 0.0}, h,
         {2 * half + 1, 2 * half + 1, 2 * half + 1});
  // radii in lattice units so every rung sees the same node pattern
  const double k_in = m * std::pow(theta, -2.0 / 3.0), k_out = m * std::pow(theta, -1.0 / 3.0);
  const double w_in = m / theta, w_out = m;
  std::vector<std::uint8_t> K(g.size(), 0), W(g.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = std::sqrt(static_cast<double>(offset_sq(g, i, half)));
    W[i] = (t > w_in && t < w_out) ? 1 : 0;
    if (t >= k_in && t <= k_out && !domain.contains(g.node(i))) {
      K[i] = 1;
      any = true;
    }
  }
  if (!any) return 0.0;
  return capacity(g, K, W, p, opts.solver).value;
}

// ---------------------------------------------------------------- laws

bool LawReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const LawCheck& c) { return c.passed; });
}

std::optional<LawCheck> LawReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return c;
  return std::nullopt;
}

std::vector<LawInstance> random_law_instances(int count, std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double ps[] = {1.5, 2.0, 3.0};
  auto point_in = [&](const Ball& b, double margin) {
    // uniform in the ball of radius b.radius - margin
    Point x{0.0, 0.0, 0.0};
    const double rr = b.radius - margin;
    for (;;) {
      double s = 0.0;
      for (int a = 0; a < dim; ++a) {
        x[a] = 2.0 * U(rng) - 1.0;
        s += x[a] * x[a];
      }
      if (s <= 1.0) break;
    }
    for (int a = 0; a < dim; ++a) x[a] = b.center[a] + rr * x[a];
    return x;
  };
  std::vector<LawInstance> out;
  for (int k = 0; k < count; ++k) {
    LawInstance in;
    in.dim = dim;
    in.p = ps[k % 3];
    in.h = dim == 2 ? 0.025 : 0.1;
    in.outer = {{0.0, 0.0, 0.0}, 1.6 + 0.4 * U(rng)};
    const double inner_r = in.outer.radius * (0.65 + 0.2 * U(rng));
    in.inner = {point_in({in.outer.center, in.outer.radius - inner_r}, 0.0), inner_r};
    const int nk = 1 + static_cast<int>(U(rng) * 2.0);
    for (int j = 0; j < nk + 1; ++j) {
      const double rad = 0.2 + 0.2 * U(rng);
      Ball b{point_in(in.inner, rad + 0.3), rad};
      (j < nk ? in.compact : in.extra).push_back(b);
    }
    out.push_back(std::move(in));
  }
  return out;
}

namespace {

struct LawMasks {
  Grid grid;
  std::vector<std::uint8_t> k1, k2, extra, w1, w2;
};

bool in_any(const std::vector<Ball>& balls, const Point& x, int dim) {
  for (const auto& b : balls)
    if (distance(x, b.center, dim) <= b.radius) return true;
  return false;
}

// The configuration scaled by lambda on a lattice of spacing lambda h. For
// lambda != 1 the lattice is shifted by half a cell so that the node sets of
// the scaled and unscaled problems are not similar images of each other.
LawMasks law_masks(const LawInstance& in, double lambda) {
  LawMasks m;
  const double h = lambda * in.h;
  const double shift = lambda == 1.0 ? 0.0 : 0.5 * h;
  const double half_width = lambda * in.outer.radius + 2.0 * h;
  Point c{lambda * in.outer.center[0] + shift, lambda * in.outer.center[1] + shift,
          in.dim == 3 ? lambda * in.outer.center[2] + shift : 0.0};
  m.grid = centered_grid(in.dim, c, half_width, h);
  const std::size_t N = m.grid.size();
  m.k1.assign(N, 0);
  m.k2.assign(N, 0);
  m.extra.assign(N, 0);
  m.w1.assign(N, 0);
  m.w2.assign(N, 0);
  for (std::size_t i = 0; i < N; ++i) {
    const Point y = m.grid.node(i);
    const Point x{y[0] / lambda, y[1] / lambda, y[2] / lambda};
    m.w1[i] = distance(x, in.outer.center, in.dim) < in.outer.radius;
    m.w2[i] = distance(x, in.inner.center, in.dim) < in.inner.radius;
    m.k1[i] = in_any(in.compact, x, in.dim);
    m.extra[i] = in_any(in.extra, x, in.dim);
    m.k2[i] = m.k1[i] || m.extra[i];
  }
  return m;
}

LawCheck make_check(std::string law, double lhs, double rhs, double tol, bool passed, int instance) {
  LawCheck c;
  c.law = std::move(law);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tolerance = tol;
  c.passed = passed;
  c.detail = "instance " + std::to_string(instance);
  return c;
}

}  // namespace

LawReport check_capacity_laws(std::span<const LawInstance> instances, const LawTolerances& tol,
                              const CapacityOptions& opts) {
  LawReport rep;
  int k = 0;
  for (const auto& in : instances) {
    const LawMasks m = law_masks(in, 1.0);
    const double c11 = capacity(m.grid, m.k1, m.w1, in.p, opts).value;
    const double c21 = capacity(m.grid, m.k2, m.w1, in.p, opts).value;
    const double c12 = capacity(m.grid, m.k1, m.w2, in.p, opts).value;
    const double c22 = capacity(m.grid, m.k2, m.w2, in.p, opts).value;
    const double ce = capacity(m.grid, m.extra, m.w1, in.p, opts).value;

    rep.checks.push_back(make_check("monotonicity", c11, c22, 0.0, c11 <= c22, k));
    rep.checks.push_back(make_check("monotonicity", c11, c21, 0.0, c11 <= c21, k));
    rep.checks.push_back(make_check("monotonicity", c11, c12, 0.0, c11 <= c12, k));
    rep.checks.push_back(make_check("monotonicity", c21, c22, 0.0, c21 <= c22, k));
    rep.checks.push_back(make_check("semiadditivity", c21, c11 + ce, tol.semiadditivity,
                                    c21 <= (c11 + ce) * (1.0 + tol.semiadditivity), k));
    for (double lambda : in.scales) {
      const LawMasks ms = law_masks(in, lambda);
      const double scaled = capacity(ms.grid, ms.k1, ms.w1, in.p, opts).value;
      const double expect = std::pow(lambda, in.dim - in.p) * c11;
      const double err = std::abs(scaled - expect) / expect;
      auto c = make_check("similarity", scaled, expect, tol.similarity, err <= tol.similarity, k);
      c.detail += ", lambda " + std::to_string(lambda);
      rep.checks.push_back(std::move(c));
    }
    ++k;
  }
  return rep;
}

// ---------------------------------------------------------------- diam_eps

const char* to_string(DiamStatus status) {
  switch (status) {
    case DiamStatus::Ok:
      return "ok";
    case DiamStatus::Empty:
      return "empty";
    case DiamStatus::Unresolved:
      return "unresolved";
  }
  return "?";
}

namespace {

std::vector<Point> probe_directions(int dim) {
  std::vector<Point> d;
  if (dim == 2) {
    for (int j = 0; j < 16; ++j) {
      const double a = j * std::numbers::pi / 8.0;
      d.push_back({std::cos(a), std::sin(a), 0.0});
    }
    return d;
  }
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const double n = std::sqrt(double(i * i + j * j + k * k));
        d.push_back({i / n, j / n, k / n});
      }
  return d;
}

// Distance from x to the complement along a fan of rays, by doubling then bisection.
double inscribed_probe(const Region& omega, const Point& x, const std::vector<Point>& dirs,
                       double start) {
  double best = omega.extent;
  for (const auto& d : dirs) {
    auto at = [&](double t) {
      return Point{x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]};
    };
    double lo = 0.0, t = start;
    while (t < best && omega.contains(at(t))) {
      lo = t;
      t *= 2.0;
    }
    if (t >= best) continue;
    double hi = t;
    for (int it = 0; it < 8; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (omega.contains(at(mid))) lo = mid;
      else hi = mid;
    }
    best = std::min(best, hi);
  }
  return best;
}

}  // namespace

DiamResult diam_eps(const Region& omega, double eps, const DiamOptions& opts) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("diam_eps requires 0 < eps < 1");
  DiamResult res;
  if (omega.known_empty || omega.samples.empty()) {
    res.status = DiamStatus::Empty;
    return res;
  }
  const int dim = omega.dim;
  const double extent = omega.extent > 0.0 ? omega.extent : 1.0;
  const double floor = omega.spacing > 0.0 ? omega.spacing / 4.0 : extent * 1e-4;

  auto below = [&](const Point& x, double r) {
    ++res.evaluations;
    const double c = complement_ball_capacity(omega.contains, dim, x, r, opts.p, opts.local);
    return c < eps * discrete_ball_capacity(dim, r, opts.p, opts.local);
  };

  // rank a strided subset of samples by their probed inscribed radius
  const auto dirs = probe_directions(dim);
  const std::size_t n = omega.samples.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + opts.max_probes - 1) / opts.max_probes);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; i += stride)
    ranked.emplace_back(inscribed_probe(omega, omega.samples[i], dirs, floor), i);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  double best = 0.0;
  const int candidates = std::min<int>(opts.max_candidates, static_cast<int>(ranked.size()));
  for (int c = 0; c < candidates; ++c) {
    const Point& x = omega.samples[ranked[c].second];
    if (best > 0.0 && !below(x, best * (1.0 + opts.rel_width))) continue;
    double lo = 0.0, hi = 0.0;
    double r = std::max({ranked[c].first, floor, best * (1.0 + opts.rel_width)});
    if (below(x, r)) {
      lo = r;
      for (;;) {
        r = 2.0 * lo;
        if (r > extent) {
          hi = lo = std::max(lo, extent);
          break;
        }
        if (!below(x, r)) {
          hi = r;
          break;
        }
        lo = r;
      }
    } else {
      hi = r;
      for (r = 0.5 * hi; r >= floor; r *= 0.5) {
        if (below(x, r)) {
          lo = r;
          break;
        }
        hi = r;
      }
      if (lo == 0.0) continue;
    }
    while (hi / lo - 1.0 > opts.rel_width) {
      const double mid = std::sqrt(lo * hi);
      if (below(x, mid)) lo = mid;
      else hi = mid;
    }
    if (lo > best) {
      best = lo;
      res.center = x;
    }
  }
  if (best <= 0.0) {
    res.status = DiamStatus::Unresolved;
    return res;
  }
  res.value = best;
  return res;
}

// ---------------------------------------------------------------- mu_delta

MuDeltaResult mu_delta(const DomainSpec& domain, const Point& x, double delta, double p,
                       double theta, const MuDeltaOptions& opts) {
  const int dim = domain.dim();
  const double rx = norm(x, dim);
  if (!(rx > 0.0)) throw PreconditionError("mu_delta is undefined at |x| = 0");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("mu_delta requires 0 < delta < 1");
  if (theta > 0.0 && !(delta < 1.0 - std::pow(theta, -1.0 / 3.0)))
    throw PreconditionError("mu_delta requires delta < 1 - theta^(-1/3)");
  if (!domain.contains(x)) throw PreconditionError("mu_delta requires x in the domain");
  MuDeltaResult res;
  const Indicator member = [&domain](const Point& y) { return domain.contains(y); };
  for (int k = 1; k <= opts.ladder; ++k) {
    const double r = delta * rx * std::pow(10.0, -opts.decades * k / opts.ladder);
    const double c = complement_ball_capacity(member, dim, x, r, p, opts.local);
    if (c <= 0.0) continue;
    const double v = std::pow(std::pow(r, 1.0 - dim) * c, 1.0 / (p - 1.0));
    if (v > res.value) {
      res.value = v;
      res.argmax_radius = r;
    }
  }
  return res;
}

// ---------------------------------------------------------------- cone condition

nlohmann::json ConeConditionResult::to_json() const {
  nlohmann::json j = {{"profile", scaled.to_json()},
                      {"liminf_estimate", liminf_estimate},
                      {"threshold", threshold},
                      {"verdict", positive ? "positive" : "degenerate"}};
  if (!failure.empty()) j["failure"] = failure;
  return j;
}

ConeConditionResult cone_condition(const DomainSpec& domain, double theta, double p,
                                   std::span<const double> ladder, const ConeConditionOptions& opts) {
  std::vector<double> rs(ladder.begin(), ladder.end());
  std::sort(rs.begin(), rs.end());
  for (double r : rs)
    if (!(r > 0.0 && r < domain.R())) throw PreconditionError("cone ladder must lie in (0, R)");
  ConeConditionResult res;
  res.scaled = Profile(rs, "cone_scaled_capacity");
  res.threshold = opts.threshold * ball_capacity(1.0, 2.0, domain.dim(), p);
  double lowest = 1e300;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    double c;
    try {
      c = shell_complement_capacity(domain, rs[i], theta, p, opts.local);
    } catch (const ConvergenceError& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6e", rs[i]);
      throw ConvergenceError(std::string(e.what()) + " at r = " + buf, e.residual(), e.iterations());
    }
    const double v = std::pow(rs[i], p - domain.dim()) * c;
    res.scaled.set(i, v);
    lowest = std::min(lowest, v);
  }
  res.liminf_estimate = rs.empty() ? 0.0 : lowest;
  res.positive = !rs.empty() && res.liminf_estimate >= res.threshold;
  return res;
}

}  // namespace wk
