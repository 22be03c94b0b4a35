#include "wk/pde.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "wk/error.hpp"
#include "wk/spectral.hpp"

namespace wk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

BoundaryData BoundaryData::from_json(const nlohmann::json& doc) {
  BoundaryData g;
  try {
    const std::string kind = doc.value("kind", "first_mode");
    if (kind == "first_mode") {
      g.kind = BoundaryKind::FirstMode;
    } else if (kind == "constant") {
      g.kind = BoundaryKind::Constant;
      g.value = doc.at("value").get<double>();
    } else {
      throw PreconditionError("unknown boundary kind '" + kind + "'");
    }
    g.h_ang = doc.value("h_ang", g.h_ang);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed boundary document: ") + e.what());
  }
  if (!(g.value >= 0.0) || !std::isfinite(g.value)) throw PreconditionError("boundary value must be >= 0");
  if (!(g.h_ang > 0.0 && g.h_ang <= 1.0)) throw PreconditionError("boundary h_ang must lie in (0, 1]");
  return g;
}

nlohmann::json BoundaryData::to_json() const {
  if (kind == BoundaryKind::Constant) return {{"kind", "constant"}, {"value", value}};
  return {{"kind", "first_mode"}, {"h_ang", h_ang}};
}

std::function<double(const Point&)> boundary_function(const ProblemInstance& inst) {
  const auto& dom = inst.domain;
  if (inst.boundary.kind == BoundaryKind::Constant) {
    const double v = inst.boundary.value;
    return [v](const Point&) { return v; };
  }
  if (dom.kind() == DomainKind::Sector && inst.p == 2.0) {
    const double w = dom.param("angle");
    return [w](const Point& x) {
      double a = std::atan2(x[1], x[0]);
      if (a < 0.0) a += 2.0 * std::numbers::pi;
      if (!(a > 0.0 && a < w)) return 0.0;
      return std::sin(std::numbers::pi * a / w);
    };
  }
  // first eigenfunction of the outer arc, interpolated linearly in angle
  const SphereMesh mesh = sphere_section_mesh(dom, dom.R(), inst.boundary.h_ang);
  const EigenResult eig = lambda_min(mesh, inst.p);
  std::vector<std::pair<double, double>> table;
  double top = 0.0;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const double v = mesh.inside[i] ? std::abs(eig.eigenfunction[i]) : 0.0;
    double a = std::atan2(mesh.nodes[i][1], mesh.nodes[i][0]);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    table.emplace_back(a, v);
    top = std::max(top, v);
  }
  if (!(top > 0.0)) return [](const Point&) { return 1.0; };
  for (auto& e : table) e.second /= top;
  std::sort(table.begin(), table.end());
  return [table](const Point& x) {
    double a = std::atan2(x[1], x[0]);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    auto it = std::upper_bound(table.begin(), table.end(), std::make_pair(a, -1.0));
    const auto& hi = it == table.end() ? table.front() : *it;
    const auto& lo = it == table.begin() ? table.back() : *(it - 1);
    double span = hi.first - lo.first;
    double off = a - lo.first;
    if (span <= 0.0) span += 2.0 * std::numbers::pi;
    if (off < 0.0) off += 2.0 * std::numbers::pi;
    const double w = span > 0.0 ? off / span : 0.0;
    return (1.0 - w) * lo.second + w * hi.second;
  };
}

// ---------------------------------------------------------------- SolutionField

std::size_t SolutionField::index(int i, int j) const {
  const std::size_t n = 2 * static_cast<std::size_t>(half) + 1;
  return static_cast<std::size_t>(j + half) * n + static_cast<std::size_t>(i + half);
}

double SolutionField::at(const Point& x) const {
  const double fx = x[0] / h, fy = x[1] / h;
  const int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy));
  if (i0 < -half || j0 < -half || i0 + 1 > half || j0 + 1 > half) return 0.0;
  const double tx = fx - i0, ty = fy - j0;
  return (1 - tx) * (1 - ty) * u[index(i0, j0)] + tx * (1 - ty) * u[index(i0 + 1, j0)] +
         (1 - tx) * ty * u[index(i0, j0 + 1)] + tx * ty * u[index(i0 + 1, j0 + 1)];
}

double SolutionField::max_value() const {
  double m = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k)
    if (unknown[k]) m = std::max(m, u[k]);
  return m;
}

double SolutionField::min_unknown_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < u.size(); ++k)
    if (unknown[k]) m = std::min(m, u[k]);
  return m;
}

nlohmann::json SolutionField::to_json() const {
  std::size_t n = 0;
  for (auto f : unknown) n += f;
  return {{"h", h},          {"unknowns", n},  {"iterations", iterations},
          {"residual", residual}, {"max_u", max_value()}, {"min_u", n ? min_unknown_value() : 0.0}};
}

void write_solution_csv(std::ostream& os, const SolutionField& f) {
  os << "x,y,u\n";
  for (int j = -f.half; j <= f.half; ++j)
    for (int i = -f.half; i <= f.half; ++i) {
      const std::size_t k = f.index(i, j);
      if (!f.unknown[k]) continue;
      os << fmt(i * f.h) << ',' << fmt(j * f.h) << ',' << fmt(f.u[k]) << '\n';
    }
}

// ---------------------------------------------------------------- solve

namespace {

// One arm of the stencil: either an unknown node or a boundary point at
// distance frac * h carrying a Dirichlet value.
struct Arm {
  long unknown = -1;
  double dist = 0.0;
  double value = 0.0;
};

struct Stencil {
  std::size_t node = 0;
  Point x{};
  double b = 0.0;
  std::array<Arm, 4> arm;  // +x, -x, +y, -y
};

}  // namespace

SolutionField solve(const ProblemInstance& inst, const SolveOptions& opts) {
  const auto& dom = inst.domain;
  if (dom.dim() != 2) throw PreconditionError("the solver handles two-dimensional domains only");
  if (!(inst.p > 1.0)) throw PreconditionError("p must exceed 1");
  if (inst.b.kind() != CoefficientKind::Zero &&
      (inst.alpha < inst.p - 1.0 - 1e-12 || inst.alpha > inst.p + 1e-12))
    throw PreconditionError("alpha must lie in [p - 1, p]");
  if (!(inst.forcing >= 0.0)) throw PreconditionError("forcing must be non-negative");
  if (opts.cells_per_radius < 4) throw PreconditionError("cells_per_radius must be at least 4");

  const double R = dom.R();
  SolutionField f;
  f.R = R;
  f.half = opts.cells_per_radius;
  f.h = R / opts.cells_per_radius;
  const double h = f.h;
  const std::size_t nn = 2 * static_cast<std::size_t>(f.half) + 1;
  f.u.assign(nn * nn, 0.0);
  f.unknown.assign(nn * nn, 0);
  const auto g = boundary_function(inst);

  auto in_region = [&](const Point& x) { return norm(x, 2) < R * (1.0 - 1e-12) && dom.contains(x); };

  std::vector<long> number(nn * nn, -1);
  std::vector<Stencil> st;
  for (int j = -f.half; j <= f.half; ++j)
    for (int i = -f.half; i <= f.half; ++i) {
      const Point x{i * h, j * h, 0.0};
      const std::size_t k = f.index(i, j);
      if (in_region(x)) {
        f.unknown[k] = 1;
        number[k] = static_cast<long>(st.size());
        Stencil s;
        s.node = k;
        s.x = x;
        s.b = inst.b.kind() == CoefficientKind::Zero ? 0.0 : inst.b(x, 2);
        st.push_back(s);
      } else if (dom.contains(x)) {
        f.u[k] = g(x);   // beyond the outer arc
      }
    }
  if (st.empty()) throw PreconditionError("no lattice node inside B_R ∩ Omega; refine the grid");

  const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
  for (auto& s : st) {
    const int i = static_cast<int>(std::lround(s.x[0] / h)), j = static_cast<int>(std::lround(s.x[1] / h));
    for (int a = 0; a < 4; ++a) {
      const int ni = i + di[a], nj = j + dj[a];
      Arm& arm = s.arm[a];
      if (ni >= -f.half && ni <= f.half && nj >= -f.half && nj <= f.half && f.unknown[f.index(ni, nj)]) {
        arm.unknown = number[f.index(ni, nj)];
        arm.dist = h;
        continue;
      }
      const Point y{ni * h, nj * h, 0.0};
      const Point d{y[0] - s.x[0], y[1] - s.x[1], 0.0};
      // first exit through the outer circle
      double sc = 1.0;
      const bool beyond = norm(y, 2) >= R * (1.0 - 1e-12);
      if (beyond) {
        const double bq = s.x[0] * d[0] + s.x[1] * d[1];
        const double cq = s.x[0] * s.x[0] + s.x[1] * s.x[1] - R * R;
        const double dd = d[0] * d[0] + d[1] * d[1];
        sc = std::clamp((-bq + std::sqrt(std::max(0.0, bq * bq - dd * cq))) / dd, 0.0, 1.0);
      }
      const Point z{s.x[0] + sc * d[0], s.x[1] + sc * d[1], 0.0};
      double frac = sc;
      double value = 0.0;
      if (beyond && dom.contains(z)) {
        value = g(z);
      } else {
        // crossing of ∂Omega by bisection on the indicator
        double lo = 0.0, hi = sc;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          const Point m{s.x[0] + mid * d[0], s.x[1] + mid * d[1], 0.0};
          (dom.contains(m) ? lo : hi) = mid;
        }
        frac = 0.5 * (lo + hi);
      }
      arm.dist = std::max(frac, opts.min_fraction) * h;
      arm.value = value;
    }
  }

  const long n = static_cast<long>(st.size());
  Eigen::VectorXd u(n), grad2(n), diff(n);
  auto unknown_value = [&](const Arm& arm, const Eigen::VectorXd& v) {
    return arm.unknown >= 0 ? v[arm.unknown] : arm.value;
  };
  auto gradients = [&](const Eigen::VectorXd& v) {
    for (long k = 0; k < n; ++k) {
      const auto& s = st[k];
      double g2 = 0.0;
      for (int ax = 0; ax < 2; ++ax) {
        const Arm& p = s.arm[2 * ax];
        const Arm& m = s.arm[2 * ax + 1];
        const double gd = (unknown_value(p, v) - unknown_value(m, v)) / (p.dist + m.dist);
        g2 += gd * gd;
      }
      grad2[k] = g2;
    }
  };
  auto diffusivity = [&](const Eigen::VectorXd& v) {
    if (inst.p == 2.0) {
      diff.setOnes();
      return;
    }
    gradients(v);
    for (long k = 0; k < n; ++k)
      diff[k] = std::pow(grad2[k] + opts.eps * opts.eps, 0.5 * (inst.p - 2.0));
  };
  auto edge = [&](long k, const Arm& arm) {
    return arm.unknown >= 0 ? 0.5 * (diff[k] + diff[arm.unknown]) : diff[k];
  };

  // residual of div(a Du) + b |Du|^alpha - rho at the current iterate
  auto residual = [&](const Eigen::VectorXd& v) {
    diffusivity(v);
    gradients(v);
    double r = 0.0;
    for (long k = 0; k < n; ++k) {
      const auto& s = st[k];
      double lap = 0.0;
      for (int ax = 0; ax < 2; ++ax) {
        const Arm& p = s.arm[2 * ax];
        const Arm& m = s.arm[2 * ax + 1];
        lap += 2.0 / (p.dist + m.dist) *
               (edge(k, p) * (unknown_value(p, v) - v[k]) / p.dist -
                edge(k, m) * (v[k] - unknown_value(m, v)) / m.dist);
      }
      const double src = s.b > 0.0 ? s.b * std::pow(grad2[k], 0.5 * inst.alpha) : 0.0;
      r = std::max(r, std::abs(lap + src - inst.forcing));
    }
    return r;
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  auto linear_step = [&](const Eigen::VectorXd& lag, bool with_lag) -> Eigen::VectorXd {
    if (with_lag) {
      diffusivity(lag);
      gradients(lag);
    } else {
      diff.setOnes();
      grad2.setZero();
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 5);
    Eigen::VectorXd rhs(n);
    for (long k = 0; k < n; ++k) {
      const auto& s = st[k];
      double diag = 0.0;
      double r = (with_lag && s.b > 0.0 ? s.b * std::pow(grad2[k], 0.5 * inst.alpha) : 0.0) - inst.forcing;
      for (int ax = 0; ax < 2; ++ax) {
        const Arm& p = s.arm[2 * ax];
        const Arm& m = s.arm[2 * ax + 1];
        const double w = 2.0 / (p.dist + m.dist);
        const Arm* arms[2] = {&p, &m};
        for (const Arm* arm : arms) {
          const double c = w * edge(k, *arm) / arm->dist;
          diag += c;
          if (arm->unknown >= 0) trip.emplace_back(k, arm->unknown, -c);
          else r += c * arm->value;
        }
      }
      trip.emplace_back(k, k, diag);
      rhs[k] = r;
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed) {
      lu.analyzePattern(A);
      analyzed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU factorization failed", kNaN, 0);
    return lu.solve(rhs);
  };

  u = linear_step(u, false);
  f.iterations = 1;
  const bool nonlinear = inst.p != 2.0 || inst.b.kind() != CoefficientKind::Zero;
  if (nonlinear) {
    // Anderson mixing over the last few residuals; plain relaxed steps while
    // the history is short or after a reset
    double relax = opts.relax;
    double prev = std::numeric_limits<double>::infinity();
    bool done = false;
    std::vector<Eigen::VectorXd> dF, dG;
    Eigen::VectorXd lastF, lastG;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Eigen::VectorXd g = linear_step(u, true);
      const Eigen::VectorXd res = g - u;
      const double scale = std::max(u.cwiseAbs().maxCoeff(), 1e-300);
      const double change = res.cwiseAbs().maxCoeff() / scale;
      f.change_history.push_back(change);
      f.iterations = it + 2;
      if (change <= opts.tol) {
        u = g;
        done = true;
        break;
      }
      if (change > 2 * prev) {
        dF.clear();
        dG.clear();
        lastF.resize(0);
        relax = std::max(0.5 * relax, 0.05);
      }
      if (lastF.size() == n) {
        dF.push_back(res - lastF);
        dG.push_back(g - lastG);
        if (static_cast<int>(dF.size()) > opts.anderson_depth) {
          dF.erase(dF.begin());
          dG.erase(dG.begin());
        }
      }
      lastF = res;
      lastG = g;
      if (!dF.empty()) {
        Eigen::MatrixXd F(n, static_cast<long>(dF.size()));
        for (std::size_t j = 0; j < dF.size(); ++j) F.col(static_cast<long>(j)) = dF[j];
        const Eigen::VectorXd gamma = F.colPivHouseholderQr().solve(res);
        Eigen::VectorXd next = g;
        for (std::size_t j = 0; j < dG.size(); ++j) next -= gamma[static_cast<long>(j)] * dG[j];
        if (next.allFinite()) u = next;
        else u += relax * res;
      } else {
        u += relax * res;
      }
      prev = change;
    }
    if (!done)
      throw ConvergenceError("fixed-point iteration did not converge", f.change_history.back(),
                             f.iterations);
  }
  f.residual = residual(u);
  for (long k = 0; k < n; ++k) f.u[st[k].node] = u[k];
  return f;
}

// ---------------------------------------------------------------- measurement

nlohmann::json DecayMeasurement::to_json() const {
  nlohmann::json j = {{"M", M.to_json()},
                      {"flat", flat},
                      {"sign_changes", sign_changes},
                      {"slope", fit.slope},
                      {"fit_points", fit.count}};
  j["R_star"] = R_star ? nlohmann::json(*R_star) : nlohmann::json();
  return j;
}

DecayMeasurement measure_M(const SolutionField& field, const DomainSpec& domain,
                           std::span<const double> ladder, const MeasureOptions& opts) {
  DecayMeasurement out;
  out.M = Profile(std::vector<double>(ladder.begin(), ladder.end()), "M");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    if (!(r > 0.0 && r <= field.R)) throw PreconditionError("measurement ladder must lie in (0, R]");
    const int samples =
        std::max(64, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / field.h * opts.samples_per_cell)));
    const double step = 2.0 * std::numbers::pi / samples;
    auto value = [&](double a) {
      const Point x{r * std::cos(a), r * std::sin(a), 0.0};
      return domain.contains(x) ? field.at(x) : -1.0;
    };
    double best = -1.0, best_a = 0.0;
    for (int k = 0; k < samples; ++k) {
      const double a = step * (k + 0.5);
      const double v = value(a);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    if (best >= 0.0) {
      // golden-section refinement around the best sample
      constexpr double kPhi = 0.6180339887498949;
      double lo = best_a - step, hi = best_a + step;
      for (int it = 0; it < 60; ++it) {
        const double a1 = hi - kPhi * (hi - lo), a2 = lo + kPhi * (hi - lo);
        const double v1 = value(a1), v2 = value(a2);
        best = std::max(best, std::max(v1, v2));
        if (v1 < v2) lo = a1;
        else hi = a2;
      }
    }
    if (best < 0.0) out.M.mark_missing(i);
    else out.M.set(i, std::max(best, 0.0));
  }

  std::vector<double> rs, ms;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (!out.M.missing(i)) {
      rs.push_back(ladder[i]);
      ms.push_back(out.M.value(i));
    }
  double top = 0.0;
  for (double m : ms) top = std::max(top, m);
  std::vector<int> signs;
  for (std::size_t i = 0; i + 1 < ms.size(); ++i) {
    const double d = ms[i + 1] - ms[i];
    if (std::abs(d) <= opts.monotone_tol * top) continue;
    signs.push_back(d > 0.0 ? 1 : -1);
  }
  out.flat = signs.empty();
  for (std::size_t i = 0; i + 1 < signs.size(); ++i)
    if (signs[i] != signs[i + 1]) ++out.sign_changes;
  std::size_t first = 0;
  if (!out.flat && signs.front() < 0 && signs.back() > 0) {
    const auto it = std::min_element(ms.begin(), ms.end());
    first = static_cast<std::size_t>(it - ms.begin());
    out.R_star = rs[first];
  }
  out.fit = fit_loglog(std::span<const double>(rs).subspan(first), std::span<const double>(ms).subspan(first));
  return out;
}

void write_measurement_csv(std::ostream& os, const DecayMeasurement& m) {
  os << "r,M,missing\n";
  for (std::size_t i = 0; i < m.M.size(); ++i)
    os << fmt(m.M.ladder()[i]) << ',' << fmt(m.M.missing(i) ? 0.0 : m.M.value(i)) << ','
       << (m.M.missing(i) ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------- verification

const char* to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Holds:
      return "holds";
    case BoundStatus::Violated:
      return "violated";
    case BoundStatus::Refused:
      return "refused";
    case BoundStatus::Trivial:
      return "trivial";
    case BoundStatus::Uncalibrated:
      return "uncalibrated";
  }
  return "?";
}

nlohmann::json BoundVerdict::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (double v : margin) m.push_back(finite_or_null(v));
  nlohmann::json j = {{"status", to_string(status)},
                      {"C", finite_or_null(C)},
                      {"r_cal", r_cal},
                      {"margin", m},
                      {"measured_slope", finite_or_null(measured_slope)},
                      {"bound_slope", finite_or_null(bound_slope)},
                      {"slopes_agree", slopes_agree}};
  if (!reason.empty()) j["reason"] = reason;
  j["first_violation"] = first_violation ? nlohmann::json(*first_violation) : nlohmann::json();
  return j;
}

BoundVerdict verify_bound(const DecayMeasurement& meas, const EstimateReport& report,
                          const VerifyOptions& opts) {
  BoundVerdict v;
  v.calibrated = report;
  if (report.refused) {
    v.status = BoundStatus::Refused;
    v.reason = report.reason;
    return v;
  }
  const Profile& M = meas.M;
  if (!same_ladder(report.ladder, M.ladder()))
    throw PreconditionError("measurement and report use different ladders");
  bool all_zero = report.M_R == 0.0;
  for (std::size_t i = 0; i < M.size() && all_zero; ++i)
    if (!M.missing(i) && M.value(i) != 0.0) all_zero = false;
  if (all_zero) {
    v.status = BoundStatus::Trivial;
    v.reason = "zero solution";
    return v;
  }
  const auto cal = calibrate(report, M);
  if (!cal) {
    v.status = BoundStatus::Uncalibrated;
    v.reason = "no rung below R/2 with a measurement and a finite positive integral";
    return v;
  }
  v.C = cal->C;
  v.r_cal = cal->r_cal;
  v.calibrated = with_constant(report, cal->C);
  const auto& bound = v.calibrated.bound;
  v.margin.assign(M.size(), kNaN);
  std::vector<double> rs, ms, bs;
  for (std::size_t i = 0; i < cal->index; ++i) {
    if (M.missing(i) || !std::isfinite(bound[i])) continue;
    const double m = M.value(i);
    v.margin[i] = m > 0.0 ? bound[i] / m : kNaN;
    if (m > bound[i] * (1.0 + opts.rel_tol) && !v.first_violation) v.first_violation = M.ladder()[i];
    rs.push_back(M.ladder()[i]);
    ms.push_back(m);
    bs.push_back(bound[i]);
  }
  rs.push_back(cal->r_cal);
  ms.push_back(M.value(cal->index));
  bs.push_back(bound[cal->index]);
  v.measured_slope = fit_loglog(rs, ms).slope;
  v.bound_slope = fit_loglog(rs, bs).slope;
  v.slopes_agree = std::abs(v.bound_slope - v.measured_slope) <=
                   opts.slope_tol * std::max(std::abs(v.measured_slope), 1e-300);
  if (v.first_violation) {
    v.status = BoundStatus::Violated;
    v.reason = "M exceeds the calibrated bound at r = " + fmt(*v.first_violation);
  } else {
    v.status = BoundStatus::Holds;
  }
  return v;
}

void write_bound_csv(std::ostream& os, const EstimateReport& report, const Profile* measured) {
  os << "r,M_bound,M_measured\n";
  for (std::size_t i = 0; i < report.ladder.size(); ++i) {
    os << fmt(report.ladder[i]) << ',';
    if (std::isfinite(report.bound[i])) os << fmt(report.bound[i]);
    os << ',';
    if (measured && !measured->missing(i)) os << fmt(measured->value(i));
    os << '\n';
  }
}

}  // namespace wk
