#include "wk/profiles.hpp"

#include <algorithm>
#include <cmath>

#include "wk/error.hpp"

namespace wk {

namespace {

constexpr double kExponentTol = 1e-12;

bool near(double a, double b) { return std::abs(a - b) <= kExponentTol * std::max(1.0, std::abs(b)); }

}  // namespace

const char* to_string(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::Zero:
      return "zero";
    case CoefficientKind::PowerLaw:
      return "power_law";
    case CoefficientKind::PowerLog:
      return "power_log";
    case CoefficientKind::CustomOracle:
      return "custom";
  }
  return "?";
}

Coefficient Coefficient::zero() { return Coefficient{}; }

Coefficient Coefficient::power_law(double k2, double l) {
  if (!(k2 >= 0.0) || !std::isfinite(k2) || !std::isfinite(l))
    throw PreconditionError("power-law coefficient needs finite k2 >= 0 and l");
  Coefficient c;
  c.kind_ = CoefficientKind::PowerLaw;
  c.k2_ = k2;
  c.l_ = l;
  return c;
}

Coefficient Coefficient::power_log(double k2, double l, double sigma) {
  if (!(k2 >= 0.0) || !std::isfinite(k2) || !std::isfinite(l) || !std::isfinite(sigma))
    throw PreconditionError("power-log coefficient needs finite k2 >= 0, l, sigma");
  Coefficient c;
  c.kind_ = CoefficientKind::PowerLog;
  c.k2_ = k2;
  c.l_ = l;
  c.sigma_ = sigma;
  return c;
}

Coefficient Coefficient::custom(std::function<double(const Point&)> b, std::string label) {
  if (!b) throw PreconditionError("custom coefficient needs an oracle");
  Coefficient c;
  c.kind_ = CoefficientKind::CustomOracle;
  c.custom_ = std::move(b);
  c.label_ = std::move(label);
  return c;
}

Coefficient Coefficient::from_json(const nlohmann::json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "zero") return zero();
    if (kind == "power_law") return power_law(doc.at("k2").get<double>(), doc.at("l").get<double>());
    if (kind == "power_log")
      return power_log(doc.at("k2").get<double>(), doc.at("l").get<double>(),
                       doc.at("sigma").get<double>());
    throw PreconditionError("unknown coefficient kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed coefficient document: ") + e.what());
  }
}

nlohmann::json Coefficient::to_json() const {
  switch (kind_) {
    case CoefficientKind::Zero:
      return {{"kind", "zero"}};
    case CoefficientKind::PowerLaw:
      return {{"kind", "power_law"}, {"k2", k2_}, {"l", l_}};
    case CoefficientKind::PowerLog:
      return {{"kind", "power_log"}, {"k2", k2_}, {"l", l_}, {"sigma", sigma_}};
    case CoefficientKind::CustomOracle:
      break;
  }
  throw PreconditionError("custom coefficients cannot be serialized");
}

double Coefficient::operator()(const Point& x, int dim) const {
  switch (kind_) {
    case CoefficientKind::Zero:
      return 0.0;
    case CoefficientKind::PowerLaw: {
      const double r = norm(x, dim);
      return k2_ * std::pow(r, l_);
    }
    case CoefficientKind::PowerLog: {
      const double r = norm(x, dim);
      if (!(r < 1.0)) throw PreconditionError("power-log coefficient is defined for |x| < 1 only");
      return k2_ * std::pow(r, l_) * std::pow(std::log(1.0 / r), sigma_);
    }
    case CoefficientKind::CustomOracle: {
      const double v = custom_(x);
      if (!(v >= 0.0)) throw PreconditionError("coefficient oracle returned a negative value");
      return v;
    }
  }
  return 0.0;
}

double Coefficient::sup_on_shell(double r1, double r2) const {
  if (!(r1 > 0.0) || !(r2 > r1)) throw PreconditionError("shell requires 0 < r1 < r2");
  switch (kind_) {
    case CoefficientKind::Zero:
      return 0.0;
    case CoefficientKind::PowerLaw:
      return k2_ * std::max(std::pow(r1, l_), std::pow(r2, l_));
    case CoefficientKind::PowerLog: {
      double best = 0.0;
      const double top = std::min(r2, 1.0);
      if (!(top > r1)) throw PreconditionError("power-log coefficient is defined for |x| < 1 only");
      // r^l (log 1/r)^sigma is unimodal in log r; a dense log sample suffices
      constexpr int kSamples = 257;
      for (int k = 0; k < kSamples; ++k) {
        double r = r1 * std::pow(top / r1, static_cast<double>(k) / (kSamples - 1));
        if (r >= 1.0) r = std::nextafter(1.0, 0.0);
        best = std::max(best, k2_ * std::pow(r, l_) * std::pow(std::log(1.0 / r), sigma_));
      }
      return best;
    }
    case CoefficientKind::CustomOracle:
      break;
  }
  throw PreconditionError("sup_on_shell needs a radial coefficient");
}

double Coefficient::sup_on_samples(const Region& region) const {
  double best = 0.0;
  for (const auto& x : region.samples) best = std::max(best, (*this)(x, region.dim));
  return best;
}

double select_nu(double p, double alpha, int dim, double margin) {
  if (!(p > 1.0)) throw PreconditionError("select_nu requires p > 1");
  if (alpha < p - 1.0 - kExponentTol || alpha > p + kExponentTol)
    throw PreconditionError("select_nu requires p - 1 <= alpha <= p");
  if (!(margin > 0.0)) throw PreconditionError("nu margin must be positive");
  const bool n_is_p = near(p, dim);
  if (near(alpha, p)) return kInfinity;
  if (near(alpha, p - 1.0)) return n_is_p ? p + margin : std::max<double>(dim, p);
  if (n_is_p) return p / (p - alpha) + margin;
  return std::max<double>(dim, p) / (p - alpha);
}

ExponentConfig make_exponents(double p, double alpha, int dim, double theta, double eps, double delta,
                              double nu_margin) {
  ExponentConfig e;
  e.p = p;
  e.alpha = alpha;
  e.nu = select_nu(p, alpha, dim, nu_margin);
  if (!(theta > 1.0)) throw PreconditionError("theta must exceed 1");
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0 - std::pow(theta, -1.0 / 3.0)))
    throw PreconditionError("delta must lie in (0, 1 - theta^(-1/3))");
  e.theta = theta;
  e.eps = eps;
  e.delta = delta;
  e.nu_margin = nu_margin;
  return e;
}

std::optional<double> lnu_eps_norm(const Coefficient& b, const Region& omega, double nu,
                                   const DiamResult& diam, const NormOptions& opts) {
  if (!(nu >= 1.0)) throw PreconditionError("nu must be at least 1");
  if (omega.known_empty || omega.samples.empty() || diam.status == DiamStatus::Empty) return 0.0;
  if (diam.status == DiamStatus::Unresolved) return std::nullopt;
  if (b.kind() == CoefficientKind::Zero) return 0.0;
  const int dim = omega.dim;
  if (std::isinf(nu)) return b.sup_on_samples(omega);

  const double d = diam.value;
  const int m = opts.nodes_per_radius;
  const double h = d / m;
  const double cell = std::pow(h, dim);
  const std::size_t n = omega.samples.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + opts.max_centers - 1) / opts.max_centers);
  const int kmax = dim == 3 ? m : 1;
  const int kmin = dim == 3 ? -m : 0;
  double best = 0.0;
  for (std::size_t s = 0; s < n; s += stride) {
    const Point& x = omega.samples[s];
    double sum = 0.0;
    for (int k = kmin; k < kmax; ++k)
      for (int j = -m; j < m; ++j)
        for (int i = -m; i < m; ++i) {
          // cell-centred quadrature over the ball
          const double oz = dim == 3 ? (k + 0.5) * h : 0.0;
          const Point off{(i + 0.5) * h, (j + 0.5) * h, oz};
          if (norm(off, dim) >= d) continue;
          const Point y{x[0] + off[0], x[1] + off[1], x[2] + off[2]};
          if (!omega.contains(y)) continue;
          sum += std::pow(b(y, dim), nu) * cell;
        }
    best = std::max(best, sum);
  }
  return std::pow(best / unit_sphere_measure(dim), 1.0 / nu);
}

nlohmann::json DiamProfile::to_json() const {
  nlohmann::json rungs = nlohmann::json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    rungs.push_back({{"r", diam.ladder()[i]},
                     {"diam", r.value},
                     {"status", to_string(r.status)},
                     {"evaluations", r.evaluations}});
  }
  return rungs;
}

DiamProfile diam_profile(const DomainSpec& domain, const ExponentConfig& exps,
                         std::span<const double> ladder, const DiamProfileOptions& opts) {
  DiamProfile out;
  out.diam = Profile(std::vector<double>(ladder.begin(), ladder.end()), "diam_eps");
  DiamOptions dopts = opts.diam;
  dopts.p = exps.p;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    if (!(r > 0.0 && r < domain.R())) throw PreconditionError("ladder must lie in (0, R)");
    const Region reg = shell_region(domain, r / exps.theta, r * exps.theta, opts.sampling);
    DiamResult res;
    try {
      res = diam_eps(reg, exps.eps, dopts);
    } catch (const ConvergenceError&) {
      res.status = DiamStatus::Unresolved;
    }
    if (res.status == DiamStatus::Unresolved) out.diam.mark_missing(i);
    else out.diam.set(i, res.value);
    out.results.push_back(res);
  }
  return out;
}

Profile q_profile(const DomainSpec& domain, const Coefficient& b, const ExponentConfig& exps,
                  const DiamProfile& diams, const QProfileOptions& opts) {
  const auto ladder = diams.diam.ladder();
  Profile q(std::vector<double>(ladder.begin(), ladder.end()), "q");
  const int dim = domain.dim();
  QMethod method = opts.method;
  if (method == QMethod::Auto) method = b.radial() ? QMethod::Shortcut : QMethod::General;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (b.kind() == CoefficientKind::Zero) {
      q.set(i, 0.0);
      continue;
    }
    if (diams.diam.missing(i)) {
      q.mark_missing(i);
      continue;
    }
    const double r = ladder[i];
    const double r1 = r / exps.theta, r2 = r * exps.theta;
    const double d = diams.diam.value(i);
    if (method == QMethod::Shortcut) {
      double sup;
      if (b.radial()) {
        sup = b.sup_on_shell(r1, r2);
      } else {
        sup = b.sup_on_samples(shell_region(domain, r1, r2, opts.sampling));
      }
      q.set(i, std::pow(d, exps.p - exps.alpha) * sup);
      continue;
    }
    const Region reg = shell_region(domain, r1, r2, opts.sampling);
    const auto norm_value = lnu_eps_norm(b, reg, exps.nu, diams.results[i], opts.norm);
    if (!norm_value) {
      q.mark_missing(i);
      continue;
    }
    const double power = exps.p - exps.alpha - (std::isinf(exps.nu) ? 0.0 : dim / exps.nu);
    q.set(i, std::pow(d, power) * *norm_value);
  }
  return q;
}

Profile d_profile(const DiamProfile& diams) {
  const auto ladder = diams.diam.ladder();
  Profile out(std::vector<double>(ladder.begin(), ladder.end()), "D");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (diams.diam.missing(i) || !(diams.diam.value(i) > 0.0)) out.mark_missing(i);
    else out.set(i, 1.0 / diams.diam.value(i));
  }
  return out;
}

}  // namespace wk
