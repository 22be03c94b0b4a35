#include "wk/estimates.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "wk/error.hpp"
#include "wk/fit.hpp"

namespace wk {

namespace {

constexpr double kTol = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same(double a, double b) { return std::abs(a - b) <= kTol * std::max(1.0, std::abs(b)); }

const EstimateInfo kInfo[] = {
    {Estimate::MinRational, "min-rational", false, IntegrandForm::Min, LambdaSource::Spectral, false},
    {Estimate::RootRational, "root-rational", false, IntegrandForm::Root, LambdaSource::Spectral, true},
    {Estimate::DiamRational, "diam-rational", false, IntegrandForm::InverseDiam, LambdaSource::None, true},
    {Estimate::MinRationalDensity, "min-rational-density", false, IntegrandForm::Min, LambdaSource::Density,
     false},
    {Estimate::RootRationalDensity, "root-rational-density", false, IntegrandForm::Root,
     LambdaSource::Density, true},
    {Estimate::LinearRationalCapacity, "linear-rational-capacity", false, IntegrandForm::Linear,
     LambdaSource::Capacity, false},
    {Estimate::MinExponential, "min-exponential", true, IntegrandForm::Min, LambdaSource::Spectral, false},
    {Estimate::RootExponential, "root-exponential", true, IntegrandForm::Root, LambdaSource::Spectral, true},
    {Estimate::DiamExponential, "diam-exponential", true, IntegrandForm::InverseDiam, LambdaSource::None,
     true},
    {Estimate::MinExponentialDensity, "min-exponential-density", true, IntegrandForm::Min,
     LambdaSource::Density, false},
    {Estimate::RootExponentialDensity, "root-exponential-density", true, IntegrandForm::Root,
     LambdaSource::Density, true},
    {Estimate::LinearExponentialCapacity, "linear-exponential-capacity", true, IntegrandForm::Linear,
     LambdaSource::Capacity, false},
};

}  // namespace

const EstimateInfo& estimate_info(Estimate id) {
  for (const auto& info : kInfo)
    if (info.id == id) return info;
  throw PreconditionError("unknown estimate id");
}

const char* to_string(Estimate id) { return estimate_info(id).name; }

std::optional<Estimate> estimate_from_string(const std::string& name) {
  for (const auto& info : kInfo)
    if (name == info.name) return info.id;
  return std::nullopt;
}

void check_regime(Estimate id, double p, double alpha) {
  const auto& info = estimate_info(id);
  if (info.exponential) {
    if (!same(alpha, p - 1.0))
      throw RegimeError(std::string(info.name) + " applies to alpha = p - 1 only");
  } else {
    if (!(alpha > p - 1.0 + kTol) || alpha > p + kTol)
      throw RegimeError(std::string(info.name) + " applies to p - 1 < alpha <= p only");
  }
}

double integrand(Estimate id, const IntegrandParams& prm, double Lambda, double q, double D, double t) {
  check_regime(id, prm.p, prm.alpha);
  const auto& info = estimate_info(id);
  if (!(t > 0.0)) throw PreconditionError("integrand needs t > 0");
  const bool uses_lambda = info.form != IntegrandForm::InverseDiam;
  if (uses_lambda && !(Lambda >= 0.0)) throw PreconditionError("Lambda must be non-negative");
  if (!uses_lambda && !(D >= 0.0)) throw PreconditionError("D must be non-negative");
  if (!(q >= 0.0)) throw PreconditionError("q must be non-negative");

  double base = 0.0;
  switch (info.form) {
    case IntegrandForm::Min:
      base = std::min(std::pow(t * Lambda, 1.0 / (prm.p - 1.0)), std::pow(Lambda, 1.0 / prm.p));
      break;
    case IntegrandForm::Root:
      base = std::pow(Lambda, 1.0 / prm.p);
      break;
    case IntegrandForm::InverseDiam:
      base = D;
      break;
    case IntegrandForm::Linear:
      base = std::pow(t * Lambda, 1.0 / (prm.p - 1.0));
      break;
  }
  if (info.exponential) return std::exp(-prm.k * q) * base;
  return base / (1.0 + std::pow(q, 1.0 / (prm.alpha - prm.p + 1.0)));
}

// ---------------------------------------------------------------- divergence

const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::Diverges:
      return "diverges";
    case Divergence::Converges:
      return "converges";
    case Divergence::Indeterminate:
      return "indeterminate";
    case Divergence::Unresolved:
      return "unresolved";
  }
  return "?";
}

nlohmann::json DivergenceResult::to_json() const {
  return {{"verdict", to_string(verdict)},
          {"tail_exponent", tail_exponent},
          {"log_exponent", log_exponent},
          {"tail_kind", tail_kind},
          {"rungs", rungs}};
}

DivergenceResult divergence_test(std::span<const double> t, std::span<const double> f,
                                 std::span<const std::uint8_t> missing, const DivergenceOptions& opts) {
  if (t.size() != f.size()) throw PreconditionError("ladder and samples differ in length");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!missing.empty() && missing[i]) continue;
    if (!(t[i] > 0.0) || !std::isfinite(f[i]) || f[i] < 0.0) continue;
    pts.emplace_back(t[i], f[i]);
  }
  std::sort(pts.begin(), pts.end());
  DivergenceResult res;
  res.rungs = static_cast<int>(pts.size());
  if (res.rungs < opts.min_rungs) {
    res.tail_kind = "unresolved";
    return res;
  }
  const std::size_t tail_n =
      std::min(pts.size(), std::max<std::size_t>(opts.min_tail, (pts.size() + 1) / 2));
  std::vector<std::pair<double, double>> tail(pts.begin(), pts.begin() + tail_n);
  std::vector<std::pair<double, double>> positive;
  for (const auto& pt : tail)
    if (pt.second > 0.0) positive.push_back(pt);
  if (positive.size() < static_cast<std::size_t>(opts.min_rungs)) {
    // the integrand vanishes on the tail
    res.verdict = Divergence::Converges;
    res.tail_kind = "zero";
    return res;
  }

  std::vector<double> lt, lf;
  bool log_fit = true;
  for (const auto& [ti, fi] : positive) {
    lt.push_back(std::log(ti));
    lf.push_back(std::log(fi));
    if (!(ti < 1.0)) log_fit = false;
  }
  double a = 0.0, beta = 0.0;
  if (log_fit && positive.size() >= 4) {
    const long m = static_cast<long>(positive.size());
    Eigen::MatrixXd X(m, 3);
    Eigen::VectorXd y(m);
    for (long i = 0; i < m; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = lt[i];
      X(i, 2) = -std::log(-lt[i]);
      y[i] = lf[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == 3) {
      const Eigen::VectorXd c = qr.solve(y);
      a = c[1];
      beta = c[2];
    } else {
      log_fit = false;
    }
  } else {
    log_fit = false;
  }
  if (!log_fit) {
    a = fit_line(lt, lf).slope;
    beta = 0.0;
  }
  res.tail_exponent = a;
  res.log_exponent = beta;
  if (a < -1.0 - opts.slope_band) {
    res.verdict = Divergence::Diverges;
    res.tail_kind = "power";
  } else if (a > -1.0 + opts.slope_band) {
    res.verdict = Divergence::Converges;
    res.tail_kind = "power";
  } else if (!log_fit) {
    res.verdict = Divergence::Indeterminate;
    res.tail_kind = "log";
  } else {
    if (beta <= opts.log_diverge) res.verdict = Divergence::Diverges;
    else if (beta >= opts.log_converge) res.verdict = Divergence::Converges;
    else res.verdict = Divergence::Indeterminate;
    // 1/(t L) tails are fitted with beta slightly below 1 because of lower-order terms
    const bool critical = res.verdict == Divergence::Diverges && std::abs(beta - 1.0) <= opts.critical_band;
    res.tail_kind = critical ? "log-log" : "log";
  }
  return res;
}

// ---------------------------------------------------------------- Lambda variants

Profile capacity_lambda_profile(const DomainSpec& domain, const ExponentConfig& exps,
                                std::span<const double> ladder, const LocalCapacityOptions& opts) {
  Profile out(std::vector<double>(ladder.begin(), ladder.end()), "Lambda_capacity");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    try {
      const double c = shell_complement_capacity(domain, r, exps.theta, exps.p, opts);
      out.set(i, std::pow(r, -domain.dim()) * c);
    } catch (const ConvergenceError&) {
      out.mark_missing(i);
    }
  }
  return out;
}

Profile density_lambda_profile(const DomainSpec& domain, const ExponentConfig& exps,
                               std::span<const double> ladder, const DensityLambdaOptions& opts) {
  Profile out(std::vector<double>(ladder.begin(), ladder.end()), "Lambda_density");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    try {
      const double cap_term =
          std::pow(r, -domain.dim()) * shell_complement_capacity(domain, r, exps.theta, exps.p, opts.shell);
      const Region reg = shell_region(domain, r * std::pow(exps.theta, -1.0 / 3.0),
                                      r * std::pow(exps.theta, 1.0 / 3.0), opts.sampling);
      double inf_mu = reg.samples.empty() ? 0.0 : 1e300;
      const std::size_t n = reg.samples.size();
      const std::size_t stride =
          std::max<std::size_t>(1, (n + opts.max_samples - 1) / opts.max_samples);
      for (std::size_t s = 0; s < n && inf_mu > 0.0; s += stride) {
        const double mu = mu_delta(domain, reg.samples[s], exps.delta, exps.p, exps.theta, opts.mu).value;
        inf_mu = std::min(inf_mu, std::pow(mu, exps.p));
      }
      out.set(i, inf_mu + cap_term);
    } catch (const ConvergenceError&) {
      out.mark_missing(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------- bound curves

nlohmann::json EstimateReport::to_json() const {
  auto arr = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) {
      if (std::isfinite(x)) a.push_back(x);
      else a.push_back(nullptr);
    }
    return a;
  };
  nlohmann::json j = {{"id", to_string(id)},
                      {"r", ladder},
                      {"integrand", arr(integrand_values)},
                      {"integral", arr(integrals)},
                      {"bound", arr(bound)},
                      {"divergence", divergence.to_json()},
                      {"constants", {{"M_R", M_R}, {"C", C}, {"k", k}}},
                      {"refused", refused}};
  if (refused) j["reason"] = reason;
  return j;
}

namespace {

const Profile* lambda_for(const EstimateInfo& info, const EstimateInputs& in) {
  switch (info.lambda) {
    case LambdaSource::Spectral:
      return in.lambda_spectral;
    case LambdaSource::Density:
      return in.lambda_density;
    case LambdaSource::Capacity:
      return in.lambda_capacity;
    case LambdaSource::None:
      return nullptr;
  }
  return nullptr;
}

void fill_bound(EstimateReport& rep) {
  rep.bound.assign(rep.ladder.size(), kNaN);
  for (std::size_t i = 0; i < rep.ladder.size(); ++i)
    if (std::isfinite(rep.integrals[i])) rep.bound[i] = rep.M_R * std::exp(-rep.C * rep.integrals[i]);
}

}  // namespace

EstimateReport bound_curve(Estimate id, const EstimateInputs& in, double M_R, double C, double k,
                           const BoundOptions& opts) {
  check_regime(id, in.p, in.alpha);
  const auto& info = estimate_info(id);
  if (!(M_R >= 0.0)) throw PreconditionError("M(R) must be non-negative");
  const Profile* L = lambda_for(info, in);
  if (info.lambda != LambdaSource::None && !L)
    throw PreconditionError(std::string(info.name) + " needs a Lambda profile");
  if (info.form == IntegrandForm::InverseDiam && !in.D)
    throw PreconditionError(std::string(info.name) + " needs the inverse-diameter profile");
  if (!in.q) throw PreconditionError(std::string(info.name) + " needs the q profile");
  const Profile* driver = L ? L : in.D;
  if (!same_ladder(driver->ladder(), in.q->ladder()))
    throw PreconditionError("profiles do not share a ladder");

  EstimateReport rep;
  rep.id = id;
  rep.R = in.R;
  rep.M_R = M_R;
  rep.C = C;
  rep.k = k;
  rep.ladder.assign(driver->ladder().begin(), driver->ladder().end());
  const std::size_t n = rep.ladder.size();
  const IntegrandParams prm{in.p, in.alpha, k};

  auto value_at = [&](std::size_t i) -> double {
    if (driver->missing(i) || in.q->missing(i)) return kNaN;
    const double lam = L ? L->value(i) : 0.0;
    const double D = in.D && !in.D->missing(i) ? in.D->value(i) : 0.0;
    if (info.form == IntegrandForm::InverseDiam && (!in.D || in.D->missing(i))) return kNaN;
    return integrand(id, prm, lam, in.q->value(i), D, rep.ladder[i]);
  };
  rep.integrand_values.resize(n);
  std::vector<std::uint8_t> miss(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    rep.integrand_values[i] = value_at(i);
    miss[i] = std::isfinite(rep.integrand_values[i]) ? 0 : 1;
  }
  rep.divergence = divergence_test(rep.ladder, rep.integrand_values, miss, opts.divergence);

  // trapezoid in log t between available rungs; from the top rung to R the
  // integrand continues as the power law through the two highest rungs
  rep.integrals.assign(n, kNaN);
  std::vector<std::size_t> avail;
  for (std::size_t i = 0; i < n; ++i)
    if (!miss[i]) avail.push_back(i);
  if (!avail.empty() && rep.ladder[avail.back()] < in.R) {
    const std::size_t top = avail.back();
    const double t_top = rep.ladder[top];
    const double g_top = t_top * rep.integrand_values[top];
    double slope = 0.0;   // of log(t f) against log t
    if (avail.size() >= 2) {
      const std::size_t below = avail[avail.size() - 2];
      const double g_below = rep.ladder[below] * rep.integrand_values[below];
      if (g_top > 0.0 && g_below > 0.0)
        slope = std::log(g_top / g_below) / std::log(t_top / rep.ladder[below]);
    }
    const double span = std::log(in.R / t_top);
    double acc = std::abs(slope * span) < 1e-12 ? g_top * span : g_top * std::expm1(slope * span) / slope;
    rep.integrals[top] = acc;
    for (std::size_t a = avail.size() - 1; a-- > 0;) {
      const std::size_t lo = avail[a], hi = avail[a + 1];
      const double g_lo = rep.ladder[lo] * rep.integrand_values[lo];
      const double g_hi = rep.ladder[hi] * rep.integrand_values[hi];
      acc += 0.5 * (g_lo + g_hi) * std::log(rep.ladder[hi] / rep.ladder[lo]);
      rep.integrals[lo] = acc;
    }
  }
  fill_bound(rep);

  if (info.needs_cone && !in.cone_positive.has_value()) {
    rep.refused = true;
    rep.reason = "cone condition was not evaluated";
  } else if (info.needs_cone && !*in.cone_positive) {
    rep.refused = true;
    rep.reason = "cone condition is degenerate";
  } else if (rep.divergence.verdict != Divergence::Diverges && !opts.override_divergence) {
    rep.refused = true;
    rep.reason = std::string("integral at zero is ") + to_string(rep.divergence.verdict) +
                 "; no decay estimate applies";
  }
  return rep;
}

std::optional<Calibration> calibrate(const EstimateReport& report, const Profile& measured) {
  if (!same_ladder(report.ladder, measured.ladder()))
    throw PreconditionError("measurement and report use different ladders");
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < report.ladder.size(); ++i) {
    if (!(report.ladder[i] < 0.5 * report.R)) break;
    if (measured.missing(i) || !std::isfinite(report.integrals[i])) continue;
    pick = i;
  }
  if (!pick) return std::nullopt;
  const double I = report.integrals[*pick];
  const double M = measured.value(*pick);
  if (!(I > 0.0) || !(M > 0.0) || !(report.M_R > 0.0)) return std::nullopt;
  return Calibration{std::log(report.M_R / M) / I, report.ladder[*pick], *pick};
}

EstimateReport with_constant(EstimateReport report, double C) {
  report.C = C;
  fill_bound(report);
  return report;
}

// ---------------------------------------------------------------- closed forms

namespace {

CatalogEntry none(std::string why) {
  CatalogEntry e;
  e.branch = "no guarantee: " + why;
  return e;
}

CatalogEntry entry(std::string branch, std::function<double(double)> f) {
  CatalogEntry e;
  e.guaranteed = true;
  e.branch = std::move(branch);
  e.f = std::move(f);
  return e;
}

double log_inv(double r) { return std::log(1.0 / r); }

CatalogEntry log_power_branch(double sigma, double a1) {
  // a1 = alpha - p + 1
  if (sigma < a1 && !same(sigma, a1)) {
    const double e = (a1 - sigma) / a1;
    return entry("(log 1/r)^" + std::to_string(e), [e](double r) { return std::pow(log_inv(r), e); });
  }
  if (same(sigma, a1)) return entry("log log 1/r", [](double r) { return std::log(log_inv(r)); });
  return none("sigma > alpha - p + 1");
}

}  // namespace

CatalogEntry f_catalog(Example example, const ExampleParams& x) {
  const double a = x.alpha - x.p;  // alpha - p
  const double a1 = a + 1.0;       // alpha - p + 1
  if (example == Example::PowerCuspCritical) {
    if (!same(x.alpha, x.p - 1.0)) return none("requires alpha = p - 1");
    if (x.log_form) return none("log-form coefficients are not covered for alpha = p - 1");
    if (x.l >= -x.s || same(x.l, -x.s)) {
      const double e = 1.0 - x.s;
      return entry("r^" + std::to_string(e), [e](double r) { return std::pow(r, e); });
    }
    return none("l < -s");
  }
  if (!(x.alpha > x.p - 1.0 + kTol) || x.alpha > x.p + kTol)
    return none("requires p - 1 < alpha <= p");
  if (!(x.s > 1.0) && example == Example::PowerCusp) return none("requires s > 1");

  if (example == Example::ConeComplement) {
    if (x.log_form) {
      if (x.sigma <= 0.0) return entry("log 1/r", log_inv);
      return log_power_branch(x.sigma, a1);
    }
    if (x.l >= a || same(x.l, a)) return entry("log 1/r", log_inv);
    return none("l < alpha - p");
  }

  // power cusp
  if (x.log_form) return log_power_branch(x.sigma, a1);
  const double upper = x.s * a;        // s (alpha - p)
  const double lower = a1 - x.s;       // alpha - p + 1 - s
  if (x.l >= upper || same(x.l, upper)) {
    const double e = 1.0 - x.s;
    return entry("r^" + std::to_string(e), [e](double r) { return std::pow(r, e); });
  }
  if (same(x.l, lower)) return entry("log 1/r", log_inv);
  if (x.l > lower) {
    const double e = (a1 - x.s - x.l) / a1;
    return entry("r^" + std::to_string(e), [e](double r) { return std::pow(r, e); });
  }
  return none("l < alpha - p + 1 - s");
}

ThresholdComparison literature_threshold(Example example, const ExampleParams& x) {
  ThresholdComparison c;
  const double a = x.alpha - x.p;
  const double n = x.n;
  switch (example) {
    case Example::ConeComplement:
      // earlier work needs l > alpha - p; the critical exponent itself is covered here
      c.literature = a;
      c.here = a;
      break;
    case Example::PowerCusp:
      c.literature = a * (n + x.s - 1.0) / n;
      c.here = a + 1.0 - x.s;
      break;
    case Example::PowerCuspCritical:
      c.literature = -(n + x.s - 1.0) / n;
      c.here = -x.s;
      break;
  }
  c.gap = c.literature - c.here;
  c.improvement = c.here <= c.literature;
  return c;
}

}  // namespace wk
