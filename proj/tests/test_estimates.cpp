#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "wk/error.hpp"
#include "wk/estimates.hpp"
#include "wk/fit.hpp"

using namespace wk;

namespace {

Profile filled(const std::vector<double>& ladder, const std::function<double(double)>& f, const char* name) {
  Profile p(ladder, name);
  for (std::size_t i = 0; i < ladder.size(); ++i) p.set(i, f(ladder[i]));
  return p;
}

DivergenceResult classify(const std::function<double(double)>& f) {
  const auto t = log_ladder(1e-12, 0.5, 40);
  std::vector<double> v;
  for (double x : t) v.push_back(f(x));
  return divergence_test(t, v);
}

double L(double t) { return std::log(1 / t); }

}  // namespace

TEST_CASE("every id has a unique name") {
  std::set<std::string> names;
  for (Estimate id : kAllEstimates) {
    const std::string n = to_string(id);
    CHECK(names.insert(n).second);
    CHECK(estimate_from_string(n) == id);
  }
  CHECK(names.size() == 12);
  CHECK_FALSE(estimate_from_string("nope").has_value());
}

TEST_CASE("regime gating") {
  for (Estimate id : kAllEstimates) {
    const bool expo = estimate_info(id).exponential;
    CAPTURE(to_string(id));
    if (expo) {
      CHECK_NOTHROW(check_regime(id, 2.0, 1.0));
      CHECK_THROWS_AS(check_regime(id, 2.0, 1.5), RegimeError);
      CHECK_THROWS_AS(check_regime(id, 3.0, 2.5), RegimeError);
    } else {
      CHECK_NOTHROW(check_regime(id, 2.0, 1.5));
      CHECK_NOTHROW(check_regime(id, 2.0, 2.0));
      CHECK_THROWS_AS(check_regime(id, 2.0, 1.0), RegimeError);
      CHECK_THROWS_AS(check_regime(id, 2.0, 2.5), RegimeError);
    }
    CHECK_THROWS_AS(integrand(id, {2.0, expo ? 1.5 : 1.0, 1.0}, 1, 1, 1, 0.1), RegimeError);
  }
}

TEST_CASE("integrand values") {
  const IntegrandParams rat{2.0, 1.5, 1.0};
  const double lam = 400, q = 4, t = 0.01;
  // rational damping 1 / (1 + q^{1/(alpha-p+1)}) = 1 / 17
  CHECK(integrand(Estimate::MinRational, rat, lam, q, 0, t) == doctest::Approx(std::min(t * lam, 20.0) / 17));
  CHECK(integrand(Estimate::RootRational, rat, lam, q, 0, t) == doctest::Approx(20.0 / 17));
  CHECK(integrand(Estimate::LinearRationalCapacity, rat, lam, q, 0, t) == doctest::Approx(4.0 / 17));
  CHECK(integrand(Estimate::DiamRational, rat, 0, q, 50, t) == doctest::Approx(50.0 / 17));
  const IntegrandParams ex{3.0, 2.0, 0.5};
  CHECK(integrand(Estimate::MinExponential, ex, lam, q, 0, t) ==
        doctest::Approx(std::exp(-2.0) * std::min(std::sqrt(t * lam), std::cbrt(lam))));
  CHECK(integrand(Estimate::DiamExponential, ex, 0, q, 7, t) == doctest::Approx(7 * std::exp(-2.0)));
  CHECK_THROWS_AS(integrand(Estimate::RootRational, rat, -1, q, 0, t), PreconditionError);
  CHECK_THROWS_AS(integrand(Estimate::RootRational, rat, lam, -1, 0, t), PreconditionError);
}

TEST_CASE("integrand properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  const IntegrandParams rat{2.0, 1.5, 1.0};
  for (int i = 0; i < 200; ++i) {
    const double lam = std::exp(3 * u(rng)), q = std::exp(u(rng)), t = std::exp(u(rng) - 3);
    // the min form never exceeds either branch
    const double mn = integrand(Estimate::MinRational, rat, lam, q, 0, t);
    CHECK(mn <= integrand(Estimate::RootRational, rat, lam, q, 0, t) * (1 + 1e-12));
    CHECK(mn <= integrand(Estimate::LinearRationalCapacity, rat, lam, q, 0, t) * (1 + 1e-12));
    // larger q damps more
    CHECK(integrand(Estimate::RootRational, rat, lam, 2 * q, 0, t) < integrand(Estimate::RootRational, rat, lam, q, 0, t));
    CHECK(integrand(Estimate::RootExponential, {2, 1, 1}, lam, 2 * q, 0, t) <
          integrand(Estimate::RootExponential, {2, 1, 1}, lam, q, 0, t));
    // zero q leaves the geometric term untouched
    CHECK(integrand(Estimate::RootExponential, {2, 1, 1}, lam, 0, 0, t) == doctest::Approx(std::sqrt(lam)));
  }
}

TEST_CASE("divergence of synthetic tails") {
  auto a = classify([](double t) { return std::pow(t, -2.0); });
  CHECK(a.verdict == Divergence::Diverges);
  CHECK(a.tail_kind == "power");
  CHECK(a.tail_exponent == doctest::Approx(-2.0).epsilon(1e-6));

  CHECK(classify([](double t) { return std::pow(t, -0.5); }).verdict == Divergence::Converges);

  auto b = classify([](double t) { return 1 / t; });
  CHECK(b.verdict == Divergence::Diverges);
  CHECK(b.tail_kind == "log");

  auto c = classify([](double t) { return 1 / (t * L(t)); });
  CHECK(c.verdict == Divergence::Diverges);
  CHECK(c.tail_kind == "log-log");
  CHECK(c.log_exponent == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(classify([](double t) { return 1 / (t * L(t) * L(t)); }).verdict == Divergence::Converges);
  CHECK(classify([](double t) { return 1 / (t * std::pow(L(t), 1.1)); }).verdict == Divergence::Indeterminate);

  auto z = classify([](double) { return 0.0; });
  CHECK(z.verdict == Divergence::Converges);
  CHECK(z.tail_kind == "zero");

  const std::vector<double> t{0.1, 0.2}, f{1, 1};
  CHECK(divergence_test(t, f).verdict == Divergence::Unresolved);
  CHECK_THROWS_AS(divergence_test(t, std::vector<double>{1.0}), PreconditionError);
}

TEST_CASE("missing samples are skipped") {
  const auto t = log_ladder(1e-8, 0.5, 20);
  std::vector<double> f;
  std::vector<std::uint8_t> miss(t.size(), 0);
  for (std::size_t i = 0; i < t.size(); ++i) f.push_back(i % 3 == 0 ? NAN : 1 / t[i]);
  for (std::size_t i = 0; i < t.size(); i += 5) miss[i] = 1;
  const auto r = divergence_test(t, f, miss);
  CHECK(r.verdict == Divergence::Diverges);
  CHECK(r.rungs < static_cast<int>(t.size()));
}

TEST_CASE("bound curve integral against closed forms") {
  const auto ladder = log_ladder(1e-4, 1.0, 16);
  const double c = 9.0;
  // Lambda = c / t^2, q = 0: root integrand sqrt(c) / t, integral sqrt(c) log(R / r)
  const auto lam = filled(ladder, [&](double t) { return c / (t * t); }, "Lambda");
  const auto q = filled(ladder, [](double) { return 0.0; }, "q");
  EstimateInputs in;
  in.p = 2;
  in.alpha = 1.5;
  in.R = 1.0;
  in.lambda_spectral = &lam;
  in.q = &q;
  in.cone_positive = true;
  const auto rep = bound_curve(Estimate::RootRational, in, 2.0, 0.5, 1.0);
  CHECK_FALSE(rep.refused);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    CHECK(rep.integrals[i] == doctest::Approx(3 * std::log(1 / ladder[i])).epsilon(1e-9));
    CHECK(rep.bound[i] == doctest::Approx(2.0 * std::pow(ladder[i], 1.5)).epsilon(1e-9));
  }
  // linear form: (t Lambda) = c / t, integral c log(R/r) as well
  in.lambda_capacity = &lam;
  const auto lin = bound_curve(Estimate::LinearRationalCapacity, in, 1.0, 1.0, 1.0);
  CHECK(lin.integrals[0] == doctest::Approx(9 * std::log(1e4)).epsilon(1e-9));

  // power integrand t^{-1/2}: the top segment is exact, the trapezoid close
  const auto lam2 = filled(ladder, [](double t) { return 1 / t; }, "Lambda");
  in.lambda_spectral = &lam2;
  const auto pw = bound_curve(Estimate::RootRational, in, 1.0, 1.0, 1.0, {true, {}});
  for (std::size_t i = 0; i < ladder.size(); ++i)
    CHECK(pw.integrals[i] == doctest::Approx(2 * (1 - std::sqrt(ladder[i]))).epsilon(0.01));
}

TEST_CASE("bound curve is monotone and dominated by M_R") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const auto ladder = log_ladder(1e-3, 1.0, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lam = filled(ladder, [&](double t) { return u(rng) / (t * t); }, "Lambda");
    const auto q = filled(ladder, [&](double) { return u(rng); }, "q");
    EstimateInputs in;
    in.p = 2;
    in.alpha = 1.5;
    in.lambda_spectral = &lam;
    in.q = &q;
    const double MR = u(rng);
    const auto rep = bound_curve(Estimate::MinRational, in, MR, u(rng), 1.0);
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
      CHECK(rep.integrals[i] >= rep.integrals[i + 1]);
      CHECK(rep.bound[i] <= rep.bound[i + 1]);
    }
    CHECK(rep.bound.back() <= MR);
  }
}

TEST_CASE("refusals") {
  const auto ladder = log_ladder(1e-6, 1.0, 20);
  const auto lam = filled(ladder, [](double t) { return 1 / (t * t); }, "Lambda");
  const auto q = filled(ladder, [](double) { return 1.0; }, "q");
  EstimateInputs in;
  in.p = 2;
  in.alpha = 1.5;
  in.lambda_spectral = &lam;
  in.q = &q;
  auto r = bound_curve(Estimate::RootRational, in, 1, 1, 1);
  CHECK(r.refused);
  CHECK(r.reason.find("not evaluated") != std::string::npos);
  in.cone_positive = false;
  CHECK(bound_curve(Estimate::RootRational, in, 1, 1, 1).refused);
  in.cone_positive = true;
  CHECK_FALSE(bound_curve(Estimate::RootRational, in, 1, 1, 1).refused);
  // the min form needs no cone condition
  in.cone_positive.reset();
  CHECK_FALSE(bound_curve(Estimate::MinRational, in, 1, 1, 1).refused);

  // a convergent integral gives no estimate
  const auto weak = filled(ladder, [](double t) { return 1 / t; }, "Lambda");
  in.lambda_spectral = &weak;
  CHECK(bound_curve(Estimate::MinRational, in, 1, 1, 1).refused);
  CHECK_FALSE(bound_curve(Estimate::MinRational, in, 1, 1, 1, {true, {}}).refused);

  CHECK_THROWS_AS(bound_curve(Estimate::DiamRational, in, 1, 1, 1), PreconditionError);
  CHECK_THROWS_AS(bound_curve(Estimate::MinExponential, in, 1, 1, 1), RegimeError);
}

TEST_CASE("missing rungs leave gaps in the bound") {
  const auto ladder = log_ladder(1e-3, 1.0, 8);
  auto lam = filled(ladder, [](double t) { return 1 / (t * t); }, "Lambda");
  lam.mark_missing(3);
  const auto q = filled(ladder, [](double) { return 0.0; }, "q");
  EstimateInputs in;
  in.alpha = 1.5;
  in.lambda_spectral = &lam;
  in.q = &q;
  const auto rep = bound_curve(Estimate::MinRational, in, 1, 1, 1);
  CHECK(std::isnan(rep.integrand_values[3]));
  CHECK(std::isnan(rep.bound[3]));
  CHECK(std::isfinite(rep.bound[2]));
}

TEST_CASE("calibration pins the bound to the measurement") {
  const auto ladder = log_ladder(1e-3, 1.0, 10);
  const auto lam = filled(ladder, [](double t) { return 4 / (t * t); }, "Lambda");
  const auto q = filled(ladder, [](double) { return 0.0; }, "q");
  EstimateInputs in;
  in.alpha = 1.5;
  in.lambda_spectral = &lam;
  in.q = &q;
  const auto rep = bound_curve(Estimate::MinRational, in, 1.0, 1.0, 1.0);
  const auto M = filled(ladder, [](double t) { return 0.7 * t; }, "M");
  const auto cal = calibrate(rep, M);
  REQUIRE(cal.has_value());
  CHECK(cal->r_cal < 0.5);
  CHECK(ladder[cal->index + 1] >= 0.5);
  const auto fixed = with_constant(rep, cal->C);
  CHECK(fixed.bound[cal->index] == doctest::Approx(M.value(cal->index)));

  Profile none(ladder, "M");
  for (std::size_t i = 0; i < ladder.size(); ++i) none.mark_missing(i);
  CHECK_FALSE(calibrate(rep, none).has_value());
}

TEST_CASE("catalog growth functions") {
  ExampleParams x;
  x.p = 2;
  x.alpha = 1.5;
  x.s = 2;
  x.l = -0.5;
  CHECK(f_catalog(Example::ConeComplement, x).branch == "log 1/r");
  x.l = -0.6;
  CHECK_FALSE(f_catalog(Example::ConeComplement, x).guaranteed);

  x.l = -1.5;  // alpha - p + 1 - s
  CHECK(f_catalog(Example::PowerCusp, x).branch == "log 1/r");
  x.l = -1.0;
  const auto mid = f_catalog(Example::PowerCusp, x);
  REQUIRE(mid.guaranteed);
  CHECK(mid.f(0.01) == doctest::Approx(std::pow(0.01, -1.0)));
  x.l = 0.0;
  CHECK(f_catalog(Example::PowerCusp, x).f(0.1) == doctest::Approx(10.0));
  x.l = -2.0;
  CHECK_FALSE(f_catalog(Example::PowerCusp, x).guaranteed);

  x.log_form = true;
  x.sigma = 0.5;  // alpha - p + 1
  CHECK(f_catalog(Example::ConeComplement, x).branch == "log log 1/r");
  x.sigma = 0.25;
  CHECK(f_catalog(Example::ConeComplement, x).f(std::exp(-16.0)) == doctest::Approx(4.0));
  x.sigma = 0.75;
  CHECK_FALSE(f_catalog(Example::ConeComplement, x).guaranteed);

  ExampleParams c;
  c.p = 2;
  c.alpha = 1;
  c.s = 2;
  c.l = -2;
  CHECK(f_catalog(Example::PowerCuspCritical, c).f(0.5) == doctest::Approx(2.0));
  c.l = -2.5;
  CHECK_FALSE(f_catalog(Example::PowerCuspCritical, c).guaranteed);
}

// The catalog growth f must reproduce the integral of the matching integrand
// built from exact power-law profiles.
TEST_CASE("catalog agrees with integrals of synthetic profiles") {
  const auto ladder = log_ladder(1e-10, 1.0, 40);
  const double p = 2, alpha = 1.5, s = 2;
  for (double l : {-1.5, -1.25, -1.0, 0.0}) {
    CAPTURE(l);
    ExampleParams x;
    x.p = p;
    x.alpha = alpha;
    x.s = s;
    x.l = l;
    const auto entry = f_catalog(Example::PowerCusp, x);
    REQUIRE(entry.guaranteed);
    const auto D = filled(ladder, [&](double t) { return std::pow(t, -s); }, "D");
    const auto q = filled(ladder, [&](double t) { return std::pow(t, s * (p - alpha) + l); }, "q");
    EstimateInputs in;
    in.p = p;
    in.alpha = alpha;
    in.q = &q;
    in.D = &D;
    in.cone_positive = true;
    const auto rep = bound_curve(Estimate::DiamRational, in, 1, 1, 1);
    std::vector<double> lf, li;
    for (std::size_t i = 0; i < ladder.size() / 2; ++i) {
      lf.push_back(entry.f(ladder[i]) - entry.f(1.0));
      li.push_back(rep.integrals[i]);
    }
    CHECK(fit_loglog(lf, li).slope == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("literature thresholds") {
  for (int n = 2; n <= 10; ++n)
    for (double s : {1.5, 2.0, 3.0}) {
      ExampleParams x;
      x.p = 2;
      x.alpha = 1.5;
      x.n = n;
      x.s = s;
      const auto c = literature_threshold(Example::PowerCusp, x);
      CHECK(c.literature == doctest::Approx(-0.5 * (n + s - 1) / n));
      CHECK(c.here == doctest::Approx(-0.5 + 1 - s));
      CHECK(c.here < c.literature);
      x.alpha = 1;
      const auto d = literature_threshold(Example::PowerCuspCritical, x);
      CHECK(d.literature == doctest::Approx(-(n + s - 1) / n));
      CHECK(d.here == -s);
      CHECK(d.here < d.literature);
    }
  ExampleParams cone;
  cone.alpha = 1.5;
  const auto c = literature_threshold(Example::ConeComplement, cone);
  CHECK(c.gap == 0.0);
  CHECK(c.improvement);
}
