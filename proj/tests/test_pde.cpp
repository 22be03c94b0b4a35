#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "wk/error.hpp"
#include "wk/pde.hpp"

using namespace wk;
constexpr double pi = std::numbers::pi;

namespace {

DomainSpec sector(double angle) { return make_domain(DomainKind::Sector, {{"angle", angle}}, 1.0, 2); }

ProblemInstance laplace(const DomainSpec& dom) { return {dom, 2.0, 2.0, Coefficient::zero(), {}, 0.0}; }

// max nodal error against an exact solution
double max_error(const SolutionField& f, const std::function<double(double, double)>& exact) {
  double e = 0.0;
  for (int j = -f.half; j <= f.half; ++j)
    for (int i = -f.half; i <= f.half; ++i) {
      const auto k = f.index(i, j);
      if (f.unknown[k]) e = std::max(e, std::abs(f.u[k] - exact(i * f.h, j * f.h)));
    }
  return e;
}

}  // namespace

TEST_CASE("quarter plane: the first mode extends to 2xy") {
  SolveOptions o;
  o.cells_per_radius = 40;
  const auto f = solve(laplace(sector(pi / 2)), o);
  CHECK(max_error(f, [](double x, double y) { return 2 * x * y; }) < 1e-10);
  CHECK(f.residual < 1e-8);
}

TEST_CASE("re-entrant sector converges to r^{3/2} sin(3 phi / 2)") {
  const auto dom = sector(2 * pi / 3);
  std::vector<double> err;
  for (int c : {25, 50, 100}) {
    SolveOptions o;
    o.cells_per_radius = c;
    const auto f = solve(laplace(dom), o);
    err.push_back(max_error(f, [](double x, double y) {
      return std::pow(std::hypot(x, y), 1.5) * std::sin(1.5 * std::atan2(y, x));
    }));
  }
  CHECK(err[2] < 1e-3);
  CHECK(std::log2(err[0] / err[1]) > 1.2);
  CHECK(std::log2(err[1] / err[2]) > 1.2);
}

TEST_CASE("zero boundary data gives the zero solution") {
  auto inst = laplace(sector(2.0));
  inst.boundary.kind = BoundaryKind::Constant;
  inst.boundary.value = 0.0;
  inst.p = 3.0;
  inst.alpha = 2.5;
  inst.b = Coefficient::power_law(1.0, 0.0);
  SolveOptions o;
  o.cells_per_radius = 30;
  const auto f = solve(inst, o);
  for (double v : f.u) CHECK(v == 0.0);
}

TEST_CASE("maximum principle") {
  const auto dom = make_domain(DomainKind::ConeComplement, {{"k1", 1.0}}, 1.0, 2);
  SolveOptions o;
  o.cells_per_radius = 40;
  for (double p : {2.0, 3.0}) {
    ProblemInstance inst{dom, p, p - 0.5, Coefficient::zero(), {}, 0.0};
    inst.boundary.kind = BoundaryKind::Constant;
    const auto f = solve(inst, o);
    CHECK(f.max_value() <= 1.0 + 1e-9);
    CHECK(f.min_unknown_value() >= -1e-9);
  }
  // b >= 0 makes u a supersolution: still non-negative
  ProblemInstance inst{dom, 3.0, 2.5, Coefficient::power_law(2.0, 0.0), {}, 0.0};
  const auto f = solve(inst, o);
  CHECK(f.min_unknown_value() >= -1e-9);
}

TEST_CASE("positive forcing lowers the solution") {
  const auto dom = sector(pi / 2);
  SolveOptions o;
  o.cells_per_radius = 40;
  const auto plain = solve(laplace(dom), o);
  auto inst = laplace(dom);
  inst.forcing = 1.0;
  const auto forced = solve(inst, o);
  for (std::size_t k = 0; k < plain.u.size(); ++k)
    if (plain.unknown[k]) CHECK(forced.u[k] <= plain.u[k] + 1e-12);
}

TEST_CASE("decay measurement of 2xy") {
  SolveOptions o;
  o.cells_per_radius = 40;
  const auto dom = sector(pi / 2);
  const auto f = solve(laplace(dom), o);
  const auto ladder = log_ladder(0.05, 1.0, 6);
  const auto m = measure_M(f, dom, ladder);
  for (std::size_t i = 0; i < ladder.size(); ++i)
    CHECK(m.M.value(i) == doctest::Approx(ladder[i] * ladder[i]).epsilon(0.01));
  CHECK(m.fit.slope == doctest::Approx(2.0).epsilon(0.01));
  CHECK_FALSE(m.R_star.has_value());
  CHECK(m.sign_changes == 0);
}

TEST_CASE("bound verification on the quarter plane") {
  SolveOptions o;
  o.cells_per_radius = 100;
  const auto dom = sector(pi / 2);
  const auto f = solve(laplace(dom), o);
  const auto ladder = log_ladder(0.02, 1.0, 8);
  const auto m = measure_M(f, dom, ladder);
  // Lambda(r) r^2 = (pi / angle)^2 exactly; feed it in closed form
  Profile lam(ladder, "Lambda"), q(ladder, "q");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    lam.set(i, 4.0 / (ladder[i] * ladder[i]));
    q.set(i, 0.0);
  }
  EstimateInputs in;
  in.p = 2;
  in.alpha = 2;
  in.lambda_spectral = &lam;
  in.q = &q;
  const auto rep = bound_curve(Estimate::MinRational, in, 1.0, 1.0, 1.0);
  const auto v = verify_bound(m, rep);
  CHECK(v.status == BoundStatus::Holds);
  CHECK(v.passed());
  CHECK(v.r_cal < 0.5);
  CHECK(v.C > 0.0);
  CHECK_FALSE(v.first_violation.has_value());

  // a bound whose integral grows like r^{-1/2} falls below r^2 near zero
  for (std::size_t i = 0; i < ladder.size(); ++i) lam.set(i, std::pow(ladder[i], -3.0));
  in.cone_positive = true;
  const auto steep = bound_curve(Estimate::RootRational, in, 1.0, 1.0, 1.0);
  const auto bad = verify_bound(m, steep);
  CHECK(bad.status == BoundStatus::Violated);
  CHECK(bad.first_violation.has_value());
}

TEST_CASE("boundary data and writers") {
  const auto dom = sector(pi / 3);
  ProblemInstance inst = laplace(dom);
  const auto g = boundary_function(inst);
  CHECK(g({std::cos(pi / 6), std::sin(pi / 6), 0}) == doctest::Approx(1.0));
  CHECK(g({std::cos(0.1), std::sin(0.1), 0}) == doctest::Approx(std::sin(0.3)).epsilon(1e-6));
  const auto back = BoundaryData::from_json(inst.boundary.to_json());
  CHECK(back.kind == BoundaryKind::FirstMode);
  CHECK_THROWS_AS(BoundaryData::from_json({{"kind", "wavy"}}), PreconditionError);

  SolveOptions o;
  o.cells_per_radius = 8;
  const auto f = solve(inst, o);
  std::ostringstream os;
  write_solution_csv(os, f);
  CHECK(os.str().rfind("x,y,u", 0) == 0);
}

TEST_CASE("solver preconditions") {
  const auto d3 = make_domain(DomainKind::Sector, {{"angle", 1.0}}, 1.0, 3);
  CHECK_THROWS_AS(solve({d3, 2.0, 2.0, Coefficient::zero(), {}, 0.0}), PreconditionError);
  auto inst = laplace(sector(1.0));
  inst.forcing = -1.0;
  CHECK_THROWS_AS(solve(inst), PreconditionError);
  inst.forcing = 0.0;
  inst.b = Coefficient::power_law(1.0, 0.0);
  inst.alpha = 3.0;
  CHECK_THROWS_AS(solve(inst), PreconditionError);
}
