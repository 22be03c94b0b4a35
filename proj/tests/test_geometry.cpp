#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "wk/error.hpp"
#include "wk/fit.hpp"
#include "wk/geometry.hpp"
#include "wk/profile.hpp"

using namespace wk;
constexpr double pi = std::numbers::pi;

TEST_CASE("domain indicators") {
  const auto cone = make_domain(DomainKind::ConeComplement, {{"k1", 1.0}}, 1.0, 2);
  CHECK(cone.contains({0.5, 0.1, 0}));
  CHECK_FALSE(cone.contains({0.1, 0.5, 0}));
  CHECK(cone.contains({0.1, -0.5, 0}));

  const auto cusp = make_domain(DomainKind::PowerCusp, {{"k1", 1.0}, {"s", 2.0}}, 1.0, 2);
  CHECK(cusp.contains({0.5, 0.2, 0}));
  CHECK_FALSE(cusp.contains({0.5, 0.3, 0}));
  CHECK(cusp.contains({-0.5, -0.2, 0}));

  const auto sec = make_domain(DomainKind::Sector, {{"angle", pi / 2}}, 1.0, 2);
  CHECK(sec.contains({0.3, 0.3, 0}));
  CHECK_FALSE(sec.contains({-0.3, 0.3, 0}));
  CHECK_FALSE(sec.contains({0.3, -0.3, 0}));
}

TEST_CASE("domain parameters are validated") {
  CHECK_THROWS_AS(make_domain(DomainKind::PowerCusp, {{"k1", 1.0}, {"s", 1.0}}, 1.0, 2), PreconditionError);
  CHECK_THROWS_AS(make_domain(DomainKind::ConeComplement, {{"k1", -1.0}}, 1.0, 2), PreconditionError);
  CHECK_THROWS_AS(make_domain(DomainKind::ConeComplement, {}, 1.0, 2), PreconditionError);
  CHECK_THROWS_AS(make_domain(DomainKind::Sector, {{"angle", 7.0}}, 1.0, 2), PreconditionError);
  CHECK_THROWS_AS(make_domain(DomainKind::Annulus, {}, -1.0, 2), PreconditionError);
  CHECK_THROWS_AS(make_domain(DomainKind::Annulus, {}, 1.0, 4), PreconditionError);
  CHECK_THROWS_AS(domain_kind_from_string("torus"), PreconditionError);
}

TEST_CASE("domain json round trip") {
  const auto cusp = make_domain(DomainKind::PowerCusp, {{"k1", 0.5}, {"s", 3.0}}, 2.0, 3);
  const auto back = domain_from_json(cusp.to_json());
  CHECK(back.kind() == DomainKind::PowerCusp);
  CHECK(back.R() == 2.0);
  CHECK(back.dim() == 3);
  CHECK(back.param("s") == 3.0);
  CHECK(back.to_json() == cusp.to_json());
}

TEST_CASE("grid indexing") {
  const Grid g = centered_grid(3, {0.5, -0.25, 1.0}, 1.0, 0.25);
  for (std::size_t i = 0; i < g.size(); i += 7) {
    CHECK(g.index(g.coords(i)) == i);
    CHECK(g.nearest(g.node(i)) == i);
  }
  CHECK(g.nearest({10, 10, 10}) == g.size());
  const std::size_t c = g.nearest({0.5, -0.25, 1.0});
  CHECK(distance(g.node(c), {0.5, -0.25, 1.0}, 3) < 1e-12);
}

TEST_CASE("shell mesh nodes sit on the lattice through the origin") {
  const auto ann = make_domain(DomainKind::Annulus, {}, 1.0, 2);
  const Grid g = shell_mesh(ann, 0.25, 1.0, 0.1);
  const std::size_t o = g.nearest({0, 0, 0});
  REQUIRE(o < g.size());
  CHECK(norm(g.node(o), 2) < 1e-12);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = norm(g.node(i), 2);
    CHECK(static_cast<bool>(g.inside()[i]) == (r > 0.25 && r < 1.0));
  }
}

TEST_CASE("empty shell gives an all-outside grid") {
  // the wedge is thinner than one lattice step and open along the axis
  const auto thin = make_domain(DomainKind::Sector, {{"angle", 0.01}}, 1.0, 2);
  const Grid g = shell_mesh(thin, 0.01, 0.02, 0.005);
  CHECK(g.empty());
}

TEST_CASE("sphere measures") {
  const auto ann2 = make_domain(DomainKind::Annulus, {}, 1.0, 2);
  const auto m2 = sphere_section_mesh(ann2, 0.5, 0.01);
  CHECK(m2.full_measure() == doctest::Approx(pi).epsilon(1e-6));

  const auto ann3 = make_domain(DomainKind::Annulus, {}, 1.0, 3);
  const auto m3 = sphere_section_mesh(ann3, 0.5, 0.05);
  CHECK(m3.full_measure() == doctest::Approx(pi).epsilon(5e-3));
  CHECK(unit_sphere_measure(2) == doctest::Approx(2 * pi));
  CHECK(unit_sphere_measure(3) == doctest::Approx(4 * pi));
}

TEST_CASE("section measure of an arc and of a polar cap") {
  const auto sec = make_domain(DomainKind::Sector, {{"angle", pi / 3}}, 1.0, 2);
  const auto arc = sphere_section_mesh(sec, 0.8, 0.01);
  CHECK(arc.section_measure() == doctest::Approx(0.8 * pi / 3).epsilon(1e-9));

  // cap of polar angle < pi/3: area 2 pi r^2 (1 - cos(pi/3))
  const double r = 0.7;
  const auto cap = make_custom_domain([](const Point& x) { return x[2] > 0.5 * norm(x, 3); }, 1.0, 3);
  const auto m = sphere_section_mesh(cap, r, 0.02);
  CHECK(m.section_measure() == doctest::Approx(2 * pi * r * r * 0.5).epsilon(0.03));
}

TEST_CASE("sections of the cusp shrink like r^s") {
  const auto cusp = make_domain(DomainKind::PowerCusp, {{"k1", 1.0}, {"s", 2.0}}, 1.0, 2);
  const auto a = sphere_section_mesh(cusp, 0.2, 2e-3);
  const auto b = sphere_section_mesh(cusp, 0.1, 2e-3);
  // two arcs of half-angle ~ r^{s-1}
  CHECK(a.section_measure() / b.section_measure() == doctest::Approx(std::pow(2.0, 2.0)).epsilon(0.05));
}

TEST_CASE("shell region sampling") {
  const auto cone = make_domain(DomainKind::ConeComplement, {{"k1", 1.0}}, 1.0, 2);
  const Region reg = shell_region(cone, 0.1, 0.2);
  CHECK(reg.samples.size() >= 24);
  for (const auto& x : reg.samples) {
    CHECK(cone.contains(x));
    const double r = norm(x, 2);
    CHECK(r > 0.1);
    CHECK(r < 0.2);
  }
}

TEST_CASE("log ladder") {
  const auto l = log_ladder(0.01, 1.0, 12);
  REQUIRE(l.size() == 12);
  CHECK(l.front() == doctest::Approx(0.01));
  CHECK(l.back() < 1.0);
  for (std::size_t i = 1; i < l.size(); ++i) CHECK(l[i] / l[i - 1] == doctest::Approx(l[1] / l[0]));
}

TEST_CASE("profile interpolation is linear in log-log") {
  const auto l = log_ladder(0.01, 1.0, 5);
  Profile p(l, "x");
  for (std::size_t i = 0; i < l.size(); ++i) p.set(i, std::pow(l[i], -2.0));
  const double r = std::sqrt(l[1] * l[2]);
  CHECK(p.at(r) == doctest::Approx(std::pow(r, -2.0)));
  p.mark_missing(2);
  CHECK(p.available() == 4);
  const double s = std::sqrt(l[1] * l[3]);
  CHECK(p.at(s) == doctest::Approx(std::pow(s, -2.0)));
  CHECK(p.at(1e-5) == doctest::Approx(p.value(0)));
}

TEST_CASE("log-log fit recovers an exponent") {
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(0.1 * i);
    y.push_back(3.0 * std::pow(0.1 * i, 1.7));
  }
  const auto f = fit_loglog(x, y);
  CHECK(f.slope == doctest::Approx(1.7));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}
