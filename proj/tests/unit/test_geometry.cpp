#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "khess/grid.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball(int dim, double radius, double r0) {
  DomainParams p;
  p.dim = dim;
  p.profile = make_ball_profile(radius);
  p.r0 = r0;
  return build_domain(p);
}

DomainSpec ellipse() {
  DomainParams p;
  p.dim = 2;
  p.profile = make_ellipsoid_profile({1.0, 0.6});
  p.r0 = 0.5;
  return build_domain(p);
}

Point angle(double t) { return {std::cos(t), std::sin(t), 0.0}; }

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("build_domain accepts and rejects") {
    const DomainSpec b = ball(2, 1.0, 0.9);
    CHECK(b.rho_min() == doctest::Approx(1.0));
    CHECK(b.rho_max() <= (1.0 - b.tau0()) * b.R0());

    // Support function of the ellipse: min x.nu is the minor semi-axis.
    const DomainSpec e = ellipse();
    CHECK(e.starshaped_margin() == doctest::Approx(0.6).epsilon(1e-6));
    double brute = 1e300;
    for (int i = 0; i < 100000; ++i) {
      const double t = 2 * std::numbers::pi * i / 100000;
      const double x = std::cos(t), y = 0.6 * std::sin(t);
      const double gx = x, gy = y / 0.36;
      brute = std::min(brute, (x * gx + y * gy) / std::hypot(gx, gy));
    }
    CHECK(brute > 0.0);
    CHECK(e.starshaped_margin() == doctest::Approx(brute).epsilon(1e-6));

    DomainParams star;
    star.dim = 2;
    star.profile = make_star_profile(1.0, 0.8, 3);
    star.r0 = 0.5;
    CHECK_THROWS_AS(build_domain(star), ConfigError);

    DomainParams fat;
    fat.dim = 2;
    fat.profile = make_ball_profile(1.6);
    CHECK_THROWS_AS(build_domain(fat), ConfigError);  // 1.6 > (1 - 0.25) * 2

    DomainParams bad_tau;
    bad_tau.dim = 2;
    bad_tau.profile = make_ball_profile(1.0);
    bad_tau.tau0 = 0.5;
    CHECK_THROWS_AS(build_domain(bad_tau), ConfigError);
  }

  TEST_CASE("signed_distance") {
    const DomainSpec b = ball(2, 1.0, 0.5);
    CHECK(signed_distance(b, {0, 0, 0}) == doctest::Approx(1.0));
    CHECK(signed_distance(b, {0.6, 0.45, 0}) == doctest::Approx(0.25));
    CHECK(signed_distance(b, {1.2, 0, 0}) == doctest::Approx(-0.2));

    // Dense nearest-point search over the parametrized boundary.
    const DomainSpec e = ellipse();
    double best = 1e300;
    const int samples = 2000000;
    for (int i = 0; i < samples; ++i) {
      const double t = 2 * std::numbers::pi * i / samples;
      best = std::min(best, std::hypot(std::cos(t) - 0.5, 0.6 * std::sin(t)));
    }
    CHECK(signed_distance(e, {0.5, 0, 0}) == doctest::Approx(best).epsilon(1e-6));
  }

  TEST_CASE("distance has unit gradient in the collar") {
    const DomainSpec e = ellipse();
    const double step = 1e-4;
    for (int i = 0; i < 64; ++i) {
      const Point dir = angle(2 * std::numbers::pi * (i + 0.5) / 64);
      const BoundaryPoint bp = e.boundary_geometry(dir);
      for (double depth : {0.25, 1.0, 1.75}) {
        const Point x = bp.x - (depth * e.mu0()) * bp.normal;
        const double gx = (signed_distance(e, {x[0] + step, x[1], 0}) - signed_distance(e, {x[0] - step, x[1], 0})) / (2 * step);
        const double gy = (signed_distance(e, {x[0], x[1] + step, 0}) - signed_distance(e, {x[0], x[1] - step, 0})) / (2 * step);
        CHECK(std::abs(std::hypot(gx, gy) - 1.0) <= 1e-6);
      }
    }
  }

  TEST_CASE("boundary curvature") {
    for (double R : {0.7, 1.3}) {
      const DomainSpec s3 = ball(3, R, 0.5);
      const DomainSpec s2 = ball(2, R, 0.5);
      for (const Point& d : s3.sample_directions(12)) {
        CHECK(boundary_curvature(s3, d, 0) == 1.0);
        CHECK(boundary_curvature(s3, d, 1) == doctest::Approx(2.0 / R).epsilon(1e-10));
        CHECK(boundary_curvature(s3, d, 2) == doctest::Approx(1.0 / (R * R)).epsilon(1e-10));
      }
      CHECK(boundary_curvature(s2, angle(0.3), 1) == doctest::Approx(1.0 / R).epsilon(1e-10));
    }
    // a / b^2 at the end of the major axis.
    CHECK(boundary_curvature(ellipse(), angle(0.0), 1) == doctest::Approx(1.0 / 0.36).epsilon(1e-9));
    // ab / (a^2 sin^2 + b^2 cos^2)^{3/2} at a general parameter value.
    const double t = 0.7;
    const Point dir = angle(std::atan2(0.6 * std::sin(t), std::cos(t)));
    const double kappa = 0.6 / std::pow(std::sin(t) * std::sin(t) + 0.36 * std::cos(t) * std::cos(t), 1.5);
    CHECK(boundary_curvature(ellipse(), dir, 1) == doctest::Approx(kappa).epsilon(1e-9));
    CHECK_THROWS_AS(boundary_curvature(ellipse(), dir, 2), std::domain_error);
  }

  TEST_CASE("sphere quadrature integrates the area") {
    for (int dim : {2, 3}) {
      const SphereQuadrature q = sphere_quadrature(dim, 24);
      double s = 0.0, z2 = 0.0;
      for (size_t i = 0; i < q.weights.size(); ++i) {
        s += q.weights[i];
        z2 += q.weights[i] * q.directions[i][0] * q.directions[i][0];
      }
      CHECK(s == doctest::Approx(unit_sphere_area(dim)).epsilon(1e-12));
      CHECK(z2 == doctest::Approx(unit_sphere_area(dim) / dim).epsilon(1e-12));
    }
  }

  TEST_CASE("annular grid") {
    const DomainSpec b = ball(2, 1.0, 0.5);
    const GridPtr g = build_grid(b, 0.2, 0.05);
    CHECK(g->count(NodeClass::InnerBoundary) >= 24);
    const std::int64_t origin = g->lattice_index({0, 0, 0});
    REQUIRE(origin >= 0);
    CHECK(g->node(origin).cls == NodeClass::Exterior);

    CHECK_THROWS_AS(build_grid(b, 0.25, 0.05), ConfigError);  // r >= r0/2
    CHECK_THROWS_AS(build_grid(b, 0.2, 0.06), ConfigError);   // h > r/4

    // Partition: class counts add up, interior list matches the classes.
    std::int64_t total = 0;
    for (NodeClass c : {NodeClass::Interior, NodeClass::OuterBoundary, NodeClass::InnerBoundary, NodeClass::Exterior})
      total += g->count(c);
    CHECK(total == g->size());
    CHECK(static_cast<std::int64_t>(g->interior().size()) == g->count(NodeClass::Interior));
    for (std::int64_t i = 0; i < g->size(); ++i) {
      const Node& nd = g->node(i);
      const double rad = norm(nd.x);
      if (nd.cls == NodeClass::Interior) CHECK((rad > 0.2 && rad < 1.0));
      if (nd.cls == NodeClass::InnerBoundary) CHECK(rad == doctest::Approx(0.2).epsilon(1e-12));
      if (nd.cls == NodeClass::OuterBoundary) CHECK(rad == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Every interior node has all arms linked.
    for (std::int32_t u = 0; u < static_cast<std::int32_t>(g->interior().size()); ++u)
      for (int a = 0; a < g->arm_count(); ++a) CHECK(g->link(u, a).node >= 0);

    const GridPtr again = build_grid(b, 0.2, 0.05);
    REQUIRE(again->size() == g->size());
    bool same = true;
    for (std::int64_t i = 0; i < g->size(); ++i)
      same = same && g->node(i).cls == again->node(i).cls && g->node(i).x == again->node(i).x;
    CHECK(same);
  }

  TEST_CASE("3D grid resolves the puncture") {
    const GridPtr g = build_grid(ball(3, 1.0, 0.5), 0.2, 0.05);
    CHECK(g->count(NodeClass::InnerBoundary) >= 24);
    CHECK(g->count(NodeClass::Interior) > 0);
  }
}
