#include <doctest.h>

#include <cmath>
#include <numbers>

#include "khess/analysis.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball(int dim) {
  DomainParams p;
  p.dim = dim;
  p.profile = make_ball_profile(1.0);
  p.r0 = 0.5;
  return build_domain(p);
}

// Radial solution of the approximating problem with the barrier data.
RadialProfileSolution radial_case(int n, int k, double eps, double r) {
  const DomainSpec d = ball(n);
  return radial_oracle(n, k, eps, r, 1.0, inner_datum(n, k, r, d), outer_datum(classify_regime(n, k)));
}

GridFunction quadratic(const GridPtr& g) {
  return sample(g, [](const Point& x) { return dot(x, x); });
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("level_curvature and m_defect on analytic jets") {
    const Point x{0.3, -0.4, 0.5};
    const double rho = norm(x);
    const Point grad = 2.0 * x;
    const SymMatrix hess = SymMatrix::identity(3) * 2.0;
    CHECK(level_curvature(grad, hess, 1) == 1.0);
    CHECK(level_curvature(grad, hess, 2) == doctest::Approx(2.0 / rho).epsilon(1e-12));
    CHECK(level_curvature(grad, hess, 3) == doctest::Approx(1.0 / (rho * rho)).epsilon(1e-12));
    CHECK(m_defect(grad, hess, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(m_defect(grad, hess, 2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    const SymMatrix flat(3);
    const Point slope{0.2, -1.0, 0.7};
    for (int m = 2; m <= 3; ++m) CHECK(level_curvature(slope, flat, m) == 0.0);

    // Radial profile with distinct normal and tangential eigenvalues.
    const RadialProfileSolution s = radial_case(3, 2, 0.01, 0.2);
    const LocalJet j = radial_jet(3, x, s.phi(rho), s.dphi(rho), s.d2phi(rho));
    CHECK(std::abs(m_defect(j.grad, j.hess, 1)) <= 1e-10);
    CHECK(std::abs(m_defect(j.grad, j.hess, 2)) <= 1e-10);
    CHECK(level_curvature(j.grad, j.hess, 2) == doctest::Approx(2.0 / rho).epsilon(1e-12));

    CHECK_THROWS_AS(level_curvature(Point{0, 0, 0}, hess, 2), AnalysisError);
  }

  TEST_CASE("extracted level of |x|^2 is the sphere of radius 1/2") {
    for (int n : {2, 3}) {
      const GridPtr g = build_grid(ball(n), 0.2, 0.05);
      const GridFunction u = quadratic(g);
      const LevelSurface s = extract_level(u, node_derivatives(u), 1, 0.25);
      const double exact = unit_sphere_area(n) * std::pow(0.5, n - 1);
      CHECK(s.area() == doctest::Approx(exact).epsilon(0.01));
      CHECK(s.closed());
      for (const LevelFacet& f : s.facets) {
        CHECK(f.grad_norm == doctest::Approx(2.0 * norm(f.centroid)).epsilon(1e-9));
        CHECK(f.H[1] == doctest::Approx((n - 1) / norm(f.centroid)).epsilon(1e-9));
      }
    }
    const GridPtr g = build_grid(ball(2), 0.2, 0.05);
    const GridFunction u = quadratic(g);
    CHECK_THROWS_AS(extract_level(u, node_derivatives(u), 1, 0.98), AnalysisError);
  }

  TEST_CASE("P function") {
    // u = A log rho + B gives P = A^2 e^{2B} rho^{2A-2}.
    const GridPtr g = build_grid(ball(2), 0.2, 0.025);
    const RadialProfileSolution s = radial_oracle(2, 1, 0.0, 0.2, 1.0, -3.0, 0.0);
    const double A = -3.0 / std::log(0.2);
    const PField p = compute_P(sample_radial(g, s), 1);
    for (std::int32_t node : g->interior()) {
      const double rho = norm(g->node(node).x);
      CHECK(p.P[node] == doctest::Approx(A * A * std::pow(rho, 2 * A - 2)).epsilon(0.01));
    }
    CHECK(p.interior_max <= p.boundary_max * (1 + 20 * g->h()));
    CHECK(check_p_maximum(sample_radial(g, s), 1).pass);

    // Wrong sign for the regime.
    const GridFunction neg = sample(g, [](const Point& x) { return -1.0 - dot(x, x); });
    CHECK_THROWS_AS(compute_P(neg, 2), AnalysisError);

    // A flat spot contributes P = 0.
    const GridFunction bowl = sample(g, [](const Point& x) { return 1.0 + x[0] * x[0]; });
    const PField pb = compute_P(bowl, 2);
    const std::int64_t on_axis = g->lattice_index({0, 12, 0});
    REQUIRE(on_axis >= 0);
    CHECK(pb.P[on_axis] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(pb.argmax != on_axis);
  }

  TEST_CASE("C0 sandwich and transversality on radial solutions") {
    struct Case {
      int n, k;
    };
    for (const Case c : {Case{2, 2}, Case{2, 1}, Case{3, 2}, Case{3, 1}}) {
      const GridPtr g = build_grid(ball(c.n), 0.2, 0.05);
      const GridFunction u = sample_radial(g, radial_case(c.n, c.k, 0.01, 0.2));
      const EstimateRecord c0 = check_c0(u, c.k);
      CHECK(c0.pass);
      CHECK(c0.margin > 0.0);
      const EstimateRecord tr = check_transversality(u, c.k);
      CHECK(tr.pass);
      CHECK(tr.constant > 0.0);
    }
  }

  TEST_CASE("decay constants") {
    // u = log rho: |Du| rho = 1 and |D^2u| rho^2 = 1.
    const GridPtr g = build_grid(ball(2), 0.2, 0.025);
    const GridFunction u = sample(g, [](const Point& x) { return std::log(norm(x)); });
    CHECK(decay_constant(u, 1, 1) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(decay_constant(u, 1, 2) == doctest::Approx(1.0).epsilon(0.05));

    const GridFunction a = sample_radial(g, radial_case(2, 1, 0.01, 0.2));
    const GridFunction b = sample_radial(g, radial_case(2, 1, 0.001, 0.2));
    const GridFunction pair[2] = {a, b};
    CHECK(check_decay(pair, 1, 1).pass);
    CHECK(check_decay(pair, 1, 2).pass);
  }

  TEST_CASE("level weights, constants and factors") {
    CHECK(level_weight(2, 1, -0.5) == doctest::Approx(std::exp(-0.5)));
    CHECK(level_weight(3, 2, 0.5) == doctest::Approx(0.5));
    CHECK(level_weight(3, 1, -2.0) == doctest::Approx(std::pow(2.0, -2.0)));
    CHECK(c_nk(3, 2) == 0.0);
    CHECK(c_nk(4, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(inequality_factor(4, 3) == 2.0);
    CHECK(inequality_factor(3, 2) == 1.0);
    CHECK(inequality_factor(2, 1) == 1.0);
    CHECK_THROWS_AS(inequality_factor(3, 1), ConfigError);
    CHECK(expected_area_exponent(3, 2) == 4.0);
    CHECK(expected_area_exponent(2, 1) == 1.0);

    // Exact power and exponential data recover the exponent.
    const std::vector<double> t{0.2, 0.3, 0.45, 0.7};
    std::vector<double> area;
    for (double v : t) area.push_back(3.0 * std::pow(v, 4.0));
    CHECK(fit_area_exponent(t, area, 3, 2) == doctest::Approx(4.0).epsilon(1e-12));
    const std::vector<double> tc{-2.0, -1.5, -1.0, -0.4};
    area.clear();
    for (double v : tc) area.push_back(5.0 * std::exp(v));
    CHECK(fit_area_exponent(tc, area, 2, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("I on radial levels matches the closed form") {
    const int n = 3, k = 2;
    const RadialProfileSolution s = radial_case(n, k, 0.01, 0.2);
    // Facet |Du| is interpolated, O(h^2) low; h = 0.025 keeps it well
    // inside the 1% budget after the |Du|^{b+1} power.
    const GridPtr g = build_grid(ball(n), 0.2, 0.025);
    const GridFunction u = sample_radial(g, s);
    const NodeDerivatives d = node_derivatives(u);
    const double b = c_nk(n, k) + 0.5, a = b - k + 1;
    for (double rho : {0.4, 0.55, 0.7}) {
      const double t = s.phi(rho);
      const LevelSurface surf = extract_level(u, d, k, t);
      const double dphi = s.dphi(rho);
      // S_k^{ij}u_iu_j = phi'^2 C(n-1,k-1) (phi'/rho)^{k-1} on the sphere.
      const double exact = unit_sphere_area(n) * std::pow(rho, n - 1) * std::pow(level_weight(n, k, t), a) *
                           std::pow(dphi, b - k) * dphi * dphi * binomial(n - 1, k - 1) * std::pow(dphi / rho, k - 1);
      CHECK(compute_I(surf, b) == doctest::Approx(exact).epsilon(0.01));

      // a = 0: no weight.
      double plain = 0.0;
      for (const LevelFacet& f : surf.facets) plain += f.area * std::pow(f.grad_norm, k) * f.H[k - 1];
      CHECK(compute_I(surf, k - 1.0) == doctest::Approx(plain).epsilon(1e-12));
    }
  }

  TEST_CASE("I converges under refinement") {
    const RadialProfileSolution s = radial_case(2, 1, 0.01, 0.2);
    const double t = s.phi(0.5);
    double I[2];
    int i = 0;
    for (double h : {0.04, 0.02}) {
      const GridFunction u = sample_radial(build_grid(ball(2), 0.2, h), s);
      I[i++] = compute_I(extract_level(u, node_derivatives(u), 1, t), 0.5);
    }
    CHECK(std::abs(I[0] - I[1]) <= 0.01 * std::abs(I[1]));
  }

  TEST_CASE("monotonicity scan branches and errors") {
    const int n = 3, k = 2;
    const RadialProfileSolution s = radial_case(n, k, 0.01, 0.2);
    const GridFunction u = sample_radial(build_grid(ball(n), 0.2, 0.025), s);
    const NodeDerivatives d = node_derivatives(u);
    const std::vector<double> levels = level_ladder(u, 5);

    const MonotonicityScan up = monotonicity_scan(u, d, k, 0.01, levels, 0.5);
    CHECK(up.a == doctest::Approx(-0.5));
    CHECK(up.branch == "upper");
    CHECK_FALSE(up.a_zero);
    CHECK(up.max_m_defect <= 1e-6);
    // Radial data: the scan reproduces the closed-form I.
    for (size_t i = 0; i < levels.size(); ++i) {
      const double rho = [&] {
        double lo = 0.2, hi = 1.0;
        for (int it = 0; it < 200; ++it) (s.phi(0.5 * (lo + hi)) < levels[i] ? lo : hi) = 0.5 * (lo + hi);
        return 0.5 * (lo + hi);
      }();
      const double dphi = s.dphi(rho);
      const double exact = unit_sphere_area(n) * rho * rho * std::pow(levels[i], -0.5) * std::pow(dphi, 1.5) * 2.0 / rho;
      CHECK(up.I[i] == doctest::Approx(exact).epsilon(0.01));
    }

    const MonotonicityScan zero = monotonicity_scan(u, d, k, 0.01, levels, 1.0);
    CHECK(zero.a_zero);
    CHECK(zero.branch == "lower");

    const std::vector<double> two{levels[0], levels[1]};
    CHECK_THROWS_AS(monotonicity_scan(u, d, k, 0.01, two, 0.5), ConfigError);
    CHECK_THROWS_AS(monotonicity_scan(u, d, k, 0.01, levels, -0.1), ConfigError);
  }

  TEST_CASE("level-area constant does not grow as the puncture shrinks") {
    // (|S_t| - |dB_r|) / t^{k(n-1)/(2k-n)} over a common set of levels.
    const int n = 3, k = 2;
    const DomainSpec dom = ball(n);
    double sup[2] = {0.0, 0.0};
    int i = 0;
    for (double r : {0.2, 0.1}) {
      const RadialProfileSolution s = radial_case(n, k, 0.01, r);
      const GridFunction u = sample_radial(build_grid(dom, r, 0.025), s);
      const NodeDerivatives d = node_derivatives(u);
      for (double t : {0.45, 0.6, 0.75, 0.9}) {
        const double excess = extract_level(u, d, k, t).area() - unit_sphere_area(n) * r * r;
        CHECK(excess > 0.0);
        sup[i] = std::max(sup[i], excess / std::pow(t, expected_area_exponent(n, k)));
      }
      ++i;
    }
    CHECK(sup[1] <= 1.5 * sup[0]);
  }

  TEST_CASE("boundary gradient, curvature and inequality on the ball") {
    const int n = 3, k = 2;
    const RadialProfileSolution s = radial_case(n, k, 0.01, 0.2);
    const GridFunction u = sample_radial(build_grid(ball(n), 0.2, 0.05), s);
    const NodeDerivatives d = node_derivatives(u);

    const BoundaryGradient bg = boundary_gradient(d, Point{0.6, 0.0, 0.8}, Point{0.6, 0.0, 0.8});
    CHECK(bg.normal_derivative == doctest::Approx(s.dphi(1.0)).epsilon(0.01));
    CHECK(std::abs(bg.normal_derivative - bg.alt_normal_derivative) <= 0.01 * s.dphi(1.0));

    const CurvatureComparison cc = compare_boundary_curvature(d);
    CHECK(cc.worst <= 0.05);

    const double b = 0.5;
    const InequalityRecord grid = boundary_inequality(d, k, b);
    const InequalityRecord exact = radial_inequality(s, b);
    // Sphere: lhs / rhs = |Du| R C(n-1,k-1) / C(n-1,k).
    CHECK(exact.lhs / exact.rhs == doctest::Approx(s.dphi(1.0) * 2.0).epsilon(1e-12));
    CHECK(exact.margin > 0.0);
    CHECK(grid.margin > 0.0);
    CHECK(grid.margin == doctest::Approx(exact.margin).epsilon(0.02));
    CHECK(grid.pass);
  }
}
