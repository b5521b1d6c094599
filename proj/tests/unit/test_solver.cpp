#include <doctest.h>

#include <cmath>

#include "khess/solver.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball(int dim, double r0 = 0.5) {
  DomainParams p;
  p.dim = dim;
  p.profile = make_ball_profile(1.0);
  p.r0 = r0;
  return build_domain(p);
}

double sup_error(const GridFunction& u, const RadialProfileSolution& sol) {
  double e = 0.0;
  for (std::int32_t node : u.grid->interior()) e = std::max(e, std::abs(u[node] - sol.phi(norm(u.grid->node(node).x))));
  return e;
}

bool all_admissible(const GridFunction& u, int k) {
  for (std::int32_t q = 0; q < static_cast<std::int32_t>(u.grid->interior().size()); ++q)
    if (!in_gamma_k(eigenvalues(fd_hessian(u, q)), k)) return false;
  return true;
}

std::pair<GridFunction, SolveReport> barrier_solve(const GridPtr& g, int k, double eps) {
  const BarrierSet bs = build_subsolution(k, g);
  SolverConfig cfg;
  cfg.epsilon = eps;
  cfg.eps_ceiling = bs.constants.eps1;
  return solve_with_homotopy(g, k, cfg, {bs.outer_value, bs.inner_value}, initial_iterate(bs, g, eps));
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("radial oracle closed forms at eps = 0") {
    // n=3, k=2: phi = A rho^{1/2} + B through (0.2, 0.1) and (1, 1).
    const RadialProfileSolution s = radial_oracle(3, 2, 0.0, 0.2, 1.0, 0.1, 1.0);
    const double A = 0.9 / (1.0 - std::sqrt(0.2)), B = 1.0 - A;
    for (double rho : {0.2, 0.37, 0.6, 1.0}) {
      CHECK(s.phi(rho) == doctest::Approx(A * std::sqrt(rho) + B).epsilon(1e-13));
      CHECK(s.d2phi(rho) == doctest::Approx(A * 0.5 * -0.5 * std::pow(rho, -1.5)).epsilon(1e-12));
      CHECK(std::abs(s.residual(rho)) <= 1e-12);
    }
    // n=2, k=1: phi = A log rho + B.
    const RadialProfileSolution l = radial_oracle(2, 1, 0.0, 0.2, 1.0, -2.0, 0.0);
    for (double rho : {0.25, 0.5, 0.9}) CHECK(l.phi(rho) == doctest::Approx(-2.0 / std::log(0.2) * std::log(rho)).epsilon(1e-13));
  }

  TEST_CASE("radial oracle with eps > 0") {
    const RadialProfileSolution s = radial_oracle(3, 2, 0.01, 0.2, 1.0, 0.1, 1.0);
    CHECK(s.phi(0.2) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s.phi(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i <= 200; ++i) {
      const double rho = 0.2 + 0.8 * i / 200;
      CHECK(std::abs(s.residual(rho)) <= 1e-10);
    }
    // phi(R) - phi(r) equals the integral of phi'.
    CHECK(oracle::simpson([&](double x) { return s.dphi(x); }, 0.2, 1.0) == doctest::Approx(0.9).epsilon(1e-9));

    CHECK_THROWS_AS(radial_oracle(3, 2, 0.01, 0.2, 1.0, 2.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(radial_oracle(3, 2, 0.01, 1.0, 0.2, 0.0, 1.0), std::domain_error);
  }

  TEST_CASE("critical profile stays within a bounded distance of log as r -> 0") {
    double worst = 0.0;
    for (double r : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
      const RadialProfileSolution s = radial_oracle(2, 1, 0.0, r, 1.0, w_profile(2, 1, r, 2.0, 0.25), 0.0);
      for (double rho = r; rho <= 1.0; rho *= 1.5) worst = std::max(worst, std::abs(s.phi(rho) - std::log(rho)));
    }
    CHECK(worst <= std::log(2.0) + 1e-3);
  }

  TEST_CASE("Laplacian on an annulus matches the radial profile") {
    const double h = 0.04, eps = 0.01;
    const GridPtr g = build_grid(ball(2), 0.2, h);
    const RadialProfileSolution exact = radial_oracle(2, 1, eps, 0.2, 1.0, std::log(0.2), 0.0);
    const GridFunction init = sample_radial(g, radial_oracle(2, 1, 0.1, 0.2, 1.0, std::log(0.2), 0.0));
    SolverConfig cfg;
    cfg.epsilon = eps;
    auto [u, rep] = solve_epsilon(g, 1, cfg, {0.0, std::log(0.2)}, init);
    CHECK(rep.converged);
    CHECK(rep.residual <= cfg.newton_tol);
    CHECK(sup_error(u, exact) <= 5 * h * h);
  }

  TEST_CASE("Monge-Ampere solution is convex with a converged residual") {
    const GridPtr g = build_grid(ball(2), 0.2, 0.04);
    auto [u, rep] = barrier_solve(g, 2, 0.01);
    CHECK(rep.converged);
    CHECK(rep.residual <= 1e-8);
    CHECK(rep.admissibility > 0.0);
    CHECK(all_admissible(u, 2));

    // Sandwich between the barriers (discrete comparison).
    const BarrierSet bs = build_subsolution(2, g);
    const GridFunction sup = build_supersolution(2, g);
    const double tol = 10 * 0.04 * 0.04;
    for (std::int32_t node : g->interior()) {
      CHECK(bs.subsolution[node] <= u[node] + tol);
      CHECK(u[node] <= sup[node] + tol);
    }
  }

  TEST_CASE("eps at or above eps1 is rejected") {
    const GridPtr g = build_grid(ball(2), 0.2, 0.04);
    const BarrierSet bs = build_subsolution(2, g);
    SolverConfig cfg;
    cfg.epsilon = bs.constants.eps1;
    cfg.eps_ceiling = bs.constants.eps1;
    CHECK_THROWS_AS(solve_with_homotopy(g, 2, cfg, {bs.outer_value, bs.inner_value}, initial_iterate(bs, g, 0.01)),
                    ConfigError);
  }

  TEST_CASE("inadmissible start is reported, not iterated") {
    const GridPtr g = build_grid(ball(2), 0.2, 0.04);
    const GridFunction concave = sample(g, [](const Point& x) { return -dot(x, x); });
    SolverConfig cfg;
    CHECK_THROWS_AS(solve_epsilon(g, 2, cfg, {-1.0, -0.04}, concave), SolveError);
  }

  TEST_CASE("solves are bitwise reproducible") {
    const GridPtr g = build_grid(ball(2), 0.2, 0.04);
    const auto a = barrier_solve(g, 2, 0.01).first;
    const auto b = barrier_solve(g, 2, 0.01).first;
    CHECK(oracle::same_bits(a.values, b.values));
  }

  TEST_CASE("continuation") {
    ContinuationPlan plan;
    plan.k = 2;
    plan.h = 0.02;
    plan.eps_schedule = {1e-2, 1e-3, 1e-4};
    plan.r_schedule = {0.2};
    const DomainSpec d = ball(2);
    const auto eps_steps = continuation(d, plan);
    REQUIRE(eps_steps.size() == 3);
    CHECK(std::isnan(eps_steps[0].delta_sup));
    CHECK(eps_steps[2].delta_sup < eps_steps[1].delta_sup);

    // Shrinking the puncture raises the solution (case 1).
    plan.eps_schedule = {1e-2};
    plan.r_schedule = {0.2, 0.1};
    const auto r_steps = continuation(d, plan);
    REQUIRE(r_steps.size() == 2);
    CHECK(r_steps[1].monotonicity_violation <= 10 * plan.h * plan.h);

    // One-element schedule is one barrier-started solve.
    plan.r_schedule = {0.2};
    const auto single = continuation(d, plan);
    REQUIRE(single.size() == 1);
    const auto direct = barrier_solve(build_grid(d, 0.2, plan.h), 2, 1e-2).first;
    CHECK(oracle::same_bits(single[0].solution.values, direct.values));

    plan.eps_schedule = {1e-3, 1e-2};
    CHECK_THROWS_AS(continuation(d, plan), ConfigError);
  }
}
