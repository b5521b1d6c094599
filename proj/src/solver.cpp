#include "khess/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <sstream>

#include "khess/parallel.hpp"

namespace khess {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct NodeEval {
  double sk = 0.0;
  double margin = 0.0;  // min_j S_j, j <= k
  SymMatrix hess;
};

NodeEval eval_node(const GridFunction& u, std::int32_t q, int k) {
  NodeEval e;
  e.hess = fd_hessian(u, q);
  const auto c = char_poly_coeffs(e.hess);
  e.sk = c[k];
  e.margin = c[1];
  for (int j = 2; j <= k; ++j) e.margin = std::min(e.margin, c[j]);
  return e;
}

struct Sweep {
  bool admissible = true;
  double merit = 0.0;     // sup |S_k^{1/k} - eps^{1/k}|
  double residual = 0.0;  // sup |S_k - eps|
  double margin = std::numeric_limits<double>::infinity();
  std::int32_t worst = -1;
};

Sweep sweep(const GridFunction& u, int k, double eps, double floor, std::vector<NodeEval>* evals) {
  const auto& interior = u.grid->interior();
  const std::int64_t m = static_cast<std::int64_t>(interior.size());
  std::vector<NodeEval> local;
  std::vector<NodeEval>& ev = evals ? *evals : local;
  ev.resize(m);
  parallel_for(m, [&](std::int64_t q) { ev[q] = eval_node(u, static_cast<std::int32_t>(q), k); });
  Sweep s;
  const double target = std::pow(eps, 1.0 / k);
  for (std::int64_t q = 0; q < m; ++q) {
    s.margin = std::min(s.margin, ev[q].margin);
    if (k > 1 && !(ev[q].margin > floor)) {
      s.admissible = false;
      s.worst = static_cast<std::int32_t>(q);
      continue;
    }
    const double res = std::abs(ev[q].sk - eps);
    if (res > s.residual) {
      s.residual = res;
      s.worst = static_cast<std::int32_t>(q);
    }
    const double f = (k == 1) ? ev[q].sk : std::pow(std::max(ev[q].sk, 0.0), 1.0 / k);
    s.merit = std::max(s.merit, std::abs(f - target));
  }
  return s;
}

// BiCGSTAB with Jacobi preconditioning; ILUT and then sparse LU are kept as
// fallbacks for systems where the cheap iteration stalls.
Eigen::VectorXd solve_linear(const SpMat& J, const Eigen::VectorXd& rhs, double tol) {
  {
    Eigen::BiCGSTAB<SpMat, Eigen::DiagonalPreconditioner<double>> it;
    it.setTolerance(tol);
    it.setMaxIterations(std::max<Eigen::Index>(1000, 4 * J.rows()));
    it.compute(J);
    Eigen::VectorXd x = it.solve(rhs);
    if (it.info() == Eigen::Success) return x;
  }
  {
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
    it.preconditioner().setDroptol(1e-4);
    it.preconditioner().setFillfactor(10);
    it.setTolerance(tol);
    it.setMaxIterations(2000);
    it.compute(J);
    Eigen::VectorXd x = it.solve(rhs);
    if (it.info() == Eigen::Success) return x;
  }
  Eigen::SparseMatrix<double> Jc(J);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(Jc);
  lu.factorize(Jc);
  if (lu.info() != Eigen::Success) throw SolveError("linear solve: LU factorization failed");
  return lu.solve(rhs);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

GridFunction sk_field(const GridFunction& u, int k) {
  GridFunction out(u.grid);
  const auto& interior = u.grid->interior();
  parallel_for(static_cast<std::int64_t>(interior.size()), [&](std::int64_t q) {
    out[interior[q]] = sk(fd_hessian(u, static_cast<std::int32_t>(q)), k);
  });
  return out;
}

bool grid_admissible(const GridFunction& u, int k, double floor, double* margin) {
  const Sweep s = sweep(u, std::max(k, 2), 1.0, floor, nullptr);
  if (margin) *margin = s.margin;
  if (k == 1) return s.margin > floor;
  return s.admissible;
}

std::pair<GridFunction, SolveReport> solve_epsilon(const GridPtr& grid, int k, const SolverConfig& cfg,
                                                   const BoundaryData& bc, const GridFunction& init) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!(cfg.epsilon > 0.0)) throw ConfigError("solver: epsilon must be positive");
  if (cfg.eps_ceiling > 0.0 && !(cfg.epsilon < cfg.eps_ceiling))
    throw ConfigError("solver: epsilon=" + fmt(cfg.epsilon) + " must be below eps1=" + fmt(cfg.eps_ceiling));
  if (k < 1 || k > grid->dim()) throw ConfigError("solver: k out of range");
  if (init.grid != grid) throw ConfigError("solver: initial iterate lives on a different grid");

  GridFunction u = init;
  for (std::int64_t i = 0; i < grid->size(); ++i) {
    const NodeClass c = grid->node(i).cls;
    if (c == NodeClass::OuterBoundary) u[i] = bc.outer;
    if (c == NodeClass::InnerBoundary) u[i] = bc.inner;
  }

  const auto& interior = grid->interior();
  const std::int64_t m = static_cast<std::int64_t>(interior.size());
  const int pairs = grid->pair_count();
  const double eps = cfg.epsilon;
  const double target = std::pow(eps, 1.0 / k);

  SolveReport rep;
  std::vector<NodeEval> ev;
  Sweep cur = sweep(u, k, eps, cfg.gamma_floor, &ev);
  if (!cur.admissible) {
    throw SolveError("solver: initial iterate not Gamma_k-admissible (node " +
                     std::to_string(interior[cur.worst]) + ", margin " + fmt(cur.margin) + ")");
  }
  rep.history.push_back(cur.residual);

  int it = 0;
  while (cur.residual > cfg.newton_tol) {
    if (it >= cfg.max_iters) {
      rep.message = "residual plateau above tolerance";
      throw SolveError("solver: no convergence after " + std::to_string(it) + " iterations (residual " +
                       fmt(cur.residual) + ")");
    }
    // Assemble J d = -(F(u) - eps^{1/k}) with F = S_k^{1/k}.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(m) * (2 * pairs + 2));
    Eigen::VectorXd rhs(m);
    for (std::int64_t q = 0; q < m; ++q) {
      const NodeEval& e = ev[q];
      double f, df;
      if (k == 1) {
        f = e.sk;
        df = 1.0;
      } else {
        f = std::pow(e.sk, 1.0 / k);
        df = f / (k * e.sk);
      }
      rhs[q] = -(f - target);
      const SymMatrix T = sk_jacobian(e.hess, k);
      double diag = 0.0;
      for (int p = 0; p < pairs; ++p) {
        const auto& role = grid->pair_role(p);
        const double tw = (role.a == role.b) ? T(role.a, role.a) : role.sign * T(role.a, role.b);
        const double w = df * tw;
        const PairWeights pw = pair_weights(*grid, static_cast<std::int32_t>(q), p);
        diag += w * pw.c0;
        const std::int32_t np = grid->unknown_of(grid->link(static_cast<std::int32_t>(q), 2 * p).node);
        const std::int32_t nm = grid->unknown_of(grid->link(static_cast<std::int32_t>(q), 2 * p + 1).node);
        if (np >= 0) trip.emplace_back(static_cast<int>(q), np, w * pw.cp);
        if (nm >= 0) trip.emplace_back(static_cast<int>(q), nm, w * pw.cm);
        if (pw.extra >= 0) {
          const std::int32_t nx = grid->unknown_of(pw.extra);
          if (nx >= 0) trip.emplace_back(static_cast<int>(q), nx, w * pw.cx);
        }
      }
      trip.emplace_back(static_cast<int>(q), static_cast<int>(q), diag);
    }
    SpMat J(m, m);
    J.setFromTriplets(trip.begin(), trip.end());
    const Eigen::VectorXd d = solve_linear(J, rhs, cfg.linear_tol);

    double alpha = 1.0;
    bool accepted = false;
    GridFunction trial = u;
    std::vector<NodeEval> trial_ev;
    Sweep next;
    while (alpha >= cfg.min_step) {
      for (std::int64_t q = 0; q < m; ++q) trial[interior[q]] = u[interior[q]] + alpha * d[q];
      next = sweep(trial, k, eps, cfg.gamma_floor, &trial_ev);
      if (next.admissible && next.merit <= (1.0 - cfg.armijo * alpha) * cur.merit) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      rep.message = "line search stalled";
      throw SolveError("solver: line search stalled at iteration " + std::to_string(it) + " (residual " +
                       fmt(cur.residual) + ", worst node " +
                       (next.worst >= 0 ? std::to_string(interior[next.worst]) : std::string("-")) +
                       ", admissible " + (next.admissible ? "yes" : "no") + ")");
    }
    u = std::move(trial);
    ev = std::move(trial_ev);
    cur = next;
    ++it;
    rep.history.push_back(cur.residual);
    rep.steps.push_back(alpha);
  }

  rep.converged = true;
  rep.iterations = it;
  rep.residual = cur.residual;
  rep.admissibility = cur.margin;
  // Residual split by which boundary component a node touches.
  std::vector<char> touches(m, 0);
  for (std::int64_t i = grid->lattice_size(); i < grid->size(); ++i) {
    const Node& nd = grid->node(i);
    touches[grid->unknown_of(nd.owner)] |= (nd.cls == NodeClass::OuterBoundary) ? 1 : 2;
  }
  for (std::int64_t q = 0; q < m; ++q) {
    const double res = std::abs(ev[q].sk - eps);
    if (touches[q] & 1) rep.residual_outer = std::max(rep.residual_outer, res);
    if (touches[q] & 2) rep.residual_inner = std::max(rep.residual_inner, res);
  }
  rep.message = "converged";
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(u), rep};
}

GridFunction transfer(const GridFunction& from, const GridFunction& fallback) {
  GridFunction out = fallback;
  const AnnularGrid& a = *from.grid;
  const AnnularGrid& b = *fallback.grid;
  if (std::abs(a.h() - b.h()) > 1e-15 * b.h()) return out;
  for (std::int64_t i = 0; i < b.lattice_size(); ++i) {
    if (b.node(i).cls != NodeClass::Interior) continue;
    const std::int64_t j = a.lattice_index(b.lattice_coords(i));
    if (j >= 0 && a.node(j).cls == NodeClass::Interior) out[i] = from[j];
  }
  return out;
}

StartingPoint initial_iterate(const BarrierSet& bs, const GridPtr& grid, double epsilon) {
  if (bs.k == 1 || grid_admissible(bs.subsolution, bs.k, kGammaFloor)) return {bs.subsolution, epsilon, "subsolution"};
  // Radial profile in the scaled variable s = r + (|x| - r)(R - r)/(rho(x) - r),
  // which maps both boundary components onto spheres. R = rho_min keeps the
  // radial stretch <= 1; a stretch above 1 makes S_k negative next to B_r.
  const DomainSpec& dom = grid->domain();
  const double r = grid->r();
  const double R = dom.rho_min();
  for (double boost = 1.0; boost <= 65536.0; boost *= 4.0) {
    RadialProfileSolution rad;
    try {
      rad = radial_oracle(bs.n, bs.k, boost * epsilon, r, R, bs.inner_value, bs.outer_value);
    } catch (const std::domain_error&) {
      break;
    }
    GridFunction u(grid);
    for (std::int64_t i = 0; i < grid->size(); ++i) {
      const Node& nd = grid->node(i);
      if (nd.cls == NodeClass::Exterior) continue;
      if (nd.cls == NodeClass::OuterBoundary) {
        u[i] = bs.outer_value;
      } else if (nd.cls == NodeClass::InnerBoundary) {
        u[i] = bs.inner_value;
      } else {
        const double rho = norm(nd.x);
        const double s = r + (rho - r) * (R - r) / (dom.profile().radius(nd.x) - r);
        u[i] = rad.phi(std::min(s, R));
      }
    }
    if (grid_admissible(u, bs.k, kGammaFloor)) return {std::move(u), boost * epsilon, "radial-profile"};
  }
  throw SolveError("solver: no admissible initial iterate found");
}

std::pair<GridFunction, SolveReport> solve_with_homotopy(const GridPtr& grid, int k, const SolverConfig& config,
                                                         const BoundaryData& bc, const StartingPoint& start) {
  const double target = config.epsilon;
  if (config.eps_ceiling > 0.0 && !(target < config.eps_ceiling))
    throw ConfigError("solver: epsilon=" + fmt(target) + " must be below eps1=" + fmt(config.eps_ceiling));
  // Intermediate stages may exceed eps1; only the target is bound by it.
  SolverConfig cfg = config;
  cfg.eps_ceiling = 0.0;
  // Anchor: the lowest eps on the ladder target * 4^j (capped at the start's
  // eps) that Newton reaches directly from the start. The boosted eps is
  // often needed only to make the start admissible, not by the solve.
  const double top = std::max(start.epsilon, target);
  double eps = target;
  GridFunction u;
  SolveReport total;
  for (;;) {
    cfg.epsilon = eps;
    try {
      std::tie(u, total) = solve_epsilon(grid, k, cfg, bc, start.u);
      break;
    } catch (const SolveError&) {
      if (eps >= top) throw;
      eps = std::min(4.0 * eps, top);
    }
  }
  total.homotopy.push_back(eps);
  double factor = 4.0;
  while (eps > target) {
    const double next = std::max(target, eps / factor);
    cfg.epsilon = next;
    try {
      auto [v, r2] = solve_epsilon(grid, k, cfg, bc, u);
      u = std::move(v);
      eps = next;
      total.homotopy.push_back(eps);
      total.iterations += r2.iterations;
      total.history.insert(total.history.end(), r2.history.begin(), r2.history.end());
      total.steps.insert(total.steps.end(), r2.steps.begin(), r2.steps.end());
      total.residual = r2.residual;
      total.residual_inner = r2.residual_inner;
      total.residual_outer = r2.residual_outer;
      total.admissibility = r2.admissibility;
      total.wall_seconds += r2.wall_seconds;
    } catch (const SolveError&) {
      factor = std::sqrt(factor);
      if (factor < 1.05) throw;
    }
  }
  return {std::move(u), total};
}

std::vector<ContinuationStep> continuation(const DomainSpec& domain, const ContinuationPlan& plan,
                                           const std::function<void(const ContinuationStep&)>& on_step) {
  for (size_t i = 1; i < plan.eps_schedule.size(); ++i)
    if (!(plan.eps_schedule[i] < plan.eps_schedule[i - 1])) throw ConfigError("continuation: eps schedule must decrease");
  for (size_t i = 1; i < plan.r_schedule.size(); ++i)
    if (!(plan.r_schedule[i] < plan.r_schedule[i - 1])) throw ConfigError("continuation: r schedule must decrease");

  std::vector<ContinuationStep> steps;
  std::map<size_t, GridFunction> previous_r;  // eps index -> solution at the previous r
  for (size_t ri = 0; ri < plan.r_schedule.size(); ++ri) {
    const double r = plan.r_schedule[ri];
    const GridPtr grid = build_grid(domain, r, plan.h);
    const BarrierSet bs = build_subsolution(plan.k, grid);
    const BoundaryData bc{bs.outer_value, bs.inner_value};
    std::map<size_t, GridFunction> current_r;
    GridFunction warm;
    for (size_t ei = 0; ei < plan.eps_schedule.size(); ++ei) {
      const double eps = plan.eps_schedule[ei];
      SolverConfig cfg = plan.solver;
      cfg.epsilon = eps;
      cfg.eps_ceiling = bs.constants.eps1;
      StartingPoint init;
      if (warm.grid) {
        init = {warm, plan.eps_schedule[ei - 1], "warm"};
      } else {
        init = initial_iterate(bs, grid, eps);
        if (ri > 0) {
          GridFunction blended = transfer(previous_r.at(ei), init.u);
          if (plan.k == 1 || grid_admissible(blended, plan.k, kGammaFloor)) init = {blended, eps, "transfer"};
        }
      }
      ContinuationStep step;
      step.epsilon = eps;
      step.r = r;
      step.h = plan.h;
      try {
        auto [u, rep] = solve_with_homotopy(grid, plan.k, cfg, bc, init);
        step.solution = std::move(u);
        step.report = std::move(rep);
      } catch (const SolveError& e) {
        throw SolveError(std::string(e.what()) + " [continuation step eps=" + fmt(eps) + ", r=" + fmt(r) + "]");
      }
      step.monotonicity_violation = std::numeric_limits<double>::quiet_NaN();
      step.delta_sup = std::numeric_limits<double>::quiet_NaN();
      auto compare = [&](const GridFunction& prev, bool monotone) {
        const AnnularGrid& a = *prev.grid;
        double viol = 0.0, delta = 0.0;
        for (std::int64_t i = 0; i < grid->lattice_size(); ++i) {
          if (grid->node(i).cls != NodeClass::Interior) continue;
          const std::int64_t j = a.lattice_index(grid->lattice_coords(i));
          if (j < 0 || a.node(j).cls != NodeClass::Interior) continue;
          viol = std::max(viol, prev[j] - step.solution[i]);
          delta = std::max(delta, std::abs(prev[j] - step.solution[i]));
        }
        if (monotone) step.monotonicity_violation = std::max(0.0, viol);
        step.delta_sup = delta;
      };
      if (warm.grid) compare(warm, false);
      if (ri > 0) compare(previous_r.at(ei), true);
      warm = step.solution;
      current_r[ei] = step.solution;
      if (on_step) on_step(step);
      steps.push_back(std::move(step));
    }
    previous_r = std::move(current_r);
  }
  return steps;
}

}  // namespace khess
