#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "khess/barriers.hpp"
#include "khess/grid.hpp"

namespace khess {

/// Raised when Newton cannot reach the residual target.
class SolveError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double epsilon = 1e-2;
  double newton_tol = 1e-8;
  int max_iters = 60;
  double armijo = 1e-4;
  double min_step = 1.0 / 4096.0;
  double gamma_floor = 1e-12;
  double linear_tol = 1e-10;
  /// Upper bound on epsilon (the eps1 of the active barriers); <= 0 disables.
  double eps_ceiling = 0.0;
};

struct BoundaryData {
  double outer = 0.0;
  double inner = 0.0;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;         // sup |S_k(D^2 u) - eps| over interior nodes
  double residual_outer = 0.0;   // same, restricted to owners of outer cut nodes
  double residual_inner = 0.0;   // owners of inner cut nodes
  double admissibility = 0.0;    // min over nodes of min_j S_j
  double wall_seconds = 0.0;
  std::vector<double> history;   // residual per accepted iterate
  std::vector<double> steps;     // accepted damping factors
  std::vector<double> homotopy;  // eps stages solved on the way to the target
  std::string message;
};

/// Damped Newton for S_k(D^2 u) = eps on the interior nodes, boundary nodes
/// fixed to the data. Works on the concave form S_k^{1/k} = eps^{1/k}; every
/// accepted iterate is Gamma_k-admissible at all interior nodes.
std::pair<GridFunction, SolveReport> solve_epsilon(const GridPtr& grid, int k, const SolverConfig& config,
                                                   const BoundaryData& bc, const GridFunction& init);

/// Per-node S_k of the grid Hessian (NaN off the interior).
GridFunction sk_field(const GridFunction& u, int k);

/// Radial solution of S_k(D^2 phi(|x|)) = eps on r < rho < R.
class RadialProfileSolution {
public:
  int n = 0, k = 0;
  double epsilon = 0.0, r = 0.0, R = 0.0;
  double inner_value = 0.0, outer_value = 0.0;
  double c = 0.0;  // rho^{n-k} phi'^k = K rho^n + c
  double K = 0.0;

  double dphi(double rho) const;
  double d2phi(double rho) const;
  double phi(double rho) const;
  /// S_k of the radial Hessian at rho (from phi', phi'') minus eps.
  double residual(double rho) const;

private:
  friend RadialProfileSolution radial_oracle(int, int, double, double, double, double, double);
  // eps = 0 closed form A G_k + B.
  bool closed_form_ = false;
  double A_ = 0.0, B_ = 0.0;
};

/// Throws std::domain_error when no admissible increasing profile exists.
RadialProfileSolution radial_oracle(int n, int k, double epsilon, double r, double R, double inner_value,
                                    double outer_value);

/// Values of the radial profile on a grid (boundary nodes get the data).
GridFunction sample_radial(const GridPtr& grid, const RadialProfileSolution& sol);

struct ContinuationStep {
  double epsilon = 0.0;
  double r = 0.0;
  double h = 0.0;
  GridFunction solution;
  SolveReport report;
  /// Sup of max(0, u_prev - u) on shared lattice nodes when r decreased
  /// (expected <= 10 h^2); NaN for the first step or unchanged r.
  double monotonicity_violation = 0.0;
  /// Sup |u - u_prev| on shared nodes.
  double delta_sup = 0.0;
};

struct ContinuationPlan {
  int k = 2;
  std::vector<double> eps_schedule;
  std::vector<double> r_schedule;
  double h = 0.04;
  SolverConfig solver;
};

/// For each r (outer loop) and eps (inner loop): build grid and barriers,
/// warm-start from the previous solution, solve. Solve failures are
/// rethrown with the schedule position.
std::vector<ContinuationStep> continuation(const DomainSpec& domain, const ContinuationPlan& plan,
                                           const std::function<void(const ContinuationStep&)>& on_step = {});

/// Copies `from` onto the nodes of `fallback`'s grid wherever a node with
/// the same coordinates carries a value; other nodes keep `fallback`.
GridFunction transfer(const GridFunction& from, const GridFunction& fallback);

/// Admissible starting iterate for the eps problem. The barrier
/// subsolution is used when its grid Hessian is in Gamma_k everywhere;
/// otherwise a domain-scaled radial profile for a boosted right-hand side
/// eps' >= eps (more convex) is returned together with eps'.
struct StartingPoint {
  GridFunction u;
  double epsilon = 0.0;
  std::string source;
};
StartingPoint initial_iterate(const BarrierSet& barriers, const GridPtr& grid, double epsilon);

/// Solves at the lowest eps in target * 4^j (up to start.epsilon) that is
/// reachable from the start, then walks eps down geometrically to
/// config.epsilon, each stage warm-started from the last. The report
/// accumulates iterations and lists the stages in `homotopy`.
std::pair<GridFunction, SolveReport> solve_with_homotopy(const GridPtr& grid, int k, const SolverConfig& config,
                                                         const BoundaryData& bc, const StartingPoint& start);

bool grid_admissible(const GridFunction& u, int k, double floor, double* margin = nullptr);

}  // namespace khess
