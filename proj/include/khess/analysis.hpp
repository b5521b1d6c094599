#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "khess/barriers.hpp"
#include "khess/grid.hpp"
#include "khess/solver.hpp"

namespace khess {

/// Raised for level ranges touching the boundary, vanishing gradients,
/// degenerate curvature and regime/sign mismatches.
class AnalysisError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// FD gradient and Hessian at every interior unknown.
struct NodeDerivatives {
  GridPtr grid;
  std::vector<Point> grad;
  std::vector<SymMatrix> hess;
};
NodeDerivatives node_derivatives(const GridFunction& u);

/// Gradient at a point y of the boundary of Omega_r by Taylor expansion
/// from the nearest interior node (`grad`), with u constant along the
/// boundary so only the normal component is kept. `alt_normal_derivative`
/// repeats the expansion from the second-nearest node; the two agree to
/// O(h^2) and their gap serves as the error estimate. `hess` is the nodal
/// Hessian carried to y to first order.
struct BoundaryGradient {
  Point grad{};
  SymMatrix hess;
  double normal_derivative = 0.0;
  double alt_normal_derivative = 0.0;
  std::int32_t node = -1;
};
BoundaryGradient boundary_gradient(const NodeDerivatives& d, const Point& y, const Point& normal);

struct EstimateRecord {
  std::string name;
  std::string anchor;  // the bound being checked, in words
  double constant = 0.0;
  std::int64_t worst_node = -1;
  double margin = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct EstimateReport {
  Regime regime = Regime::Above;
  std::vector<EstimateRecord> records;
  bool all_pass() const;
};

struct PField {
  GridFunction P;
  double interior_max = 0.0;
  double boundary_max = 0.0;
  /// boundary_max * (1 + 20h) - interior_max.
  double margin = 0.0;
  std::int64_t argmax = -1;
};

/// P = |Du|^2 e^{2u} (k = n/2), |Du|^2 u^{2(n-k)/(2k-n)} (k > n/2),
/// |Du|^2 (-u)^{-2(n-k)/(n-2k)} (k < n/2). Throws AnalysisError if u has
/// the wrong sign for the regime.
PField compute_P(const GridFunction& u, int k);
EstimateRecord check_p_maximum(const GridFunction& u, int k);

/// Two-sided C0 bound by regime, tolerance 10 h^2 at every node.
EstimateRecord check_c0(const GridFunction& u, int k);

/// Largest c0 with x . Du >= c0 |x|^{2-n/k} over all nodes.
EstimateRecord check_transversality(const GridFunction& u, int k);

/// max over interior nodes of |D^order u| |x|^{(n - (2 - order) k)/k}.
double decay_constant(const GridFunction& u, int k, int order);
/// Passes when the fitted constants across the solutions differ by at
/// most `ratio_tol`.
EstimateRecord check_decay(std::span<const GridFunction> solutions, int k, int order, double ratio_tol = 1.5);

/// H_{m-1} = S_m^{ij}(D^2 u) u_i u_j / |Du|^{m+1}; 1 for m = 1 and 0 when
/// m - 1 exceeds the hypersurface dimension n - 1.
double level_curvature(const Point& grad, const SymMatrix& hess, int m);

/// S_{k+1} - (H_k/H_{k-1})|Du| S_k + (H_k^2/H_{k-1})|Du|^{k+1} - H_{k+1}|Du|^{k+1}.
double m_defect(const Point& grad, const SymMatrix& hess, int k);

struct LevelFacet {
  Point centroid{};
  double area = 0.0;  // length in 2D
  Point normal{};     // Du / |Du|
  double grad_norm = 0.0;
  SymMatrix hess;             // interpolated D^2 u
  std::array<double, 5> H{};  // H_0 .. H_{k+1}
  double m_defect = 0.0;      // NaN when k + 1 > n
};

struct LevelSurface {
  double level = 0.0;
  int dim = 0;
  int k = 0;
  std::vector<LevelFacet> facets;
  /// Per facet, the lattice edges (encoded pairs) carrying its vertices.
  std::vector<std::array<std::int64_t, 3>> vertex_keys;

  double area() const;
  /// Every vertex (2D) or facet edge (3D) is shared by exactly two facets.
  bool closed() const;
};

/// Marching triangles (2D) / tetrahedra (3D) over fully interior lattice
/// cells. Throws AnalysisError when the level reaches a boundary cell.
LevelSurface extract_level(const GridFunction& u, const NodeDerivatives& d, int k, double t);

/// g(t) = t^{(n-k)/(2k-n)}, (-t)^{(n-k)/(2k-n)} or e^t by regime.
double level_weight(int n, int k, double t);

/// Facet quadrature of g^a(t) |Du|^{b+1} H_{k-1}, a = b - k + 1.
double compute_I(const LevelSurface& s, double b);

/// Levels strictly inside the data range, geometrically spaced in |t|.
std::vector<double> level_ladder(const GridFunction& u, int count, double margin_fraction = 0.1);

double c_nk(int n, int k);

struct MonotonicityScan {
  std::vector<double> levels;
  std::vector<double> I;
  std::vector<double> dI;  // NaN at the two end levels
  std::vector<double> area;
  double c_fit = 0.0;      // NaN when only data is emitted (k < n/2)
  double slack = 0.0;      // c_fit * epsilon
  double epsilon = 0.0;
  double a = 0.0, a0 = 0.0, b = 0.0;
  bool a_zero = false;
  std::string branch;  // "lower" (a >= 0), "upper" (a < 0) or "data"
  double max_m_defect = 0.0;
};

/// Throws ConfigError with fewer than 3 levels, levels out of order or
/// outside the regime range, or b below c_{n,k}.
MonotonicityScan monotonicity_scan(const GridFunction& u, const NodeDerivatives& d, int k, double epsilon,
                                   std::span<const double> levels, double b);

/// Least-squares slope of log|S_t| against log t (k > n/2) or t (k = n/2).
double fit_area_exponent(std::span<const double> levels, std::span<const double> areas, int n, int k);
/// k(n-1)/(2k-n) for k > n/2, n-1 for k = n/2.
double expected_area_exponent(int n, int k);

struct InequalityRecord {
  double b = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double factor = 0.0;
  double margin = 0.0;
  double grad_error = 0.0;  // relative boundary-gradient error estimate
  double tolerance = 0.0;   // 3 * grad_error * |rhs|
  bool pass = false;
  int points = 0;
};

/// (2k-n)/(n-k) for n/2 < k < n, 1 for k = n/2; ConfigError otherwise.
double inequality_factor(int n, int k);

/// lhs = int |Du|^{b+1} H_{k-1}, rhs = int |Du|^b H_k over the outer
/// boundary with exact boundary curvatures.
InequalityRecord boundary_inequality(const NodeDerivatives& d, int k, double b, int resolution = 0);
/// Same quantities on a sphere of radius sol.R from the radial profile.
InequalityRecord radial_inequality(const RadialProfileSolution& sol, double b);

struct CurvatureComparison {
  std::vector<double> rms_relative;  // per m - 1 = 1 .. n-1
  double worst = 0.0;
  int points = 0;
};
/// level_curvature of u on the outer boundary against the exact boundary
/// curvatures.
CurvatureComparison compare_boundary_curvature(const NodeDerivatives& d, int resolution = 0);

}  // namespace khess
