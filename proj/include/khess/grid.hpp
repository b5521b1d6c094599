#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "khess/geometry.hpp"
#include "khess/symfunc.hpp"

namespace khess {

enum class NodeClass : std::uint8_t { Interior = 0, OuterBoundary = 1, InnerBoundary = 2, Exterior = 3 };

const char* to_string(NodeClass c);

struct Node {
  NodeClass cls = NodeClass::Exterior;
  Point x{};
  // Boundary nodes only: outward normal of Omega_r, owning interior node,
  // arm of the owner that produced the cut, and cut fraction along the arm.
  Point normal{};
  std::int32_t owner = -1;
  std::int32_t arm = -1;
  double fraction = 0.0;
};

/// Neighbor reached along one stencil arm: a lattice node or a cut node.
struct ArmLink {
  std::int32_t node = -1;
  double length = 0.0;
};

/// Cartesian lattice through the origin restricted to Omega_r = Omega \ B_r.
/// Node indices [0, lattice_size) are lattice points in lexicographic order;
/// boundary cut nodes follow. Arms come in opposite pairs (2p, 2p+1): the
/// coordinate axes first, then the face diagonals e_a +- e_b.
class AnnularGrid {
public:
  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  double r() const { return r_; }
  double h() const { return h_; }
  int half_width() const { return half_; }
  int side() const { return 2 * half_ + 1; }
  std::int64_t lattice_size() const { return lattice_size_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::int64_t i) const { return nodes_[i]; }
  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }

  /// Interior nodes in increasing node order; position = unknown index.
  const std::vector<std::int32_t>& interior() const { return interior_; }
  std::int32_t unknown_of(std::int64_t node) const { return unknown_[node]; }

  int arm_count() const { return static_cast<int>(arm_offsets_.size()); }
  int pair_count() const { return arm_count() / 2; }
  const std::array<int, 3>& arm_offset(int arm) const { return arm_offsets_[arm]; }
  /// Axes a <= b the pair contributes to and its sign in H_ab.
  struct PairRole {
    int a;
    int b;
    double sign;
  };
  const PairRole& pair_role(int pair) const { return pair_roles_[pair]; }

  const ArmLink& link(std::int32_t unknown, int arm) const { return links_[unknown * arm_count() + arm]; }

  /// Lattice index of integer coordinates (centered), or -1 if outside.
  std::int64_t lattice_index(const std::array<int, 3>& ijk) const;
  std::array<int, 3> lattice_coords(std::int64_t index) const;

  std::int64_t count(NodeClass c) const;

private:
  friend std::shared_ptr<const AnnularGrid> build_grid(const DomainSpec& domain, double r, double h);
  DomainSpec domain_;
  double r_ = 0.0, h_ = 0.0;
  int half_ = 0;
  std::int64_t lattice_size_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> interior_;
  std::vector<std::int32_t> unknown_;
  std::vector<std::array<int, 3>> arm_offsets_;
  std::vector<PairRole> pair_roles_;
  std::vector<ArmLink> links_;
};

using GridPtr = std::shared_ptr<const AnnularGrid>;

/// Requires r < r0/2 and h <= r/4; throws ConfigError otherwise.
GridPtr build_grid(const DomainSpec& domain, double r, double h);

/// Scalar field on a grid; exterior nodes hold NaN.
struct GridFunction {
  GridPtr grid;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(GridPtr g);
  double& operator[](std::int64_t i) { return values[i]; }
  double operator[](std::int64_t i) const { return values[i]; }
};

/// Second difference along pair p at an interior unknown:
/// D2 = cp*u(+) + cm*u(-) + c0*u0 + cx*u(extra). Away from the boundary this
/// is the central three-point rule. When exactly one arm is cut, a fourth
/// point one step further along the opposite arm makes the rule exact for
/// cubics (second order on the cut cell); `extra` is -1 when unused.
struct PairWeights {
  double cp, cm, c0;
  double cx = 0.0;
  std::int32_t extra = -1;
};
PairWeights pair_weights(const AnnularGrid& g, std::int32_t unknown, int pair);

SymMatrix fd_hessian(const GridFunction& u, std::int32_t unknown);
/// Second-order gradient from the axis pairs (nonuniform three-point rule).
Point fd_gradient(const GridFunction& u, std::int32_t unknown);

/// Samples f at every non-exterior node.
template <class F>
GridFunction sample(const GridPtr& grid, F&& f) {
  GridFunction out(grid);
  for (std::int64_t i = 0; i < grid->size(); ++i)
    if (grid->node(i).cls != NodeClass::Exterior) out[i] = f(grid->node(i).x);
  return out;
}

}  // namespace khess
