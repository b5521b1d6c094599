#include "khess/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace khess {

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Interior: return "interior";
    case NodeClass::OuterBoundary: return "outer";
    case NodeClass::InnerBoundary: return "inner";
    case NodeClass::Exterior: return "exterior";
  }
  return "?";
}

std::int64_t AnnularGrid::lattice_index(const std::array<int, 3>& ijk) const {
  const int s = side();
  std::int64_t idx = 0;
  for (int a = 0; a < dim(); ++a) {
    const int c = ijk[a] + half_;
    if (c < 0 || c >= s) return -1;
    idx = idx * s + c;
  }
  return idx;
}

std::array<int, 3> AnnularGrid::lattice_coords(std::int64_t index) const {
  std::array<int, 3> ijk{0, 0, 0};
  const int s = side();
  for (int a = dim() - 1; a >= 0; --a) {
    ijk[a] = static_cast<int>(index % s) - half_;
    index /= s;
  }
  return ijk;
}

std::int64_t AnnularGrid::count(NodeClass c) const {
  std::int64_t n = 0;
  for (const Node& nd : nodes_) n += (nd.cls == c);
  return n;
}

namespace {

void make_arms(int dim, std::vector<std::array<int, 3>>& arms, std::vector<AnnularGrid::PairRole>& roles) {
  for (int a = 0; a < dim; ++a) {
    std::array<int, 3> e{0, 0, 0};
    e[a] = 1;
    arms.push_back(e);
    arms.push_back({-e[0], -e[1], -e[2]});
    roles.push_back({a, a, 1.0});
  }
  for (int a = 0; a < dim; ++a) {
    for (int b = a + 1; b < dim; ++b) {
      for (int sgn : {1, -1}) {
        std::array<int, 3> e{0, 0, 0};
        e[a] = 1;
        e[b] = sgn;
        arms.push_back(e);
        arms.push_back({-e[0], -e[1], -e[2]});
        roles.push_back({a, b, static_cast<double>(sgn)});
      }
    }
  }
}

// First root in (0, smax] of |x + s v| = r, or +inf.
double inner_crossing(const Point& x, const Point& v, double r, double smax) {
  const double a = dot(v, v);
  const double b = 2.0 * dot(x, v);
  const double c = dot(x, x) - r * r;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  // Stable form of the smaller root.
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double s1 = q / a;
  double s2 = (q != 0.0) ? c / q : s1;
  if (s1 > s2) std::swap(s1, s2);
  if (s1 > 0.0 && s1 <= smax) return s1;
  if (s2 > 0.0 && s2 <= smax && c < 0.0) return s2;
  return std::numeric_limits<double>::infinity();
}

double outer_crossing(const DomainSpec& dom, const Point& x, const Point& v, double smax) {
  auto f = [&](double s) { return dom.level(x + s * v); };
  double hi = 1.0;
  if (f(1.0) < 0.0) {
    if (f(smax) < 0.0) return std::numeric_limits<double>::infinity();
    hi = smax;
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

GridPtr build_grid(const DomainSpec& domain, double r, double h) {
  if (!(r > 0.0) || !(r < 0.5 * domain.r0()))
    throw ConfigError("grid: puncture radius must satisfy 0 < r < r0/2 (r=" + std::to_string(r) +
                      ", r0=" + std::to_string(domain.r0()) + ")");
  if (!(h > 0.0) || !(h <= 0.25 * r * (1.0 + 1e-12)))
    throw ConfigError("grid: spacing must satisfy 0 < h <= r/4 (h=" + std::to_string(h) +
                      ", r=" + std::to_string(r) + ")");

  auto g = std::make_shared<AnnularGrid>();
  g->domain_ = domain;
  g->r_ = r;
  g->h_ = h;
  g->half_ = static_cast<int>(std::ceil((domain.rho_max() + 2.0 * h) / h));
  const int n = domain.dim();
  const int s = g->side();
  g->lattice_size_ = 1;
  for (int a = 0; a < n; ++a) g->lattice_size_ *= s;
  make_arms(n, g->arm_offsets_, g->pair_roles_);

  const double tol = 1e-3 * h;
  g->nodes_.resize(g->lattice_size_);
  for (std::int64_t i = 0; i < g->lattice_size_; ++i) {
    const auto ijk = g->lattice_coords(i);
    Node& nd = g->nodes_[i];
    for (int a = 0; a < n; ++a) nd.x[a] = ijk[a] * h;
    const double rad = norm(nd.x);
    const bool inside = rad > r + tol && domain.level(nd.x) < -tol;
    nd.cls = inside ? NodeClass::Interior : NodeClass::Exterior;
    if (inside) g->interior_.push_back(static_cast<std::int32_t>(i));
  }
  g->unknown_.assign(g->lattice_size_, -1);
  for (size_t k = 0; k < g->interior_.size(); ++k) g->unknown_[g->interior_[k]] = static_cast<std::int32_t>(k);

  const int arms = g->arm_count();
  g->links_.resize(g->interior_.size() * arms);
  for (size_t k = 0; k < g->interior_.size(); ++k) {
    const std::int32_t p = g->interior_[k];
    const Point x = g->nodes_[p].x;
    const auto ijk = g->lattice_coords(p);
    for (int arm = 0; arm < arms; ++arm) {
      const auto& o = g->arm_offsets_[arm];
      const std::array<int, 3> qijk{ijk[0] + o[0], ijk[1] + o[1], ijk[2] + o[2]};
      const std::int64_t q = g->lattice_index(qijk);
      const Point v{o[0] * h, o[1] * h, o[2] * h};
      const double full = norm(v);
      ArmLink& link = g->links_[k * arms + arm];
      if (q >= 0 && g->nodes_[q].cls == NodeClass::Interior) {
        link = {static_cast<std::int32_t>(q), full};
        continue;
      }
      // The neighbor failed the (tolerant) interior test, so the true
      // crossing lies before it or just past it.
      const double s_in = inner_crossing(x, v, r, 2.0);
      const double s_out = outer_crossing(domain, x, v, 2.0);
      double frac = std::min(s_in, s_out);
      bool inner = s_in <= s_out;
      if (!std::isfinite(frac)) {
        // Grazing arm: the neighbor sits within tol of a boundary.
        frac = 1.0;
        inner = norm(x + v) <= r + tol;
      }
      Node bn;
      bn.cls = inner ? NodeClass::InnerBoundary : NodeClass::OuterBoundary;
      bn.x = x + frac * v;
      if (inner) {
        const double rr = norm(bn.x);
        bn.normal = (-1.0 / rr) * bn.x;
      } else {
        bn.normal = domain.boundary_geometry(bn.x).normal;
      }
      bn.owner = p;
      bn.arm = arm;
      bn.fraction = frac;
      link = {static_cast<std::int32_t>(g->nodes_.size()), frac * full};
      g->nodes_.push_back(bn);
    }
  }
  g->unknown_.resize(g->nodes_.size(), -1);
  return g;
}

GridFunction::GridFunction(GridPtr g)
    : grid(std::move(g)), values(grid->size(), std::numeric_limits<double>::quiet_NaN()) {}

namespace {

// Second derivative at 0 of the cubic through (s[i], u_i).
std::array<double, 4> cubic_d2_weights(const std::array<double, 4>& s) {
  std::array<double, 4> w{};
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0, den = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      sum += s[j];
      den *= s[i] - s[j];
    }
    w[i] = -2.0 * sum / den;
  }
  return w;
}

}  // namespace

PairWeights pair_weights(const AnnularGrid& g, std::int32_t unknown, int pair) {
  const ArmLink& ap = g.link(unknown, 2 * pair);
  const ArmLink& am = g.link(unknown, 2 * pair + 1);
  const bool cut_p = ap.node >= g.lattice_size();
  const bool cut_m = am.node >= g.lattice_size();
  if (cut_p != cut_m) {
    // Continue one more step along the uncut arm.
    const int far_arm = cut_p ? 2 * pair + 1 : 2 * pair;
    const ArmLink& near = cut_p ? am : ap;
    const std::int32_t nu = g.unknown_of(near.node);
    if (nu >= 0) {
      const ArmLink& far = g.link(nu, far_arm);
      const double lc = cut_p ? ap.length : am.length;
      const auto w = cubic_d2_weights({lc, 0.0, -near.length, -(near.length + far.length)});
      PairWeights out{0.0, 0.0, w[1], w[3], far.node};
      (cut_p ? out.cp : out.cm) = w[0];
      (cut_p ? out.cm : out.cp) = w[2];
      return out;
    }
  }
  const double lp = ap.length, lm = am.length;
  const double cp = 2.0 / (lp * (lp + lm));
  const double cm = 2.0 / (lm * (lp + lm));
  return {cp, cm, -(cp + cm)};
}

SymMatrix fd_hessian(const GridFunction& u, std::int32_t unknown) {
  const AnnularGrid& g = *u.grid;
  const double u0 = u[g.interior()[unknown]];
  SymMatrix hess(g.dim());
  std::array<double, 9> acc{};
  for (int p = 0; p < g.pair_count(); ++p) {
    const PairWeights w = pair_weights(g, unknown, p);
    double d2 = w.cp * u[g.link(unknown, 2 * p).node] + w.cm * u[g.link(unknown, 2 * p + 1).node] + w.c0 * u0;
    if (w.extra >= 0) d2 += w.cx * u[w.extra];
    const auto& role = g.pair_role(p);
    if (role.a == role.b)
      acc[role.a * 3 + role.a] += d2;
    else
      acc[role.a * 3 + role.b] += 0.5 * role.sign * d2;
  }
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a; b < g.dim(); ++b) hess.set(a, b, acc[a * 3 + b]);
  return hess;
}

Point fd_gradient(const GridFunction& u, std::int32_t unknown) {
  const AnnularGrid& g = *u.grid;
  const double u0 = u[g.interior()[unknown]];
  Point grad{0.0, 0.0, 0.0};
  for (int a = 0; a < g.dim(); ++a) {
    const ArmLink& lp = g.link(unknown, 2 * a);
    const ArmLink& lm = g.link(unknown, 2 * a + 1);
    const double Lp = lp.length, Lm = lm.length;
    grad[a] = (Lm * Lm * (u[lp.node] - u0) + Lp * Lp * (u0 - u[lm.node])) / (Lp * Lm * (Lp + Lm));
  }
  return grad;
}

}  // namespace khess
