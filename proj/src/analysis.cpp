#include "khess/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "khess/parallel.hpp"

namespace khess {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGradFloor = 1e-10;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Point mat_vec(const SymMatrix& m, const Point& v) {
  Point out{0.0, 0.0, 0.0};
  for (int a = 0; a < m.dim(); ++a)
    for (int b = 0; b < m.dim(); ++b) out[a] += m(a, b) * v[b];
  return out;
}

double data_value(const GridFunction& u, NodeClass cls) {
  for (std::int64_t i = u.grid->lattice_size(); i < u.grid->size(); ++i)
    if (u.grid->node(i).cls == cls) return u[i];
  throw AnalysisError("grid has no boundary nodes of the requested class");
}

// Walks every lattice cell; f(corner node indices, corner count).
template <class F>
void for_each_cell(const AnnularGrid& g, F&& f) {
  const int n = g.dim();
  const int half = g.half_width();
  const int corners = 1 << n;
  std::array<std::int64_t, 8> idx{};
  const int zlo = n == 3 ? -half : 0, zhi = n == 3 ? half - 1 : 0;
  for (int i = -half; i < half; ++i)
    for (int j = -half; j < half; ++j)
      for (int l = zlo; l <= zhi; ++l) {
        bool ok = true;
        for (int c = 0; c < corners && ok; ++c) {
          const std::array<int, 3> ijk{i + (c & 1), j + ((c >> 1) & 1), n == 3 ? l + ((c >> 2) & 1) : 0};
          idx[c] = g.lattice_index(ijk);
          ok = idx[c] >= 0;
        }
        if (ok) f(idx, corners);
      }
}

bool in_hole(const AnnularGrid& g, const Point& x) { return norm(x) <= g.r() + 1e-3 * g.h(); }

struct LevelRange {
  double lo, hi;  // the level must lie strictly inside to avoid boundary cells
};

// Over cells touching the hole (outside of Omega), the largest (smallest)
// interior corner value.
LevelRange safe_level_range(const GridFunction& u) {
  const AnnularGrid& g = *u.grid;
  double lo = data_value(u, NodeClass::InnerBoundary), hi = data_value(u, NodeClass::OuterBoundary);
  for_each_cell(g, [&](const std::array<std::int64_t, 8>& idx, int corners) {
    bool hole = false, outside = false;
    for (int c = 0; c < corners; ++c) {
      const Node& nd = g.node(idx[c]);
      if (nd.cls == NodeClass::Interior) continue;
      (in_hole(g, nd.x) ? hole : outside) = true;
    }
    if (!hole && !outside) return;
    for (int c = 0; c < corners; ++c) {
      if (g.node(idx[c]).cls != NodeClass::Interior) continue;
      if (hole) lo = std::max(lo, u[idx[c]]);
      if (outside) hi = std::min(hi, u[idx[c]]);
    }
  });
  return {lo, hi};
}

struct Vertex {
  Point x;
  Point grad;
  SymMatrix hess;
  std::int64_t key;
};

double p_weight(int n, int k, double u) {
  switch (classify_regime(n, k)) {
    case Regime::Critical: return std::exp(2.0 * u);
    case Regime::Above:
      if (!(u > 0.0)) throw AnalysisError("compute_P: u must be positive when k > n/2 (got " + fmt(u) + ")");
      return std::pow(u, 2.0 * (n - k) / (2.0 * k - n));
    case Regime::Below:
      if (!(u < 0.0)) throw AnalysisError("compute_P: u must be negative when k < n/2 (got " + fmt(u) + ")");
      return std::pow(-u, -2.0 * (n - k) / (n - 2.0 * k));
  }
  return kNaN;
}

// Gradient at any non-exterior node: FD inside, boundary reconstruction on
// the cut nodes.
Point node_gradient(const NodeDerivatives& d, std::int64_t i) {
  const AnnularGrid& g = *d.grid;
  const Node& nd = g.node(i);
  if (nd.cls == NodeClass::Interior) return d.grad[g.unknown_of(i)];
  return boundary_gradient(d, nd.x, nd.normal).grad;
}

// Nodal Hessian moved by `offset` with axis differences of neighboring
// nodal Hessians (central where both neighbors are interior).
SymMatrix hessian_at(const NodeDerivatives& d, std::int64_t node, const Point& offset) {
  const AnnularGrid& g = *d.grid;
  const int n = g.dim();
  const std::array<int, 3> c = g.lattice_coords(node);
  SymMatrix out = d.hess[g.unknown_of(node)];
  for (int a = 0; a < n; ++a) {
    std::array<int, 3> up = c, dn = c;
    ++up[a];
    --dn[a];
    const std::int64_t iu = g.lattice_index(up), id = g.lattice_index(dn);
    const bool has_up = iu >= 0 && g.node(iu).cls == NodeClass::Interior;
    const bool has_dn = id >= 0 && g.node(id).cls == NodeClass::Interior;
    SymMatrix slope(n);
    if (has_up && has_dn)
      slope = (d.hess[g.unknown_of(iu)] - d.hess[g.unknown_of(id)]) * (0.5 / g.h());
    else if (has_up)
      slope = (d.hess[g.unknown_of(iu)] - d.hess[g.unknown_of(node)]) * (1.0 / g.h());
    else if (has_dn)
      slope = (d.hess[g.unknown_of(node)] - d.hess[g.unknown_of(id)]) * (1.0 / g.h());
    out = out + slope * offset[a];
  }
  return out;
}

}  // namespace

bool EstimateReport::all_pass() const {
  return std::all_of(records.begin(), records.end(), [](const EstimateRecord& r) { return r.pass; });
}

NodeDerivatives node_derivatives(const GridFunction& u) {
  NodeDerivatives d;
  d.grid = u.grid;
  const auto m = static_cast<std::int64_t>(u.grid->interior().size());
  d.grad.resize(m);
  d.hess.resize(m);
  parallel_for(m, [&](std::int64_t q) {
    d.grad[q] = fd_gradient(u, static_cast<std::int32_t>(q));
    d.hess[q] = fd_hessian(u, static_cast<std::int32_t>(q));
  });
  return d;
}

BoundaryGradient boundary_gradient(const NodeDerivatives& d, const Point& y, const Point& normal) {
  const AnnularGrid& g = *d.grid;
  const int n = g.dim();
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < n; ++a) c[a] = static_cast<int>(std::lround(y[a] / g.h()));
  struct Cand {
    double dist;
    std::int64_t node;
  };
  Cand best{std::numeric_limits<double>::infinity(), -1}, second = best;
  const int span = 2;
  for (int i = -span; i <= span; ++i)
    for (int j = -span; j <= span; ++j)
      for (int l = (n == 3 ? -span : 0); l <= (n == 3 ? span : 0); ++l) {
        const std::int64_t idx = g.lattice_index({c[0] + i, c[1] + j, c[2] + l});
        if (idx < 0 || g.node(idx).cls != NodeClass::Interior) continue;
        const Point dx = y - g.node(idx).x;
        const Cand cand{dot(dx, dx), idx};
        auto less = [](const Cand& a, const Cand& b) { return a.dist < b.dist || (a.dist == b.dist && a.node < b.node); };
        if (less(cand, best)) {
          second = best;
          best = cand;
        } else if (less(cand, second)) {
          second = cand;
        }
      }
  if (best.node < 0 || second.node < 0)
    throw AnalysisError("boundary_gradient: no interior nodes near the boundary point");
  auto expand = [&](std::int64_t node) {
    const std::int32_t q = g.unknown_of(node);
    const Point step = y - g.node(node).x;
    // Midpoint Hessian: third-order accurate gradient expansion.
    const Point dg = mat_vec(hessian_at(d, node, 0.5 * step), step);
    return dot(d.grad[q] + dg, normal);
  };
  BoundaryGradient out;
  out.node = g.unknown_of(best.node);
  out.normal_derivative = expand(best.node);
  out.alt_normal_derivative = expand(second.node);
  out.grad = out.normal_derivative * normal;
  out.hess = hessian_at(d, best.node, y - g.node(best.node).x);
  return out;
}

PField compute_P(const GridFunction& u, int k) {
  const AnnularGrid& g = *u.grid;
  const int n = g.dim();
  const NodeDerivatives d = node_derivatives(u);
  PField out;
  out.P = GridFunction(u.grid);
  out.interior_max = -std::numeric_limits<double>::infinity();
  out.boundary_max = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < g.size(); ++i) {
    const Node& nd = g.node(i);
    if (nd.cls == NodeClass::Exterior) continue;
    const Point grad = node_gradient(d, i);
    const double p = dot(grad, grad) * p_weight(n, k, u[i]);
    out.P[i] = p;
    if (nd.cls == NodeClass::Interior) {
      if (p > out.interior_max) {
        out.interior_max = p;
        out.argmax = i;
      }
    } else {
      out.boundary_max = std::max(out.boundary_max, p);
    }
  }
  out.margin = out.boundary_max * (1.0 + 20.0 * g.h()) - out.interior_max;
  return out;
}

EstimateRecord check_p_maximum(const GridFunction& u, int k) {
  const PField pf = compute_P(u, k);
  EstimateRecord r;
  r.name = "p_maximum";
  r.anchor = "max over the domain of P <= max over its boundary of P";
  r.constant = pf.interior_max / pf.boundary_max;
  r.worst_node = pf.argmax;
  r.margin = pf.margin;
  r.tolerance = 20.0 * u.grid->h();
  r.pass = pf.margin >= 0.0;
  r.note = "interior max " + fmt(pf.interior_max) + ", boundary max " + fmt(pf.boundary_max);
  return r;
}

EstimateRecord check_c0(const GridFunction& u, int k) {
  const AnnularGrid& g = *u.grid;
  const DomainSpec& dom = g.domain();
  const int n = g.dim();
  const Regime regime = classify_regime(n, k);
  const double p = homogeneity_exponent(n, k);
  const double r0 = dom.r0(), R0 = dom.R0();
  EstimateRecord rec;
  rec.name = "c0_bounds";
  rec.tolerance = 10.0 * g.h() * g.h();
  double worst = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < g.size(); ++i) {
    if (g.node(i).cls == NodeClass::Exterior) continue;
    const double rho = norm(g.node(i).x);
    double lo = 0.0, hi = 0.0;
    switch (regime) {
      case Regime::Above:
        lo = 0.5 * std::pow(rho / R0, p);
        hi = std::pow(rho / r0, p);
        break;
      case Regime::Below:
        lo = -(std::pow(rho, p) - std::pow(R0, p) + 1.0);
        hi = -(std::pow(rho, p) - std::pow(r0, p) + 1.0);
        break;
      case Regime::Critical:
        lo = std::log(rho / R0);
        hi = std::log(rho / r0);
        break;
    }
    const double m = std::min(u[i] - lo, hi - u[i]);
    if (m < worst) {
      worst = m;
      rec.worst_node = i;
    }
  }
  switch (regime) {
    case Regime::Above: rec.anchor = "(1/2)(|x|/R0)^p <= u <= (|x|/r0)^p"; break;
    case Regime::Below: rec.anchor = "|x|^p - r0^p + 1 <= -u <= |x|^p - R0^p + 1"; break;
    case Regime::Critical: rec.anchor = "log|x| - log R0 <= u <= log|x| - log r0"; break;
  }
  rec.margin = worst;
  rec.constant = worst;
  rec.pass = worst >= -rec.tolerance;
  return rec;
}

EstimateRecord check_transversality(const GridFunction& u, int k) {
  const AnnularGrid& g = *u.grid;
  const int n = g.dim();
  const double p = homogeneity_exponent(n, k);
  const NodeDerivatives d = node_derivatives(u);
  EstimateRecord rec;
  rec.name = "transversality";
  rec.anchor = "x . Du >= c0 |x|^{2-n/k} with c0 > 0";
  double c0 = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < g.size(); ++i) {
    const Node& nd = g.node(i);
    if (nd.cls == NodeClass::Exterior) continue;
    const double v = dot(nd.x, node_gradient(d, i)) / std::pow(norm(nd.x), p);
    if (v < c0) {
      c0 = v;
      rec.worst_node = i;
    }
  }
  // (n-k+1) S_{k-1}/S_k, reported only.
  double fmax = 0.0;
  if (k > 1)
    for (size_t q = 0; q < d.hess.size(); ++q) {
      const double s = sk(d.hess[q], k);
      if (s > 0.0) fmax = std::max(fmax, (n - k + 1) * sk(d.hess[q], k - 1) / s);
    }
  rec.constant = c0;
  rec.margin = c0;
  rec.pass = c0 > 0.0;
  rec.note = "max (n-k+1)S_{k-1}/S_k = " + fmt(fmax);
  return rec;
}

double decay_constant(const GridFunction& u, int k, int order) {
  if (order != 1 && order != 2) throw ConfigError("decay order must be 1 or 2");
  const AnnularGrid& g = *u.grid;
  const int n = g.dim();
  const double expo = (n - (2.0 - order) * k) / k;
  const NodeDerivatives d = node_derivatives(u);
  double c = 0.0;
  for (size_t q = 0; q < d.grad.size(); ++q) {
    const double rho = norm(g.node(g.interior()[q]).x);
    const double mag = order == 1 ? norm(d.grad[q]) : d.hess[q].spectral_norm();
    c = std::max(c, mag * std::pow(rho, expo));
  }
  return c;
}

EstimateRecord check_decay(std::span<const GridFunction> solutions, int k, int order, double ratio_tol) {
  EstimateRecord rec;
  rec.name = order == 1 ? "gradient_decay" : "hessian_decay";
  rec.anchor = order == 1 ? "|Du| <= C |x|^{(k-n)/k}, C independent of eps and r"
                          : "|D^2 u| <= C |x|^{-n/k}, C independent of eps and r";
  rec.tolerance = ratio_tol;
  if (solutions.empty()) throw ConfigError("check_decay needs at least one solution");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::ostringstream note;
  for (const GridFunction& u : solutions) {
    const double c = decay_constant(u, k, order);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    note << (note.tellp() > 0 ? " " : "") << fmt(c);
  }
  rec.constant = hi;
  rec.margin = ratio_tol - hi / lo;
  rec.pass = hi / lo <= ratio_tol;
  rec.note = "fitted C per solution: " + note.str();
  return rec;
}

double level_curvature(const Point& grad, const SymMatrix& hess, int m) {
  const int n = hess.dim();
  if (m < 1) throw std::domain_error("level_curvature: m must be >= 1");
  const double g = norm(grad);
  if (!(g > kGradFloor)) throw AnalysisError("level_curvature: |Du| below floor (transversality fails)");
  if (m == 1) return 1.0;
  if (m - 1 > n - 1) return 0.0;
  const SymMatrix T = sk_jacobian(hess, m);
  return dot(grad, mat_vec(T, grad)) / std::pow(g, m + 1);
}

double m_defect(const Point& grad, const SymMatrix& hess, int k) {
  const int n = hess.dim();
  if (k + 1 > n) throw std::domain_error("m_defect: needs k + 1 <= n");
  const double g = norm(grad);
  const double hkm1 = level_curvature(grad, hess, k);
  const double hk = level_curvature(grad, hess, k + 1);
  const double hkp1 = level_curvature(grad, hess, k + 2);
  if (!(std::abs(hkm1) > 1e-12)) throw AnalysisError("m_defect: H_{k-1} degenerate");
  const double gk1 = std::pow(g, k + 1);
  return sk(hess, k + 1) - hk / hkm1 * g * sk(hess, k) + hk * hk / hkm1 * gk1 - hkp1 * gk1;
}

double LevelSurface::area() const {
  double a = 0.0;
  for (const LevelFacet& f : facets) a += f.area;
  return a;
}

bool LevelSurface::closed() const {
  std::map<std::pair<std::int64_t, std::int64_t>, int> count;
  for (const auto& vk : vertex_keys) {
    if (dim == 2) {
      ++count[{vk[0], vk[0]}];
      ++count[{vk[1], vk[1]}];
    } else {
      for (int e = 0; e < 3; ++e) {
        const std::int64_t a = vk[e], b = vk[(e + 1) % 3];
        ++count[{std::min(a, b), std::max(a, b)}];
      }
    }
  }
  if (count.empty()) return false;
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

LevelSurface extract_level(const GridFunction& u, const NodeDerivatives& d, int k, double t) {
  const AnnularGrid& g = *u.grid;
  const int n = g.dim();
  const double inner = data_value(u, NodeClass::InnerBoundary);
  const double outer = data_value(u, NodeClass::OuterBoundary);
  LevelSurface s;
  s.level = t;
  s.dim = n;
  s.k = k;
  const std::int64_t L = g.lattice_size();

  auto value = [&](std::int64_t idx) {
    const Node& nd = g.node(idx);
    if (nd.cls == NodeClass::Interior) return u[idx];
    return in_hole(g, nd.x) ? inner : outer;
  };
  auto vertex = [&](std::int64_t a, std::int64_t b) {
    const double ua = u[a], ub = u[b];
    const double lam = (t - ua) / (ub - ua);
    const std::int32_t qa = g.unknown_of(a), qb = g.unknown_of(b);
    Vertex v;
    v.x = g.node(a).x + lam * (g.node(b).x - g.node(a).x);
    v.grad = (1.0 - lam) * d.grad[qa] + lam * d.grad[qb];
    v.hess = d.hess[qa] * (1.0 - lam) + d.hess[qb] * lam;
    v.key = std::min(a, b) * L + std::max(a, b);
    return v;
  };
  auto emit = [&](std::span<const Vertex> vs) {
    LevelFacet f;
    Point grad{0, 0, 0};
    SymMatrix hess(n);
    const double w = 1.0 / static_cast<double>(vs.size());
    for (const Vertex& v : vs) {
      f.centroid = f.centroid + w * v.x;
      grad = grad + w * v.grad;
      hess = hess + v.hess * w;
    }
    if (n == 2) {
      f.area = norm(vs[1].x - vs[0].x);
    } else {
      const Point e1 = vs[1].x - vs[0].x, e2 = vs[2].x - vs[0].x;
      const Point cr{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
      f.area = 0.5 * norm(cr);
    }
    f.grad_norm = norm(grad);
    if (!(f.grad_norm > kGradFloor)) throw AnalysisError("extract_level: |Du| vanishes on the level set");
    f.normal = (1.0 / f.grad_norm) * grad;
    f.hess = hess;
    for (int m = 0; m <= std::min(k + 1, 4); ++m) f.H[m] = level_curvature(grad, hess, m + 1);
    f.m_defect = k + 1 <= n ? m_defect(grad, hess, k) : kNaN;
    s.facets.push_back(f);
    std::array<std::int64_t, 3> keys{-1, -1, -1};
    for (size_t i = 0; i < vs.size(); ++i) keys[i] = vs[i].key;
    s.vertex_keys.push_back(keys);
  };

  // Kuhn simplices of the unit cell: corner bit masks along each axis order.
  std::vector<std::array<int, 4>> simplices;
  if (n == 2) {
    simplices = {{0, 1, 3, -1}, {0, 2, 3, -1}};
  } else {
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
      const int c1 = 1 << p[0], c2 = c1 | (1 << p[1]);
      simplices.push_back({0, c1, c2, 7});
    }
  }

  for_each_cell(g, [&](const std::array<std::int64_t, 8>& idx, int corners) {
    bool all_interior = true, above = false, below = false;
    for (int c = 0; c < corners; ++c) {
      all_interior = all_interior && g.node(idx[c]).cls == NodeClass::Interior;
      (value(idx[c]) >= t ? above : below) = true;
    }
    if (!(above && below)) return;
    if (!all_interior)
      throw AnalysisError("extract_level: level " + fmt(t) + " reaches a boundary cell (range error)");
    for (const auto& simp : simplices) {
      std::vector<std::int64_t> up, dn;
      for (int v = 0; v <= n; ++v) (u[idx[simp[v]]] >= t ? up : dn).push_back(idx[simp[v]]);
      if (up.empty() || dn.empty()) continue;
      if (n == 2) {
        std::vector<Vertex> vs;
        for (auto a : up)
          for (auto b : dn) vs.push_back(vertex(a, b));
        emit(vs);
      } else if (up.size() == 1 || dn.size() == 1) {
        const auto& lone = up.size() == 1 ? up : dn;
        const auto& rest = up.size() == 1 ? dn : up;
        const std::array<Vertex, 3> vs{vertex(lone[0], rest[0]), vertex(lone[0], rest[1]), vertex(lone[0], rest[2])};
        emit(vs);
      } else {
        const Vertex q0 = vertex(up[0], dn[0]), q1 = vertex(up[0], dn[1]);
        const Vertex q2 = vertex(up[1], dn[1]), q3 = vertex(up[1], dn[0]);
        emit(std::array<Vertex, 3>{q0, q1, q2});
        emit(std::array<Vertex, 3>{q0, q2, q3});
      }
    }
  });
  if (s.facets.empty()) throw AnalysisError("extract_level: level " + fmt(t) + " is empty");
  return s;
}

double level_weight(int n, int k, double t) {
  switch (classify_regime(n, k)) {
    case Regime::Critical: return std::exp(t);
    case Regime::Above: return std::pow(t, (n - k) / (2.0 * k - n));
    case Regime::Below: return std::pow(-t, (n - k) / (2.0 * k - n));
  }
  return kNaN;
}

double compute_I(const LevelSurface& s, double b) {
  const int k = s.k;
  const double a = b - k + 1.0;
  const double ga = a == 0.0 ? 1.0 : std::pow(level_weight(s.dim, k, s.level), a);
  double sum = 0.0;
  for (const LevelFacet& f : s.facets) sum += f.area * std::pow(f.grad_norm, b + 1.0) * f.H[k - 1];
  return ga * sum;
}

std::vector<double> level_ladder(const GridFunction& u, int count, double margin_fraction) {
  if (count < 2) throw ConfigError("level_ladder: need at least 2 levels");
  const LevelRange range = safe_level_range(u);
  const double width = range.hi - range.lo;
  if (!(width > 0.0)) throw AnalysisError("level_ladder: no level fits between the boundary cells");
  const double lo = range.lo + margin_fraction * width, hi = range.hi - margin_fraction * width;
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) {
    const double f = static_cast<double>(i) / (count - 1);
    if (lo > 0.0)
      t[i] = lo * std::pow(hi / lo, f);
    else if (hi < 0.0)
      t[i] = -((-hi) * std::pow(lo / hi, 1.0 - f));
    else
      t[i] = lo + f * (hi - lo);
  }
  return t;
}

double c_nk(int n, int k) {
  if (k >= n) throw ConfigError("c_{n,k} needs k < n");
  return k * (n - k - 1.0) / (n - k);
}

MonotonicityScan monotonicity_scan(const GridFunction& u, const NodeDerivatives& d, int k, double epsilon,
                                   std::span<const double> levels, double b) {
  const int n = u.grid->dim();
  const Regime regime = classify_regime(n, k);
  if (levels.size() < 3) throw ConfigError("monotonicity_scan: needs at least 3 levels");
  for (size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw ConfigError("monotonicity_scan: levels must increase strictly");
  for (double t : levels) {
    const bool ok = regime == Regime::Above ? (t > 0.0 && t <= 1.0) : regime == Regime::Critical ? t <= 0.0 : t <= -1.0;
    if (!ok) throw ConfigError("monotonicity_scan: level " + fmt(t) + " outside the regime range");
  }
  const double cnk = c_nk(n, k);
  if (b < cnk - 1e-12) throw ConfigError("monotonicity_scan: b = " + fmt(b) + " below c_{n,k} = " + fmt(cnk));

  MonotonicityScan s;
  s.epsilon = epsilon;
  s.b = b;
  s.a = b - k + 1.0;
  s.a_zero = s.a == 0.0;
  s.a0 = regime == Regime::Above ? 2.0 * (2 * k - n) / (n - k) : regime == Regime::Critical ? 0.0 : -2.0 * (n - 2 * k) / (n - k);
  s.levels.assign(levels.begin(), levels.end());
  for (double t : levels) {
    const LevelSurface surf = extract_level(u, d, k, t);
    s.I.push_back(compute_I(surf, b));
    s.area.push_back(surf.area());
    for (const LevelFacet& f : surf.facets)
      if (!std::isnan(f.m_defect)) s.max_m_defect = std::max(s.max_m_defect, f.m_defect);
  }
  const size_t N = levels.size();
  s.dI.assign(N, kNaN);
  for (size_t i = 1; i + 1 < N; ++i) {
    const double h1 = levels[i] - levels[i - 1], h2 = levels[i + 1] - levels[i];
    s.dI[i] = (h1 * h1 * (s.I[i + 1] - s.I[i]) + h2 * h2 * (s.I[i] - s.I[i - 1])) / (h1 * h2 * (h1 + h2));
  }
  if (regime == Regime::Below) {
    s.branch = "data";
    s.c_fit = kNaN;
    s.slack = kNaN;
    return s;
  }
  s.branch = s.a >= 0.0 ? "lower" : "upper";
  double c = 0.0;
  for (size_t i = 1; i + 1 < N; ++i) {
    const double t = levels[i];
    const double rate = regime == Regime::Above ? std::pow(t, n * k / (2.0 * k - n) - 1.0) : std::exp(n * t);
    const double excess = s.a >= 0.0 ? -s.dI[i] : s.dI[i];
    c = std::max(c, excess / (epsilon * rate));
  }
  s.c_fit = c;
  s.slack = c * epsilon;
  return s;
}

double expected_area_exponent(int n, int k) {
  switch (classify_regime(n, k)) {
    case Regime::Above: return k * (n - 1.0) / (2.0 * k - n);
    case Regime::Critical: return n - 1.0;
    case Regime::Below: break;
  }
  throw ConfigError("area exponent is only defined for k >= n/2");
}

double fit_area_exponent(std::span<const double> levels, std::span<const double> areas, int n, int k) {
  const Regime regime = classify_regime(n, k);
  if (regime == Regime::Below) throw ConfigError("area exponent is only defined for k >= n/2");
  if (levels.size() != areas.size() || levels.size() < 2) throw ConfigError("fit_area_exponent: need >= 2 samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double N = static_cast<double>(levels.size());
  for (size_t i = 0; i < levels.size(); ++i) {
    const double x = regime == Regime::Above ? std::log(levels[i]) : levels[i];
    const double y = std::log(areas[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (N * sxy - sx * sy) / (N * sxx - sx * sx);
}

double inequality_factor(int n, int k) {
  switch (classify_regime(n, k)) {
    case Regime::Critical: return 1.0;
    case Regime::Above:
      if (k < n) return (2.0 * k - n) / (n - k);
      break;
    case Regime::Below: break;
  }
  throw ConfigError("boundary inequality needs n/2 <= k < n");
}

InequalityRecord boundary_inequality(const NodeDerivatives& d, int k, double b, int resolution) {
  const AnnularGrid& g = *d.grid;
  const DomainSpec& dom = g.domain();
  const int n = g.dim();
  InequalityRecord rec;
  rec.b = b;
  rec.factor = inequality_factor(n, k);
  if (b < c_nk(n, k) - 1e-12) throw ConfigError("boundary_inequality: b below c_{n,k}");
  if (resolution <= 0) resolution = n == 2 ? 720 : 64;
  const SphereQuadrature q = sphere_quadrature(n, resolution);
  double lhs = 0.0, rhs = 0.0, worst_rel = 0.0;
  for (size_t i = 0; i < q.directions.size(); ++i) {
    const BoundaryPoint bp = dom.boundary_geometry(q.directions[i]);
    const BoundaryGradient bg = boundary_gradient(d, bp.x, bp.normal);
    const std::vector<double> kap = principal_curvatures(dom, q.directions[i]);
    const double hkm1 = elem_sym(kap, k - 1), hk = elem_sym(kap, k);
    const double du = std::abs(bg.normal_derivative);
    const double w = q.weights[i] * bp.area_factor;
    lhs += w * std::pow(du, b + 1.0) * hkm1;
    rhs += w * std::pow(du, b) * hk;
    worst_rel = std::max(worst_rel, std::abs(bg.normal_derivative - bg.alt_normal_derivative) / du);
  }
  rec.lhs = lhs;
  rec.rhs = rhs;
  rec.margin = lhs - rec.factor * rhs;
  rec.grad_error = worst_rel;
  rec.tolerance = 3.0 * worst_rel * std::abs(rhs);
  rec.pass = rec.margin >= -rec.tolerance;
  rec.points = static_cast<int>(q.directions.size());
  return rec;
}

InequalityRecord radial_inequality(const RadialProfileSolution& sol, double b) {
  const int n = sol.n, k = sol.k;
  InequalityRecord rec;
  rec.b = b;
  rec.factor = inequality_factor(n, k);
  const double R = sol.R;
  const double du = sol.dphi(R);
  const double area = unit_sphere_area(n) * std::pow(R, n - 1);
  rec.lhs = area * std::pow(du, b + 1.0) * binomial(n - 1, k - 1) * std::pow(R, 1.0 - k);
  rec.rhs = area * std::pow(du, b) * binomial(n - 1, k) * std::pow(R, -static_cast<double>(k));
  rec.margin = rec.lhs - rec.factor * rec.rhs;
  rec.pass = rec.margin >= 0.0;
  return rec;
}

CurvatureComparison compare_boundary_curvature(const NodeDerivatives& d, int resolution) {
  const AnnularGrid& g = *d.grid;
  const DomainSpec& dom = g.domain();
  const int n = g.dim();
  if (resolution <= 0) resolution = n == 2 ? 360 : 32;
  const SphereQuadrature q = sphere_quadrature(n, resolution);
  std::vector<double> num(n, 0.0), den(n, 0.0);
  for (const Point& dir : q.directions) {
    const BoundaryPoint bp = dom.boundary_geometry(dir);
    const BoundaryGradient bg = boundary_gradient(d, bp.x, bp.normal);
    const std::vector<double> kap = principal_curvatures(dom, dir);
    for (int m = 2; m <= n; ++m) {
      const double fd = level_curvature(bg.grad, bg.hess, m);
      const double ex = elem_sym(kap, m - 1);
      num[m - 1] += (fd - ex) * (fd - ex);
      den[m - 1] += ex * ex;
    }
  }
  CurvatureComparison c;
  c.points = static_cast<int>(q.directions.size());
  for (int m = 2; m <= n; ++m) {
    c.rms_relative.push_back(std::sqrt(num[m - 1] / den[m - 1]));
    c.worst = std::max(c.worst, c.rms_relative.back());
  }
  return c;
}

}  // namespace khess
