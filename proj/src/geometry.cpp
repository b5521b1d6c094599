#include "khess/geometry.hpp"

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/tools/minima.hpp>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace khess {

namespace {

using std::numbers::pi;

struct BallImpl {
  double R;
  template <class T>
  T eval(const std::array<T, 3>&) const { return T(R); }
  bool is_sphere() const { return true; }
  std::string describe() const { return "ball(R=" + std::to_string(R) + ")"; }
};

struct EllipsoidImpl {
  std::vector<double> axes;
  template <class T>
  T eval(const std::array<T, 3>& x) const {
    using std::sqrt;
    T r2 = x[0] * x[0];
    T q = x[0] * x[0] * (1.0 / (axes[0] * axes[0]));
    for (size_t a = 1; a < axes.size(); ++a) {
      r2 = r2 + x[a] * x[a];
      q = q + x[a] * x[a] * (1.0 / (axes[a] * axes[a]));
    }
    return sqrt(r2 / q);
  }
  bool is_sphere() const {
    return std::all_of(axes.begin(), axes.end(), [&](double a) { return a == axes[0]; });
  }
  std::string describe() const {
    std::ostringstream s;
    s << "ellipsoid(";
    for (size_t a = 0; a < axes.size(); ++a) s << (a ? "," : "") << axes[a];
    s << ")";
    return s.str();
  }
};

struct StarImpl {
  double base;
  double alpha;
  int m;
  template <class T>
  T eval(const std::array<T, 3>& x) const {
    using std::pow;
    // Re((x0 + i x1)^m) by repeated complex multiplication.
    T re(1.0), im(0.0);
    for (int i = 0; i < m; ++i) {
      T nre = re * x[0] - im * x[1];
      T nim = re * x[1] + im * x[0];
      re = nre;
      im = nim;
    }
    T r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return T(base) + T(base * alpha) * re / pow(r2, 0.5 * m);
  }
  bool is_sphere() const { return alpha == 0.0; }
  std::string describe() const {
    std::ostringstream s;
    s << "star(base=" << base << ",alpha=" << alpha << ",m=" << m << ")";
    return s.str();
  }
};

std::string fmt_point(const Point& p, int dim) {
  std::ostringstream s;
  s << "(";
  for (int a = 0; a < dim; ++a) s << (a ? ", " : "") << p[a];
  s << ")";
  return s.str();
}

Point normalized(const Point& p) {
  const double r = norm(p);
  return {p[0] / r, p[1] / r, p[2] / r};
}

}  // namespace

std::shared_ptr<const RadialProfile> make_ball_profile(double radius) {
  if (!(radius > 0.0)) throw ConfigError("ball radius must be positive");
  return std::make_shared<TemplatedProfile<BallImpl>>(BallImpl{radius});
}

std::shared_ptr<const RadialProfile> make_ellipsoid_profile(std::vector<double> semi_axes) {
  if (semi_axes.empty() || semi_axes.size() > 3) throw ConfigError("ellipsoid needs 1..3 semi-axes");
  for (double a : semi_axes)
    if (!(a > 0.0)) throw ConfigError("ellipsoid semi-axes must be positive");
  return std::make_shared<TemplatedProfile<EllipsoidImpl>>(EllipsoidImpl{std::move(semi_axes)});
}

std::shared_ptr<const RadialProfile> make_star_profile(double base, double alpha, int m) {
  if (!(base > 0.0) || m < 0) throw ConfigError("star profile needs base > 0 and m >= 0");
  return std::make_shared<TemplatedProfile<StarImpl>>(StarImpl{base, alpha, m});
}

Point DomainSpec::boundary_point(const Point& direction) const {
  const Point u = normalized(direction);
  return profile_->radius(u) * u;
}

BoundaryPoint DomainSpec::boundary_geometry(const Point& direction) const {
  const Point u = normalized(direction);
  const double rho = profile_->radius(u);
  BoundaryPoint bp;
  bp.x = rho * u;

  std::array<Jet, 3> xj{Jet(bp.x[0]), Jet(bp.x[1]), Jet(bp.x[2])};
  for (int a = 0; a < dim_; ++a) xj[a] = Jet::variable(bp.x[a], a);
  Jet r2 = xj[0] * xj[0];
  for (int a = 1; a < dim_; ++a) r2 += xj[a] * xj[a];
  const Jet level = sqrt(r2) - profile_->radius(xj);

  double gnorm = 0.0;
  for (int a = 0; a < dim_; ++a) gnorm += level.g[a] * level.g[a];
  gnorm = std::sqrt(gnorm);
  for (int a = 0; a < dim_; ++a) bp.normal[a] = level.g[a] / gnorm;

  // P D^2F P / |DF| with P = I - nu nu^T.
  SymMatrix d2(dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = a; b < dim_; ++b) d2.set(a, b, level.hess(a, b));
  SymMatrix proj(dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = a; b < dim_; ++b) proj.set(a, b, (a == b ? 1.0 : 0.0) - bp.normal[a] * bp.normal[b]);
  SymMatrix shape(dim_);
  for (int a = 0; a < dim_; ++a) {
    for (int b = a; b < dim_; ++b) {
      double s = 0.0;
      for (int c = 0; c < dim_; ++c)
        for (int d = 0; d < dim_; ++d) s += proj(a, c) * d2(c, d) * proj(d, b);
      shape.set(a, b, s / gnorm);
    }
  }
  bp.shape = shape;
  bp.area_factor = std::pow(rho, dim_ - 1) / dot(u, bp.normal);
  return bp;
}

bool DomainSpec::contains(const Point& x) const {
  const double r = norm(x);
  if (r == 0.0) return true;
  return r < profile_->radius(x);
}

double DomainSpec::level(const Point& x) const {
  const double r = norm(x);
  if (r == 0.0) return -profile_->radius(Point{1.0, 0.0, 0.0});
  return r - profile_->radius(x);
}

std::vector<Point> DomainSpec::sample_directions(int per_angle) const {
  std::vector<Point> out;
  if (dim_ == 2) {
    out.reserve(per_angle);
    for (int i = 0; i < per_angle; ++i) {
      const double t = 2.0 * pi * i / per_angle;
      out.push_back({std::cos(t), std::sin(t), 0.0});
    }
  } else {
    out.reserve(static_cast<size_t>(per_angle) * per_angle);
    for (int i = 0; i < per_angle; ++i) {
      const double th = pi * (i + 0.5) / per_angle;
      for (int j = 0; j < per_angle; ++j) {
        const double ph = 2.0 * pi * j / per_angle;
        out.push_back({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
      }
    }
  }
  return out;
}

std::vector<double> principal_curvatures(const DomainSpec& domain, const Point& direction) {
  const BoundaryPoint bp = domain.boundary_geometry(direction);
  const int n = domain.dim();
  const EigenSystem es = eigensystem(bp.shape);
  // Drop the eigenvector most aligned with the normal (eigenvalue ~ 0).
  int drop = 0;
  double best = -1.0;
  for (int j = 0; j < n; ++j) {
    double c = 0.0;
    for (int a = 0; a < n; ++a) c += es.vectors[a * n + j] * bp.normal[a];
    if (std::abs(c) > best) {
      best = std::abs(c);
      drop = j;
    }
  }
  std::vector<double> kappa;
  for (int j = 0; j < n; ++j)
    if (j != drop) kappa.push_back(es.values[j]);
  return kappa;
}

double boundary_curvature(const DomainSpec& domain, const Point& direction, int m) {
  const int n = domain.dim();
  if (m < 0 || m > n - 1) throw std::domain_error("boundary_curvature: m outside 0..n-1");
  if (m == 0) return 1.0;
  const auto kappa = principal_curvatures(domain, direction);
  return elem_sym(std::span<const double>(kappa), m);
}

DomainSpec build_domain(const DomainParams& p) {
  if (p.dim != 2 && p.dim != 3) throw ConfigError("domain dimension must be 2 or 3 (n=4 is radial-only)");
  if (!p.profile) throw ConfigError("domain has no radial profile");
  if (!(p.tau0 > 0.0 && p.tau0 < 0.5)) throw ConfigError("certificate violated: 0 < tau0 < 1/2");
  if (!(p.r0 > 0.0) || !(p.R0 > 0.0)) throw ConfigError("certificate violated: r0 > 0 and R0 > 0");

  DomainSpec d;
  d.dim_ = p.dim;
  d.profile_ = p.profile;
  d.r0_ = p.r0;
  d.R0_ = p.R0;
  d.tau0_ = p.tau0;

  const int per_angle = (p.dim == 2) ? 720 : 360;
  const auto dirs = d.sample_directions(per_angle);
  const double outer_cap = (1.0 - p.tau0) * p.R0;
  d.rho_min_ = std::numeric_limits<double>::infinity();
  d.rho_max_ = 0.0;
  d.min_x_dot_nu_ = std::numeric_limits<double>::infinity();
  d.kappa_min_ = std::numeric_limits<double>::infinity();
  d.kappa_max_ = -std::numeric_limits<double>::infinity();
  d.min_h_.fill(std::numeric_limits<double>::infinity());
  d.min_h_[0] = 1.0;

  for (const Point& u : dirs) {
    const double rho = p.profile->radius(u);
    if (!(rho > p.r0)) {
      throw ConfigError("certificate violated: rho(theta) > r0 fails (rho=" + std::to_string(rho) +
                        ", r0=" + std::to_string(p.r0) + ") at direction " + fmt_point(u, p.dim));
    }
    if (!(rho < outer_cap)) {
      throw ConfigError("certificate violated: rho(theta) < (1-tau0)R0 fails (rho=" + std::to_string(rho) +
                        ", cap=" + std::to_string(outer_cap) + ") at direction " + fmt_point(u, p.dim));
    }
    d.rho_min_ = std::min(d.rho_min_, rho);
    d.rho_max_ = std::max(d.rho_max_, rho);
  }

  // Curvature certificates are sampled more coarsely in 3D; the profile
  // extrema above use the full set.
  const auto curv_dirs = (p.dim == 2) ? dirs : d.sample_directions(180);
  for (const Point& u : curv_dirs) {
    const BoundaryPoint bp = d.boundary_geometry(u);
    const double xnu = dot(bp.x, bp.normal);
    if (!(xnu > 0.0)) {
      throw ConfigError("certificate violated: starshapedness x.nu > 0 fails (x.nu=" + std::to_string(xnu) +
                        ") at direction " + fmt_point(u, p.dim));
    }
    d.min_x_dot_nu_ = std::min(d.min_x_dot_nu_, xnu);
    const auto kappa = principal_curvatures(d, u);
    for (double k : kappa) {
      d.kappa_min_ = std::min(d.kappa_min_, k);
      d.kappa_max_ = std::max(d.kappa_max_, k);
    }
    for (int m = 1; m <= p.dim - 1; ++m)
      d.min_h_[m] = std::min(d.min_h_[m], elem_sym(std::span<const double>(kappa), m));
  }
  d.convexity_ = (d.kappa_min_ > 0.0) ? ConvexityClass::ConvexAndStrictlyKm1Convex
                                      : ConvexityClass::StrictlyKm1Convex;

  // Collar: B_{r0} must sit inside {d > 2 mu0}, and d must stay smooth on
  // the collar (no focal points: 2 mu0 kappa_max < 1).
  double mu0 = std::min(p.r0 / 4.0, 0.49 * (d.rho_min_ - p.r0));
  if (d.kappa_max_ > 0.0) mu0 = std::min(mu0, 0.45 / d.kappa_max_);
  const int check_per_angle = (p.dim == 2) ? 360 : 48;
  const auto check_dirs = d.sample_directions(check_per_angle);
  for (int attempt = 0; attempt < 12; ++attempt) {
    d.mu0_ = mu0;
    bool ok = true;
    for (const Point& u : check_dirs) {
      const BoundaryPoint bp = d.boundary_geometry(u);
      const Point x = bp.x - (2.0 * mu0) * bp.normal;
      const double dist = signed_distance(d, x);
      if (std::abs(dist - 2.0 * mu0) > 1e-6 * (1.0 + mu0)) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    mu0 *= 0.5;
  }
  return d;
}

Projection project_to_boundary(const DomainSpec& domain, const Point& x) {
  Projection out;
  const double r = norm(x);
  if (domain.profile().is_sphere()) {
    const double R = domain.profile().radius(Point{1.0, 0.0, 0.0});
    out.direction = (r > 0.0) ? normalized(x) : Point{1.0, 0.0, 0.0};
    out.foot = R * out.direction;
    out.distance = R - r;
    return out;
  }

  auto dist2 = [&](const Point& u) {
    const Point y = domain.profile().radius(u) * u;
    const Point diff = x - y;
    return dot(diff, diff);
  };

  Point best_u{1.0, 0.0, 0.0};
  double best = std::numeric_limits<double>::infinity();
  constexpr int kBits = 40;

  if (domain.dim() == 2) {
    constexpr int kScan = 720;
    double best_t = 0.0;
    for (int i = 0; i < kScan; ++i) {
      const double t = 2.0 * pi * i / kScan;
      const double f = dist2(Point{std::cos(t), std::sin(t), 0.0});
      if (f < best) {
        best = f;
        best_t = t;
      }
    }
    const double dt = 2.0 * pi / kScan;
    auto f1 = [&](double t) { return dist2(Point{std::cos(t), std::sin(t), 0.0}); };
    const auto res = boost::math::tools::brent_find_minima(f1, best_t - dt, best_t + dt, kBits);
    best_u = {std::cos(res.first), std::sin(res.first), 0.0};
    best = res.second;
  } else {
    // Near the boundary the foot point is close to the radial direction;
    // deep points get a coarse global scan first.
    Point u0{0.0, 0.0, 1.0};
    double span = 0.5;
    if (r >= 0.5 * domain.rho_min()) {
      u0 = normalized(x);
    } else {
      for (int i = 0; i < 24; ++i) {
        const double th = pi * (i + 0.5) / 24;
        for (int j = 0; j < 48; ++j) {
          const double ph = 2.0 * pi * j / 48;
          const Point u{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
          const double f = dist2(u);
          if (f < best) {
            best = f;
            u0 = u;
          }
        }
      }
      span = 0.2;
    }
    // Orthonormal tangent chart around u0.
    const Point helper = (std::abs(u0[0]) < 0.9) ? Point{1.0, 0.0, 0.0} : Point{0.0, 1.0, 0.0};
    Point t1 = helper - dot(helper, u0) * u0;
    t1 = normalized(t1);
    const Point t2{u0[1] * t1[2] - u0[2] * t1[1], u0[2] * t1[0] - u0[0] * t1[2], u0[0] * t1[1] - u0[1] * t1[0]};
    auto chart = [&](double a, double b) { return normalized(u0 + a * t1 + b * t2); };

    double a = 0.0, b = 0.0;
    best = dist2(u0);
    constexpr int kLocal = 7;
    for (int i = 0; i < kLocal; ++i) {
      for (int j = 0; j < kLocal; ++j) {
        const double aa = span * (2.0 * i / (kLocal - 1) - 1.0);
        const double bb = span * (2.0 * j / (kLocal - 1) - 1.0);
        const double f = dist2(chart(aa, bb));
        if (f < best) {
          best = f;
          a = aa;
          b = bb;
        }
      }
    }
    double step = span / (kLocal - 1);
    for (int cycle = 0; cycle < 40; ++cycle) {
      const double a_old = a, b_old = b;
      auto fa = [&](double s) { return dist2(chart(s, b)); };
      a = boost::math::tools::brent_find_minima(fa, a - step, a + step, kBits).first;
      auto fb = [&](double s) { return dist2(chart(a, s)); };
      const auto rb = boost::math::tools::brent_find_minima(fb, b - step, b + step, kBits);
      b = rb.first;
      best = rb.second;
      const double change = std::abs(a - a_old) + std::abs(b - b_old);
      if (change < 1e-11) break;
      step = std::max(2.0 * change, 1e-6);
    }
    best_u = chart(a, b);
  }

  out.direction = best_u;
  out.foot = domain.profile().radius(best_u) * best_u;
  const double dist = std::sqrt(best);
  out.distance = domain.contains(x) ? dist : -dist;
  return out;
}

double signed_distance(const DomainSpec& domain, const Point& x) { return project_to_boundary(domain, x).distance; }

double unit_sphere_area(int dim) {
  switch (dim) {
    case 2: return 2.0 * pi;
    case 3: return 4.0 * pi;
    case 4: return 2.0 * pi * pi;
    default: throw std::domain_error("unit_sphere_area: dim must be 2..4");
  }
}

SphereQuadrature sphere_quadrature(int dim, int resolution) {
  SphereQuadrature q;
  if (dim == 2) {
    for (int i = 0; i < resolution; ++i) {
      const double t = 2.0 * pi * i / resolution;
      q.directions.push_back({std::cos(t), std::sin(t), 0.0});
      q.weights.push_back(2.0 * pi / resolution);
    }
    return q;
  }
  if (dim != 3) throw std::domain_error("sphere_quadrature: dim must be 2 or 3");
  const int nz = std::max(2, resolution / 2);
  const auto pos = boost::math::legendre_p_zeros<double>(nz);
  std::vector<double> nodes;
  for (double z : pos) {
    nodes.push_back(z);
    if (z != 0.0) nodes.push_back(-z);
  }
  std::sort(nodes.begin(), nodes.end());
  for (double z : nodes) {
    const double dp = boost::math::legendre_p_prime(nz, z);
    const double wz = 2.0 / ((1.0 - z * z) * dp * dp);
    const double s = std::sqrt(1.0 - z * z);
    for (int j = 0; j < resolution; ++j) {
      const double ph = 2.0 * pi * j / resolution;
      q.directions.push_back({s * std::cos(ph), s * std::sin(ph), z});
      q.weights.push_back(wz * 2.0 * pi / resolution);
    }
  }
  return q;
}

}  // namespace khess
