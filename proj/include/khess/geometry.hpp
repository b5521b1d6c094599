#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "khess/jet.hpp"
#include "khess/symfunc.hpp"

namespace khess {

using Point = std::array<double, 3>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2]}; }

/// Raised when a domain or grid is built with inconsistent parameters.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Boundary radius as a 0-homogeneous function on R^n \ {0}: the domain is
/// {x : |x| < radius(x)}. Implementations must be smooth away from 0.
class RadialProfile {
public:
  virtual ~RadialProfile() = default;
  virtual double radius(const Point& x) const = 0;
  virtual Jet radius(const std::array<Jet, 3>& x) const = 0;
  /// Profiles that are exactly a centered sphere get closed-form distance.
  virtual bool is_sphere() const { return false; }
  virtual std::string describe() const = 0;
};

/// Adapts a profile written once as a template over the scalar type.
template <class Impl>
class TemplatedProfile : public RadialProfile {
public:
  explicit TemplatedProfile(Impl impl) : impl_(std::move(impl)) {}
  double radius(const Point& x) const override { return impl_.template eval<double>({x[0], x[1], x[2]}); }
  Jet radius(const std::array<Jet, 3>& x) const override { return impl_.template eval<Jet>(x); }
  bool is_sphere() const override { return impl_.is_sphere(); }
  std::string describe() const override { return impl_.describe(); }
  const Impl& impl() const { return impl_; }

private:
  Impl impl_;
};

std::shared_ptr<const RadialProfile> make_ball_profile(double radius);
std::shared_ptr<const RadialProfile> make_ellipsoid_profile(std::vector<double> semi_axes);
/// rho = base * (1 + alpha * Re((x1 + i x2)^m) / |x|^m); in 2D this is
/// base * (1 + alpha cos(m theta)).
std::shared_ptr<const RadialProfile> make_star_profile(double base, double alpha, int m);

enum class ConvexityClass { StrictlyKm1Convex, ConvexAndStrictlyKm1Convex };

/// Geometry of the boundary at one point.
struct BoundaryPoint {
  Point x{};
  Point normal{};  // outward unit normal of Omega
  /// Shape operator P D^2F P / |DF| in ambient coordinates (zero along normal).
  SymMatrix shape;
  /// Area element relative to the unit-sphere measure: rho^{n-1} / (xhat . nu).
  double area_factor = 0.0;
};

struct DomainParams {
  int dim = 2;
  std::shared_ptr<const RadialProfile> profile;
  double r0 = 0.5;
  double R0 = 2.0;
  double tau0 = 0.25;
};

/// Certified star-shaped domain: B_{r0} inside, Omega inside B_{(1-tau0)R0}.
class DomainSpec {
public:
  int dim() const { return dim_; }
  const RadialProfile& profile() const { return *profile_; }
  double r0() const { return r0_; }
  double R0() const { return R0_; }
  double tau0() const { return tau0_; }

  double rho_min() const { return rho_min_; }
  double rho_max() const { return rho_max_; }
  /// min over boundary samples of x . nu (the starshapedness certificate).
  double starshaped_margin() const { return min_x_dot_nu_; }
  double kappa_min() const { return kappa_min_; }
  double kappa_max() const { return kappa_max_; }
  /// min over boundary samples of H_m, m = 0..n-1.
  double min_curvature_sum(int m) const { return min_h_.at(m); }
  ConvexityClass convexity() const { return convexity_; }
  /// Collar half-width: d is smooth on {d < 2 mu0}.
  double mu0() const { return mu0_; }

  /// Direction -> boundary point rho(u) u.
  Point boundary_point(const Point& direction) const;
  BoundaryPoint boundary_geometry(const Point& direction) const;

  /// |x| < rho(x/|x|); the origin is inside.
  bool contains(const Point& x) const;
  /// |x| - rho(x/|x|), negative inside.
  double level(const Point& x) const;

  /// Boundary sample directions used for the certificates.
  std::vector<Point> sample_directions(int per_angle) const;

private:
  friend DomainSpec build_domain(const DomainParams& params);
  int dim_ = 2;
  std::shared_ptr<const RadialProfile> profile_;
  double r0_ = 0, R0_ = 0, tau0_ = 0;
  double rho_min_ = 0, rho_max_ = 0, min_x_dot_nu_ = 0, kappa_min_ = 0, kappa_max_ = 0;
  std::array<double, 4> min_h_{};
  ConvexityClass convexity_ = ConvexityClass::StrictlyKm1Convex;
  double mu0_ = 0.0;
};

/// Verifies r0 <= rho <= (1 - tau0) R0, starshapedness and 0 < tau0 < 1/2 on
/// at least 360 samples per angular dimension, then fixes mu0. Throws
/// ConfigError naming the violated inequality and a witness direction.
DomainSpec build_domain(const DomainParams& params);

/// Distance to the boundary, positive inside. Closed form on spheres,
/// otherwise projection by angular minimization.
double signed_distance(const DomainSpec& domain, const Point& x);

struct Projection {
  double distance = 0.0;  // signed, positive inside
  Point direction{};      // unit direction of the foot point
  Point foot{};
};
Projection project_to_boundary(const DomainSpec& domain, const Point& x);

/// H_m of the principal curvatures at the boundary point in `direction`.
/// H_0 = 1; throws std::domain_error unless 0 <= m <= n-1.
double boundary_curvature(const DomainSpec& domain, const Point& direction, int m);

/// Principal curvatures (ascending) at the boundary point in `direction`.
std::vector<double> principal_curvatures(const DomainSpec& domain, const Point& direction);

/// Quadrature over the unit sphere S^{n-1}: directions and weights summing
/// to |S^{n-1}|. n=2: uniform angles; n=3: Gauss-Legendre in cos(theta)
/// times uniform azimuth.
struct SphereQuadrature {
  std::vector<Point> directions;
  std::vector<double> weights;
};
SphereQuadrature sphere_quadrature(int dim, int resolution);

double unit_sphere_area(int dim);

}  // namespace khess
