#pragma once

#include <span>
#include <string>

#include "khess/geometry.hpp"
#include "khess/grid.hpp"
#include "khess/symfunc.hpp"

namespace khess {

/// Above: k > n/2, Critical: k = n/2, Below: k < n/2.
enum class Regime { Above, Critical, Below };

Regime classify_regime(int n, int k);
const char* to_string(Regime r);
/// Parses "above" / "critical" / "below".
Regime regime_from_string(const std::string& s);

/// 2 - n/k.
double homogeneity_exponent(int n, int k);

/// G_k(|x|): -|x|^p (k < n/2), log|x| (k = n/2), |x|^p (k > n/2), p = 2 - n/k.
/// Throws std::domain_error at the pole.
double fundamental_solution(int n, int k, double radius);
double fundamental_solution(int n, int k, std::span<const double> x);

/// Value, gradient and Hessian of a function at one point (first `dim`
/// components meaningful).
struct LocalJet {
  double v = 0.0;
  Point grad{};
  SymMatrix hess;
};

/// Jet of x -> f(|x|) from the radial derivatives f, f', f''.
LocalJet radial_jet(int dim, const Point& x, double f, double df, double d2f);

struct RadialValue {
  double f, df, d2f;
};

/// Outer profile w for the regime of (n, k), as a function of |x|.
RadialValue w_radial(int n, int k, double radius, double R0, double tau0);
inline double w_profile(int n, int k, double radius, double R0, double tau0) {
  return w_radial(n, k, radius, R0, tau0).f;
}

/// t0^{-1}(e^{-t0 d} - 1) with d the distance to the boundary. Throws
/// std::domain_error outside the collar {d < 2 mu0}.
double phi0_profile(const DomainSpec& domain, double t0, const Point& x);
LocalJet phi0_jet(const DomainSpec& domain, double t0, const Point& x);

/// Smoothed positive part Psi(z) = E[(z + s1 - s2)^+] with s1, s2 i.i.d.
/// from c(1 - (s/a)^2)^3 on [-a, a], a = delta/4. Psi(z) = z for
/// z >= delta/2 and 0 for z <= -delta/2, both exactly.
struct GlueWeights {
  double psi, dpsi, d2psi;
};
GlueWeights glue_psi(double z, double delta);

/// H = g + Psi(h - g): smooth maximum of h and g.
GridFunction smooth_max_glue(const GridFunction& h, const GridFunction& g, double delta);

struct BarrierConstants {
  double t0 = 1.0;
  double mu0 = 0.0;
  double K0 = 0.0;
  double M0 = 0.0;
  double a0 = 0.0;
  double delta = 0.0;
  double eps0 = 0.0;
  double eps1 = 0.0;
};

/// Solves for t0 (doubling from 1 up to 2^6) and the remaining constants.
/// Throws ConfigError when the collar profile is never strictly k-convex or
/// the M0 equation has no root.
BarrierConstants barrier_constants(int k, const DomainSpec& domain);

/// Boundary data of the approximating problem.
double outer_datum(Regime r);
double inner_datum(int n, int k, double r, const DomainSpec& domain);

double supersolution_value(int n, int k, double radius, double r0);

/// Analytic jet of the glued subsolution at x.
LocalJet subsolution_jet(int k, const DomainSpec& domain, const BarrierConstants& c, const Point& x);

struct BarrierCertificate {
  double min_sk_exact = 0.0;   // min S_k of the analytic Hessian over interior nodes
  double min_sk_fd = 0.0;      // same with the grid Hessian
  double min_gamma_fd = 0.0;   // min over nodes of min_j S_j (grid Hessian)
  std::int64_t fd_inadmissible = 0;
  bool glue_identities = true;  // H == h and H == g exactly off the band
  bool band_inside_collar = true;
  double ordering_margin = 0.0;  // min(super - sub) over non-exterior nodes
  std::int64_t band_nodes = 0;
};

struct BarrierSet {
  Regime regime = Regime::Above;
  int n = 0;
  int k = 0;
  BarrierConstants constants;
  double outer_value = 0.0;
  double inner_value = 0.0;
  GridFunction w;
  GridFunction phi0;  // g = K0 Phi0 + shift inside the collar, NaN elsewhere
  GridFunction subsolution;
  GridFunction supersolution;
  BarrierCertificate certificate;
};

BarrierSet build_subsolution(int k, const GridPtr& grid);
GridFunction build_supersolution(int k, const GridPtr& grid);

}  // namespace khess
