#include "khess/barriers.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>

#include "khess/parallel.hpp"

namespace khess {

Regime classify_regime(int n, int k) {
  if (n < 2 || k < 1 || k > n) throw ConfigError("regime: need n >= 2 and 1 <= k <= n");
  if (2 * k > n) return Regime::Above;
  if (2 * k == n) return Regime::Critical;
  return Regime::Below;
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Above: return "above";
    case Regime::Critical: return "critical";
    case Regime::Below: return "below";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  if (s == "above") return Regime::Above;
  if (s == "critical") return Regime::Critical;
  if (s == "below") return Regime::Below;
  throw ConfigError("unknown regime '" + s + "' (expected above, critical or below)");
}

double homogeneity_exponent(int n, int k) { return 2.0 - static_cast<double>(n) / k; }

double fundamental_solution(int n, int k, double radius) {
  if (!(radius > 0.0)) throw std::domain_error("fundamental_solution: pole at x = 0");
  const double p = homogeneity_exponent(n, k);
  switch (classify_regime(n, k)) {
    case Regime::Above: return std::pow(radius, p);
    case Regime::Critical: return std::log(radius);
    case Regime::Below: return -std::pow(radius, p);
  }
  return 0.0;
}

double fundamental_solution(int n, int k, std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return fundamental_solution(n, k, std::sqrt(s));
}

LocalJet radial_jet(int dim, const Point& x, double f, double df, double d2f) {
  LocalJet j;
  j.v = f;
  j.hess = SymMatrix(dim);
  const double rho = norm(x);
  Point u{x[0] / rho, x[1] / rho, x[2] / rho};
  for (int a = 0; a < dim; ++a) j.grad[a] = df * u[a];
  const double t = df / rho;
  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) j.hess.set(a, b, (d2f - t) * u[a] * u[b] + (a == b ? t : 0.0));
  return j;
}

RadialValue w_radial(int n, int k, double rho, double R0, double tau0) {
  if (!(rho > 0.0)) throw std::domain_error("w_profile: pole at x = 0");
  const double p = homogeneity_exponent(n, k);
  const double iR2 = 1.0 / (R0 * R0);
  switch (classify_regime(n, k)) {
    case Regime::Above: {
      const double c = 0.5 * std::pow(R0, -p);
      return {c * std::pow(rho, p) + 0.5 * rho * rho * iR2, c * p * std::pow(rho, p - 1.0) + rho * iR2,
              c * p * (p - 1.0) * std::pow(rho, p - 2.0) + iR2};
    }
    case Regime::Below: {
      const double a0 = (std::pow(1.0 - tau0, p) - 1.0) * std::pow(R0, p);
      return {-std::pow(rho, p) + std::pow(R0, p) - 1.0 + 0.5 * a0 * rho * rho * iR2,
              -p * std::pow(rho, p - 1.0) + a0 * rho * iR2, -p * (p - 1.0) * std::pow(rho, p - 2.0) + a0 * iR2};
    }
    case Regime::Critical: {
      const double a0 = 0.5 * std::log(1.0 / (1.0 - tau0));
      return {std::log(rho / R0) + 0.5 * a0 * rho * rho * iR2, 1.0 / rho + a0 * rho * iR2,
              -1.0 / (rho * rho) + a0 * iR2};
    }
  }
  return {0, 0, 0};
}

namespace {

// -D^2 d at distance `d` from the foot point with shape operator `shape`.
SymMatrix distance_hessian_neg(const SymMatrix& shape, double d) {
  const int n = shape.dim();
  const EigenSystem es = eigensystem(shape);
  SymMatrix out(n);
  for (int j = 0; j < n; ++j) {
    const double kap = es.values[j];
    const double c = kap / (1.0 - d * kap);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) out.set(a, b, out(a, b) + c * es.vectors[a * n + j] * es.vectors[b * n + j]);
  }
  return out;
}

LocalJet phi0_jet_at(const DomainSpec& domain, double t0, const Projection& pr) {
  const int n = domain.dim();
  const BoundaryPoint bp = domain.boundary_geometry(pr.direction);
  const double d = pr.distance;
  const double e = std::exp(-t0 * d);
  LocalJet j;
  j.v = (e - 1.0) / t0;
  for (int a = 0; a < n; ++a) j.grad[a] = e * bp.normal[a];
  const SymMatrix nd2 = distance_hessian_neg(bp.shape, d);
  j.hess = SymMatrix(n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) j.hess.set(a, b, e * (t0 * bp.normal[a] * bp.normal[b] + nd2(a, b)));
  return j;
}

// One-kernel smoothed positive part and its first two derivatives.
GlueWeights psi1(double y, double a) {
  if (y >= a) return {y, 1.0, 0.0};
  if (y <= -a) return {0.0, 0.0, 0.0};
  const double t = -y / a;
  const double t2 = t * t;
  const double anti = t - t * t2 + 0.6 * t * t2 * t2 - t * t2 * t2 * t2 / 7.0;
  const double tail = 0.5 - (35.0 / 32.0) * anti;
  const double om = 1.0 - t2;
  const double first_moment = (35.0 * a / 256.0) * om * om * om * om;
  return {y * tail + first_moment, tail, (35.0 / (32.0 * a)) * om * om * om};
}

double bump(double s, double a) {
  const double u = s / a;
  if (std::abs(u) >= 1.0) return 0.0;
  const double om = 1.0 - u * u;
  return (35.0 / (32.0 * a)) * om * om * om;
}

double shift_of(Regime r) {
  switch (r) {
    case Regime::Above: return 1.0;
    case Regime::Below: return -1.0;
    case Regime::Critical: return 0.0;
  }
  return 0.0;
}

// min S_k and Gamma_k membership of D^2 Phi0 over collar samples.
struct CollarScan {
  double min_sk;
  bool admissible;
};

CollarScan scan_collar(int k, const DomainSpec& domain, double t0,
                       const std::vector<std::vector<double>>& curvatures) {
  const int n = domain.dim();
  const double mu0 = domain.mu0();
  CollarScan out{std::numeric_limits<double>::infinity(), true};
  // Depths 0 .. 2 mu0 inclusive; S_k decays with depth, so the far edge
  // is where the minimum sits.
  constexpr int kDepths = 9;
  for (const auto& kappa : curvatures) {
    for (int j = 0; j <= kDepths; ++j) {
      const double d = 2.0 * mu0 * j / kDepths;
      const double e = std::exp(-t0 * d);
      std::array<double, kMaxDim> lam{};
      lam[0] = e * t0;
      for (int i = 0; i < n - 1; ++i) lam[i + 1] = e * kappa[i] / (1.0 - d * kappa[i]);
      const EigenSpectrum spec(std::span<const double>(lam.data(), n));
      out.min_sk = std::min(out.min_sk, elem_sym(spec, k));
      if (!in_gamma_k(spec, k)) out.admissible = false;
    }
  }
  return out;
}

}  // namespace

double phi0_profile(const DomainSpec& domain, double t0, const Point& x) {
  const double d = signed_distance(domain, x);
  if (!(d < 2.0 * domain.mu0())) throw std::domain_error("phi0_profile: point outside the collar d < 2 mu0");
  return (std::exp(-t0 * d) - 1.0) / t0;
}

LocalJet phi0_jet(const DomainSpec& domain, double t0, const Point& x) {
  const Projection pr = project_to_boundary(domain, x);
  if (!(pr.distance < 2.0 * domain.mu0())) throw std::domain_error("phi0_jet: point outside the collar d < 2 mu0");
  return phi0_jet_at(domain, t0, pr);
}

GlueWeights glue_psi(double z, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("glue_psi: delta must be positive");
  if (z >= 0.5 * delta) return {z, 1.0, 0.0};
  if (z <= -0.5 * delta) return {0.0, 0.0, 0.0};
  const double a = 0.25 * delta;
  // Integrate psi1(z - s) against the bump over [-a, a], split where the
  // integrand changes polynomial piece; degree 14 is exact with 8 nodes.
  std::array<double, 4> cuts{-a, std::clamp(z - a, -a, a), std::clamp(z + a, -a, a), a};
  std::sort(cuts.begin(), cuts.end());
  GlueWeights acc{0.0, 0.0, 0.0};
  using Q = boost::math::quadrature::gauss<double, 8>;
  for (int i = 0; i < 3; ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    acc.psi += Q::integrate([&](double s) { return psi1(z - s, a).psi * bump(s, a); }, cuts[i], cuts[i + 1]);
    acc.dpsi += Q::integrate([&](double s) { return psi1(z - s, a).dpsi * bump(s, a); }, cuts[i], cuts[i + 1]);
    acc.d2psi += Q::integrate([&](double s) { return psi1(z - s, a).d2psi * bump(s, a); }, cuts[i], cuts[i + 1]);
  }
  return acc;
}

GridFunction smooth_max_glue(const GridFunction& h, const GridFunction& g, double delta) {
  GridFunction out(h.grid);
  for (size_t i = 0; i < h.values.size(); ++i) {
    const double hv = h.values[i];
    const double gv = g.values[i];
    if (std::isnan(gv)) {
      out.values[i] = hv;
      continue;
    }
    if (std::isnan(hv)) {
      out.values[i] = gv;
      continue;
    }
    const double z = hv - gv;
    if (z >= 0.5 * delta)
      out.values[i] = hv;
    else if (z <= -0.5 * delta)
      out.values[i] = gv;
    else
      out.values[i] = gv + glue_psi(z, delta).psi;
  }
  return out;
}

BarrierConstants barrier_constants(int k, const DomainSpec& domain) {
  const int n = domain.dim();
  const Regime regime = classify_regime(n, k);
  const double p = homogeneity_exponent(n, k);
  const double r0 = domain.r0(), R0 = domain.R0(), tau0 = domain.tau0();
  BarrierConstants c;
  c.mu0 = domain.mu0();

  const int per_angle = (n == 2) ? 360 : 48;
  std::vector<std::vector<double>> curvatures;
  for (const Point& u : domain.sample_directions(per_angle)) curvatures.push_back(principal_curvatures(domain, u));

  c.t0 = 1.0;
  CollarScan scan = scan_collar(k, domain, c.t0, curvatures);
  while (!(scan.admissible && scan.min_sk > 0.0) && c.t0 < 64.0) {
    c.t0 *= 2.0;
    scan = scan_collar(k, domain, c.t0, curvatures);
  }
  if (!(scan.admissible && scan.min_sk > 0.0))
    throw ConfigError("barriers: collar profile not strictly k-convex for t0 <= 64 (boundary not (k-1)-convex?)");
  c.eps0 = scan.min_sk;

  const double t0 = c.t0, mu0 = c.mu0;
  const double ck = binomial(n, k);
  double m0_rhs = 0.0;
  switch (regime) {
    case Regime::Above:
      c.a0 = 1.0;
      c.delta = 0.5 * std::pow(1.0 - tau0, p);
      c.K0 = 2.0 * t0 / (1.0 - std::exp(-mu0 * t0));
      m0_rhs = t0 * c.delta;
      c.eps1 = std::min(ck * std::pow(R0, -2.0 * k), std::pow(c.K0, k) * c.eps0);
      break;
    case Regime::Below:
      c.a0 = (std::pow(1.0 - tau0, p) - 1.0) * std::pow(R0, p);
      c.delta = 0.25 * c.a0;
      c.K0 = t0 * std::pow(r0, p) / (1.0 - std::exp(-t0 * mu0));
      m0_rhs = 2.0 * t0 * c.delta;
      c.eps1 = std::min(ck * std::pow(c.a0, k) * std::pow(R0, -2.0 * k), std::pow(c.K0, k) * c.eps0);
      break;
    case Regime::Critical:
      c.a0 = 0.5 * std::log(1.0 / (1.0 - tau0));
      c.delta = 0.25 * std::log(1.0 / (1.0 - tau0));
      c.K0 = 2.0 * t0 * std::log(R0 / r0) / (1.0 - std::exp(-mu0 * t0));
      m0_rhs = t0 * c.delta;
      c.eps1 = std::min(ck * std::pow(c.a0, n / 2) * std::pow(R0, -n), std::pow(c.K0, n / 2) * c.eps0);
      break;
  }
  // K0 (1 - exp(-t0 mu0 / M0)) = m0_rhs.
  const double ratio = m0_rhs / c.K0;
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("barriers: no root for M0 (t0*delta/K0 outside (0,1))");
  c.M0 = t0 * mu0 / (-std::log1p(-ratio));
  return c;
}

double outer_datum(Regime r) { return shift_of(r); }

double inner_datum(int n, int k, double r, const DomainSpec& domain) {
  return w_profile(n, k, r, domain.R0(), domain.tau0());
}

double supersolution_value(int n, int k, double rho, double r0) {
  const double p = homogeneity_exponent(n, k);
  switch (classify_regime(n, k)) {
    case Regime::Above: return std::pow(rho / r0, p);
    case Regime::Below: return -std::pow(rho, p) + std::pow(r0, p) - 1.0;
    case Regime::Critical: return std::log(rho) - std::log(r0);
  }
  return 0.0;
}

namespace {

struct NodeGlue {
  LocalJet jet;
  double g = std::numeric_limits<double>::quiet_NaN();
  double z = std::numeric_limits<double>::quiet_NaN();
  double d = std::numeric_limits<double>::infinity();
};

NodeGlue glue_at(int k, const DomainSpec& domain, const BarrierConstants& c, const Point& x) {
  const int n = domain.dim();
  const RadialValue wr = w_radial(n, k, norm(x), domain.R0(), domain.tau0());
  NodeGlue out;
  out.jet = radial_jet(n, x, wr.f, wr.df, wr.d2f);
  // d >= rho_min - |x|, so deep points never need a projection.
  if (domain.rho_min() - norm(x) >= 2.0 * c.mu0) return out;
  const Projection pr = project_to_boundary(domain, x);
  out.d = pr.distance;
  if (!(pr.distance < 2.0 * c.mu0)) return out;
  LocalJet g = phi0_jet_at(domain, c.t0, pr);
  const double shift = shift_of(classify_regime(n, k));
  g.v = c.K0 * g.v + shift;
  for (int a = 0; a < n; ++a) g.grad[a] *= c.K0;
  g.hess = g.hess * c.K0;
  out.g = g.v;
  out.z = out.jet.v - g.v;
  const GlueWeights gw = glue_psi(out.z, c.delta);
  if (out.z >= 0.5 * c.delta) return out;
  if (out.z <= -0.5 * c.delta) {
    out.jet = g;
    return out;
  }
  LocalJet hj;
  hj.v = g.v + gw.psi;
  Point dz{};
  for (int a = 0; a < n; ++a) {
    dz[a] = out.jet.grad[a] - g.grad[a];
    hj.grad[a] = g.grad[a] + gw.dpsi * dz[a];
  }
  hj.hess = SymMatrix(n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      hj.hess.set(a, b, gw.dpsi * out.jet.hess(a, b) + (1.0 - gw.dpsi) * g.hess(a, b) + gw.d2psi * dz[a] * dz[b]);
  out.jet = hj;
  return out;
}

}  // namespace

LocalJet subsolution_jet(int k, const DomainSpec& domain, const BarrierConstants& c, const Point& x) {
  return glue_at(k, domain, c, x).jet;
}

GridFunction build_supersolution(int k, const GridPtr& grid) {
  const int n = grid->dim();
  const double r0 = grid->domain().r0();
  return sample(grid, [&](const Point& x) { return supersolution_value(n, k, norm(x), r0); });
}

BarrierSet build_subsolution(int k, const GridPtr& grid) {
  const DomainSpec& domain = grid->domain();
  const int n = domain.dim();
  BarrierSet bs;
  bs.regime = classify_regime(n, k);
  bs.n = n;
  bs.k = k;
  bs.constants = barrier_constants(k, domain);
  const BarrierConstants& c = bs.constants;
  bs.outer_value = outer_datum(bs.regime);
  bs.inner_value = inner_datum(n, k, grid->r(), domain);

  const std::int64_t N = grid->size();
  std::vector<NodeGlue> glue(N);
  parallel_for(N, [&](std::int64_t i) {
    const Node& nd = grid->node(i);
    if (nd.cls != NodeClass::Exterior) glue[i] = glue_at(k, domain, c, nd.x);
  });

  bs.w = GridFunction(grid);
  bs.phi0 = GridFunction(grid);
  bs.subsolution = GridFunction(grid);
  BarrierCertificate& cert = bs.certificate;
  for (std::int64_t i = 0; i < N; ++i) {
    const Node& nd = grid->node(i);
    if (nd.cls == NodeClass::Exterior) continue;
    const NodeGlue& ng = glue[i];
    bs.w[i] = w_profile(n, k, norm(nd.x), domain.R0(), domain.tau0());
    bs.phi0[i] = ng.g;
    bs.subsolution[i] = ng.jet.v;
    if (!std::isnan(ng.z) && std::abs(ng.z) < 0.5 * c.delta) {
      ++cert.band_nodes;
      if (ng.d >= c.mu0) cert.band_inside_collar = false;
    }
    if (ng.d >= c.mu0 && ng.d < 2.0 * c.mu0 && ng.z < 0.5 * c.delta) cert.band_inside_collar = false;
    if (nd.cls == NodeClass::OuterBoundary) {
      // On the boundary the glue must already equal g, whose value is the datum.
      if (!(ng.z <= -0.5 * c.delta)) cert.glue_identities = false;
      bs.subsolution[i] = bs.outer_value;
    } else if (nd.cls == NodeClass::InnerBoundary) {
      if (!std::isnan(ng.z) && ng.z < 0.5 * c.delta) cert.glue_identities = false;
      bs.subsolution[i] = bs.inner_value;
    }
  }
  // Exact identities off the band, checked against the grid-level glue.
  const GridFunction reglued = smooth_max_glue(bs.w, bs.phi0, c.delta);
  for (std::int64_t i = 0; i < N; ++i) {
    const Node& nd = grid->node(i);
    if (nd.cls != NodeClass::Interior) continue;
    const double z = glue[i].z;
    if (std::isnan(z) || z >= 0.5 * c.delta) {
      if (reglued[i] != bs.w[i] || bs.subsolution[i] != bs.w[i]) cert.glue_identities = false;
    } else if (z <= -0.5 * c.delta) {
      if (reglued[i] != bs.phi0[i] || bs.subsolution[i] != bs.phi0[i]) cert.glue_identities = false;
    }
  }

  bs.supersolution = build_supersolution(k, grid);

  const auto& interior = grid->interior();
  std::vector<double> sk_exact(interior.size()), sk_fd(interior.size()), gam_fd(interior.size());
  parallel_for(static_cast<std::int64_t>(interior.size()), [&](std::int64_t q) {
    const std::int32_t i = interior[q];
    sk_exact[q] = sk(glue[i].jet.hess, k);
    const EigenSpectrum ev = eigenvalues(fd_hessian(bs.subsolution, static_cast<std::int32_t>(q)));
    sk_fd[q] = elem_sym(ev, k);
    gam_fd[q] = gamma_margin(ev, k);
  });
  cert.min_sk_exact = cert.min_sk_fd = cert.min_gamma_fd = std::numeric_limits<double>::infinity();
  for (size_t q = 0; q < interior.size(); ++q) {
    cert.min_sk_exact = std::min(cert.min_sk_exact, sk_exact[q]);
    cert.min_sk_fd = std::min(cert.min_sk_fd, sk_fd[q]);
    cert.min_gamma_fd = std::min(cert.min_gamma_fd, gam_fd[q]);
    if (!(gam_fd[q] > kGammaFloor)) ++cert.fd_inadmissible;
  }
  cert.ordering_margin = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < N; ++i)
    if (grid->node(i).cls != NodeClass::Exterior)
      cert.ordering_margin = std::min(cert.ordering_margin, bs.supersolution[i] - bs.subsolution[i]);
  return bs;
}

}  // namespace khess
