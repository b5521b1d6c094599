#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "khess/solver.hpp"

namespace khess {

namespace {

double radial_integral(const std::function<double(double)>& f, double a, double b) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-13);
}

double dfundamental(int n, int k, double rho, int order) {
  const double p = homogeneity_exponent(n, k);
  const double sign = (classify_regime(n, k) == Regime::Below) ? -1.0 : 1.0;
  if (classify_regime(n, k) == Regime::Critical) return order == 1 ? 1.0 / rho : -1.0 / (rho * rho);
  return order == 1 ? sign * p * std::pow(rho, p - 1.0) : sign * p * (p - 1.0) * std::pow(rho, p - 2.0);
}

}  // namespace

double RadialProfileSolution::dphi(double rho) const {
  if (closed_form_) return A_ * dfundamental(n, k, rho, 1);
  const double q = (K * std::pow(rho, n) + c) * std::pow(rho, k - n);
  return std::pow(std::max(q, 0.0), 1.0 / k);
}

double RadialProfileSolution::d2phi(double rho) const {
  if (closed_form_) return A_ * dfundamental(n, k, rho, 2);
  const double q = (K * std::pow(rho, n) + c) * std::pow(rho, k - n);
  const double dq = n * K * std::pow(rho, k - 1) + (K * std::pow(rho, n) + c) * (k - n) * std::pow(rho, k - n - 1);
  return std::pow(q, 1.0 / k - 1.0) * dq / k;
}

double RadialProfileSolution::phi(double rho) const {
  if (closed_form_) return A_ * fundamental_solution(n, k, rho) + B_;
  return inner_value + radial_integral([this](double s) { return dphi(s); }, r, rho);
}

double RadialProfileSolution::residual(double rho) const {
  const double t = dphi(rho) / rho;
  const double sk_val = binomial(n - 1, k - 1) * d2phi(rho) * std::pow(t, k - 1) + binomial(n - 1, k) * std::pow(t, k);
  return sk_val - epsilon;
}

RadialProfileSolution radial_oracle(int n, int k, double epsilon, double r, double R, double inner_value,
                                    double outer_value) {
  if (!(r > 0.0 && r < R)) throw std::domain_error("radial_oracle: need 0 < r < R");
  if (!(epsilon >= 0.0)) throw std::domain_error("radial_oracle: epsilon must be >= 0");
  if (k < 1 || k > n) throw std::domain_error("radial_oracle: need 1 <= k <= n");
  RadialProfileSolution s;
  s.n = n;
  s.k = k;
  s.epsilon = epsilon;
  s.r = r;
  s.R = R;
  s.inner_value = inner_value;
  s.outer_value = outer_value;
  const double gap = outer_value - inner_value;
  if (!(gap > 0.0)) throw std::domain_error("radial_oracle: no increasing admissible profile (outer <= inner)");

  if (epsilon == 0.0) {
    const double gr = fundamental_solution(n, k, r), gR = fundamental_solution(n, k, R);
    s.closed_form_ = true;
    s.A_ = gap / (gR - gr);
    s.B_ = inner_value - s.A_ * gr;
    s.K = 0.0;
    s.c = std::pow(s.A_ * dfundamental(n, k, R, 1), k) * std::pow(R, n - k);
    return s;
  }

  s.K = k * epsilon / (n * binomial(n - 1, k - 1));
  auto total = [&](double c) {
    s.c = c;
    return radial_integral([&](double rho) { return s.dphi(rho); }, r, R) - gap;
  };
  // c below -K r^n makes phi' vanish inside (r, R).
  const double c_lo = -s.K * std::pow(r, n);
  const double f_lo = total(c_lo);
  if (f_lo > 0.0)
    throw std::domain_error("radial_oracle: boundary gap below the minimal admissible rise (infeasible)");
  double c_hi = std::max(1.0, std::abs(c_lo));
  while (total(c_hi) < 0.0) {
    c_hi *= 2.0;
    if (c_hi > 1e300) throw std::domain_error("radial_oracle: shooting bracket diverged");
  }
  boost::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(total, c_lo, c_hi, f_lo, total(c_hi),
                                                      boost::math::tools::eps_tolerance<double>(52), iters);
  s.c = 0.5 * (root.first + root.second);
  return s;
}

GridFunction sample_radial(const GridPtr& grid, const RadialProfileSolution& sol) {
  GridFunction out(grid);
  for (std::int64_t i = 0; i < grid->size(); ++i) {
    const Node& nd = grid->node(i);
    switch (nd.cls) {
      case NodeClass::Interior: out[i] = sol.phi(norm(nd.x)); break;
      case NodeClass::OuterBoundary: out[i] = sol.outer_value; break;
      case NodeClass::InnerBoundary: out[i] = sol.inner_value; break;
      case NodeClass::Exterior: break;
    }
  }
  return out;
}

}  // namespace khess
