#pragma once

#include <array>
#include <cmath>

namespace khess {

/// Second-order forward-mode jet in three variables: value, gradient and
/// (symmetric) Hessian. Enough algebra to differentiate the radial profiles.
struct Jet {
  double v = 0.0;
  std::array<double, 3> g{};
  std::array<double, 9> h{};

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: implicit lift of constants

  static Jet variable(double value, int index) {
    Jet j(value);
    j.g[index] = 1.0;
    return j;
  }

  double hess(int a, int b) const { return h[a * 3 + b]; }
};

/// Applies a scalar function through its first two derivatives.
inline Jet chain(const Jet& x, double f, double df, double d2f) {
  Jet r(f);
  for (int a = 0; a < 3; ++a) r.g[a] = df * x.g[a];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r.h[a * 3 + b] = df * x.h[a * 3 + b] + d2f * x.g[a] * x.g[b];
  return r;
}

inline Jet operator+(const Jet& x, const Jet& y) {
  Jet r(x.v + y.v);
  for (int a = 0; a < 3; ++a) r.g[a] = x.g[a] + y.g[a];
  for (int a = 0; a < 9; ++a) r.h[a] = x.h[a] + y.h[a];
  return r;
}

inline Jet operator-(const Jet& x, const Jet& y) {
  Jet r(x.v - y.v);
  for (int a = 0; a < 3; ++a) r.g[a] = x.g[a] - y.g[a];
  for (int a = 0; a < 9; ++a) r.h[a] = x.h[a] - y.h[a];
  return r;
}

inline Jet operator-(const Jet& x) { return Jet(0.0) - x; }

inline Jet operator*(const Jet& x, const Jet& y) {
  Jet r(x.v * y.v);
  for (int a = 0; a < 3; ++a) r.g[a] = x.v * y.g[a] + y.v * x.g[a];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      r.h[a * 3 + b] = x.v * y.h[a * 3 + b] + y.v * x.h[a * 3 + b] + x.g[a] * y.g[b] + x.g[b] * y.g[a];
  return r;
}

inline Jet operator/(const Jet& x, const Jet& y) {
  const double iv = 1.0 / y.v;
  return x * chain(y, iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline Jet& operator+=(Jet& x, const Jet& y) { return x = x + y; }
inline Jet& operator*=(Jet& x, const Jet& y) { return x = x * y; }

inline Jet sqrt(const Jet& x) {
  const double s = std::sqrt(x.v);
  return chain(x, s, 0.5 / s, -0.25 / (s * x.v));
}

inline Jet pow(const Jet& x, double p) {
  const double f = std::pow(x.v, p);
  return chain(x, f, p * f / x.v, p * (p - 1.0) * f / (x.v * x.v));
}

}  // namespace khess
