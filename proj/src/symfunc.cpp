#include "khess/symfunc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace khess {

namespace {

void check_dim(int n) {
  if (n < 1 || n > kMaxDim) {
    throw std::invalid_argument("SymMatrix: dimension " + std::to_string(n) + " not in 1..4");
  }
}

}  // namespace

SymMatrix::SymMatrix(int dim) : n_(dim) { check_dim(dim); }

SymMatrix::SymMatrix(int dim, std::span<const double> row_major) : n_(dim) {
  check_dim(dim);
  if (row_major.size() != static_cast<size_t>(dim * dim)) {
    throw std::invalid_argument("SymMatrix: expected n*n entries");
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const double v = row_major[i * dim + j];
      if (v != row_major[j * dim + i]) {
        throw std::invalid_argument("SymMatrix: input is not symmetric");
      }
      a_[i * kMaxDim + j] = v;
    }
  }
}

SymMatrix::SymMatrix(int dim, std::initializer_list<double> row_major)
    : SymMatrix(dim, std::span<const double>(row_major.begin(), row_major.size())) {}

SymMatrix SymMatrix::identity(int dim) {
  SymMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(static_cast<int>(diag.size()));
  for (size_t i = 0; i < diag.size(); ++i) m.set(static_cast<int>(i), static_cast<int>(i), diag[i]);
  return m;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  SymMatrix r(n_);
  for (size_t i = 0; i < a_.size(); ++i) r.a_[i] = a_[i] + o.a_[i];
  return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  SymMatrix r(n_);
  for (size_t i = 0; i < a_.size(); ++i) r.a_[i] = a_[i] - o.a_[i];
  return r;
}

SymMatrix SymMatrix::operator*(double s) const {
  SymMatrix r(n_);
  for (size_t i = 0; i < a_.size(); ++i) r.a_[i] = a_[i] * s;
  return r;
}

double SymMatrix::dot(const SymMatrix& o) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s += (*this)(i, j) * o(i, j);
  return s;
}

double SymMatrix::spectral_norm() const {
  const auto ev = eigenvalues(*this);
  return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
}

EigenSpectrum::EigenSpectrum(std::span<const double> values) : n_(static_cast<int>(values.size())) {
  check_dim(n_);
  std::copy(values.begin(), values.end(), v_.begin());
  std::sort(v_.begin(), v_.begin() + n_);
}

EigenSpectrum::EigenSpectrum(std::initializer_list<double> values)
    : EigenSpectrum(std::span<const double>(values.begin(), values.size())) {}

EigenSystem eigensystem(const SymMatrix& m) {
  const int n = m.dim();
  double a[kMaxDim][kMaxDim];
  double v[kMaxDim][kMaxDim];
  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a[i][j] = m(i, j);
      v[i][j] = (i == j) ? 1.0 : 0.0;
      scale = std::max(scale, std::abs(a[i][j]));
    }
  }

  // Cyclic-by-row sweeps; rotation formulas follow Golub & Van Loan 8.5.
  for (int sweep = 0; sweep < 64 && scale > 0.0; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off <= 1e-36 * scale * scale) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int r = 0; r < n; ++r) {
          const double arp = a[r][p];
          const double arq = a[r][q];
          a[r][p] = c * arp - s * arq;
          a[r][q] = s * arp + c * arq;
        }
        for (int r = 0; r < n; ++r) {
          const double apr = a[p][r];
          const double aqr = a[q][r];
          a[p][r] = c * apr - s * aqr;
          a[q][r] = s * apr + c * aqr;
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v[r][p];
          const double vrq = v[r][q];
          v[r][p] = c * vrp - s * vrq;
          v[r][q] = s * vrp + c * vrq;
        }
      }
    }
  }

  std::array<int, kMaxDim> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.begin() + n, [&](int x, int y) { return a[x][x] < a[y][y]; });

  EigenSystem out;
  std::array<double, kMaxDim> vals{};
  for (int j = 0; j < n; ++j) {
    vals[j] = a[order[j]][order[j]];
    for (int r = 0; r < n; ++r) out.vectors[r * n + j] = v[r][order[j]];
  }
  out.values = EigenSpectrum(std::span<const double>(vals.data(), n));
  return out;
}

EigenSpectrum eigenvalues(const SymMatrix& m) { return eigensystem(m).values; }

double elem_sym(std::span<const double> lambda, int k) {
  const int n = static_cast<int>(lambda.size());
  if (k < 0 || k > n) {
    throw std::domain_error("elem_sym: k=" + std::to_string(k) + " outside 0..n=" + std::to_string(n));
  }
  // e_j accumulated over prefixes; descending j keeps the update in place.
  std::array<double, kMaxDim + 1> e{};
  e[0] = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::min(i + 1, k); j >= 1; --j) e[j] += lambda[i] * e[j - 1];
  return e[k];
}

double elem_sym(const EigenSpectrum& lambda, int k) { return elem_sym(lambda.values(), k); }

double sk(const SymMatrix& h, int k) {
  if (k < 0) throw std::domain_error("sk: negative k");
  if (k > h.dim()) return 0.0;
  if (k == 0) return 1.0;
  return elem_sym(eigenvalues(h), k);
}

std::array<double, kMaxDim + 1> char_poly_coeffs(const SymMatrix& h) {
  const int n = h.dim();
  // Power sums p_m = tr(H^m).
  std::array<double, kMaxDim + 1> p{};
  SymMatrix power = SymMatrix::identity(n);
  for (int m = 1; m <= n; ++m) {
    SymMatrix next(n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += power(i, l) * h(l, j);
        next.set(i, j, s);
      }
    }
    power = next;
    p[m] = power.trace();
  }
  std::array<double, kMaxDim + 1> e{};
  e[0] = 1.0;
  for (int m = 1; m <= n; ++m) {
    double s = 0.0;
    for (int i = 1; i <= m; ++i) s += ((i % 2 == 1) ? 1.0 : -1.0) * e[m - i] * p[i];
    e[m] = s / m;
  }
  return e;
}

SymMatrix sk_jacobian(const SymMatrix& h, int k) {
  const int n = h.dim();
  if (k < 1) throw std::domain_error("sk_jacobian: k must be >= 1");
  if (k > n) return SymMatrix(n);
  const auto e = char_poly_coeffs(h);

  // Horner form of T_{k-1} = sum_{j=0}^{k-1} (-1)^j e_{k-1-j} H^j.
  SymMatrix t = SymMatrix::identity(n) * (((k - 1) % 2 == 0) ? 1.0 : -1.0);
  for (int j = k - 2; j >= 0; --j) {
    SymMatrix prod(n);
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += t(a, l) * h(l, b);
        prod.set(a, b, s);
      }
    }
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    t = prod + SymMatrix::identity(n) * (sign * e[k - 1 - j]);
  }
  return t;
}

double gamma_margin(const EigenSpectrum& lambda, int k) {
  double m = elem_sym(lambda, 1);
  for (int j = 2; j <= k; ++j) m = std::min(m, elem_sym(lambda, j));
  return m;
}

bool in_gamma_k(const EigenSpectrum& lambda, int k, double floor) {
  if (k < 1 || k > lambda.size()) throw std::domain_error("in_gamma_k: k outside 1..n");
  for (int j = 1; j <= k; ++j)
    if (!(elem_sym(lambda, j) > floor)) return false;
  return true;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace khess
