#pragma once

#include <array>
#include <initializer_list>
#include <span>
#include <stdexcept>

namespace khess {

inline constexpr int kMaxDim = 4;

/// Dense symmetric n x n matrix, n in {1..4}. Symmetry is enforced at
/// construction; all mutation goes through set(), which writes both halves.
class SymMatrix {
public:
  SymMatrix() = default;
  explicit SymMatrix(int dim);

  /// Row-major n*n entries; throws std::invalid_argument unless exactly
  /// symmetric.
  SymMatrix(int dim, std::span<const double> row_major);
  SymMatrix(int dim, std::initializer_list<double> row_major);

  static SymMatrix identity(int dim);
  static SymMatrix diagonal(std::span<const double> diag);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return a_[i * kMaxDim + j]; }
  void set(int i, int j, double v) {
    a_[i * kMaxDim + j] = v;
    a_[j * kMaxDim + i] = v;
  }

  double trace() const;
  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;
  /// Frobenius inner product sum_ij A_ij B_ij.
  double dot(const SymMatrix& o) const;
  /// Largest |eigenvalue|.
  double spectral_norm() const;

private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

/// Eigenvalues in nondecreasing order.
class EigenSpectrum {
public:
  EigenSpectrum() = default;
  /// Sorts the given values.
  explicit EigenSpectrum(std::span<const double> values);
  EigenSpectrum(std::initializer_list<double> values);

  int size() const { return n_; }
  double operator[](int i) const { return v_[i]; }
  std::span<const double> values() const { return {v_.data(), static_cast<size_t>(n_)}; }

private:
  int n_ = 0;
  std::array<double, kMaxDim> v_{};
};

/// Cyclic Jacobi with a fixed (p,q) sweep order; bitwise reproducible.
EigenSpectrum eigenvalues(const SymMatrix& m);

/// Eigen-decomposition: values ascending, column j of `vectors` (row-major
/// n x n) is the unit eigenvector of values[j].
struct EigenSystem {
  EigenSpectrum values;
  std::array<double, kMaxDim * kMaxDim> vectors{};
};
EigenSystem eigensystem(const SymMatrix& m);

/// S_k(lambda), the k-th elementary symmetric function. S_0 = 1.
/// Throws std::domain_error unless 0 <= k <= n.
double elem_sym(const EigenSpectrum& lambda, int k);
double elem_sym(std::span<const double> lambda, int k);

/// S_k of a symmetric matrix (sum of principal k x k minors), evaluated
/// through the eigenvalues. S_k = 0 for k > n.
double sk(const SymMatrix& h, int k);

/// Gradient of S_k with respect to the entries of H treated as independent
/// variables: dS_k = sum_ij J_ij dH_ij. For a joint symmetric perturbation
/// of H_ij and H_ji (i != j) the derivative is therefore 2 J_ij.
/// Built from the Newton tensor T_{k-1} = sum_j (-1)^j S_{k-1-j} H^j with the
/// S_m taken from power sums via Newton's identities.
SymMatrix sk_jacobian(const SymMatrix& h, int k);

/// All S_0..S_n from the characteristic polynomial (Newton's identities).
std::array<double, kMaxDim + 1> char_poly_coeffs(const SymMatrix& h);

inline constexpr double kGammaFloor = 1e-14;

/// True iff S_j(lambda) > floor for every j in 1..k.
bool in_gamma_k(const EigenSpectrum& lambda, int k, double floor = kGammaFloor);

/// min_{1<=j<=k} S_j(lambda); positive iff lambda is in the open cone.
double gamma_margin(const EigenSpectrum& lambda, int k);

double binomial(int n, int k);

}  // namespace khess
