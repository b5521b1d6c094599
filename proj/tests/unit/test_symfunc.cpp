#include <doctest.h>

#include <cmath>
#include <random>

#include "khess/symfunc.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

SymMatrix from_dense(const oracle::Dense& a) {
  const int n = static_cast<int>(a.size());
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, a[i][j]);
  return m;
}

// Random matrix pushed into Gamma_k by adding a multiple of the identity.
SymMatrix random_gamma(std::mt19937_64& rng, int n, int k) {
  SymMatrix m = from_dense(oracle::random_symmetric(rng, n));
  while (!in_gamma_k(eigenvalues(m), k)) m = m + SymMatrix::identity(n) * 0.25;
  return m;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

}  // namespace

TEST_SUITE("symfunc") {
  TEST_CASE("elem_sym examples") {
    CHECK(elem_sym(EigenSpectrum{1, 1, 1}, 2) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(elem_sym(EigenSpectrum{2, 0, -1}, 3) == 0.0);
    CHECK(elem_sym(EigenSpectrum{4, 5}, 0) == 1.0);

    // Frozen from subset enumeration: -1.1654.
    const std::vector<double> lam{0.37, -1.21, 2.05, 0.83};
    const double frozen = -1.1654;
    CHECK(oracle::subset_sum(lam, 2) == doctest::Approx(frozen).epsilon(1e-14));
    CHECK(elem_sym(EigenSpectrum(std::span<const double>(lam)), 2) == doctest::Approx(frozen).epsilon(1e-14));
  }

  TEST_CASE("elem_sym rejects k outside 0..n") {
    CHECK_THROWS_AS(elem_sym(EigenSpectrum{1, 2}, 3), std::domain_error);
    CHECK_THROWS_AS(elem_sym(EigenSpectrum{1, 2}, -1), std::domain_error);
  }

  TEST_CASE("sk examples") {
    CHECK(sk(SymMatrix::identity(3), 2) == doctest::Approx(3.0).epsilon(1e-14));
    const double d[3] = {1, 2, 3};
    CHECK(sk(SymMatrix::diagonal(d), 3) == doctest::Approx(6.0).epsilon(1e-14));

    // Frozen from principal-minor enumeration: 0.7625.
    const oracle::Dense a{{0.9, -0.3, 0.45, 0.1}, {-0.3, 1.7, 0.25, -0.6}, {0.45, 0.25, -0.8, 0.35}, {0.1, -0.6, 0.35, 1.2}};
    CHECK(oracle::principal_minor_sum(a, 2).value == doctest::Approx(0.7625).epsilon(1e-13));
    CHECK(sk(from_dense(a), 2) == doctest::Approx(0.7625).epsilon(1e-12));
  }

  TEST_CASE("non-symmetric input is rejected at construction") {
    CHECK_THROWS_AS(SymMatrix(2, {1.0, 2.0, 2.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SymMatrix(5), std::invalid_argument);
  }

  TEST_CASE("sk matches principal minors on 1000 random matrices") {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
      const int n = 2 + s % 3;
      const oracle::Dense a = oracle::random_symmetric(rng, n);
      const SymMatrix m = from_dense(a);
      for (int k = 1; k <= n; ++k) {
        const oracle::MinorSum ref = oracle::principal_minor_sum(a, k);
        worst = std::max(worst, rel(sk(m, k), ref.value, ref.scale));
      }
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("sk_jacobian examples") {
    const SymMatrix j2 = sk_jacobian(SymMatrix::identity(3), 2);
    const SymMatrix h = SymMatrix(3, {0.3, -1.0, 2.0, -1.0, 4.0, 0.5, 2.0, 0.5, -7.0});
    const SymMatrix j1 = sk_jacobian(h, 1);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        CHECK(j2(i, j) == doctest::Approx(i == j ? 2.0 : 0.0));
        CHECK(j1(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
      }
  }

  TEST_CASE("sk_jacobian matches central differences") {
    std::mt19937_64 rng(11);
    const double step = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + trial % 3;
      const int k = 1 + trial % n;
      const SymMatrix m = random_gamma(rng, n, std::min(k, 2));
      const SymMatrix jac = sk_jacobian(m, k);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          SymMatrix p = m, q = m;
          p.set(i, j, m(i, j) + step);
          q.set(i, j, m(i, j) - step);
          const double fd = (sk(p, k) - sk(q, k)) / (2 * step);
          const double want = i == j ? jac(i, j) : 2.0 * jac(i, j);
          CHECK(std::abs(fd - want) <= 1e-6 * std::max(1.0, std::abs(want)));
        }
    }
  }

  TEST_CASE("sk_jacobian is positive definite inside the cone") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + trial % 3;
      const int k = 1 + trial % n;
      const SymMatrix m = random_gamma(rng, n, k);
      CHECK(eigenvalues(sk_jacobian(m, k))[0] > 0.0);
    }
  }

  TEST_CASE("in_gamma_k") {
    CHECK(in_gamma_k(EigenSpectrum{1, 1, 1}, 3));
    // S_1 = 3, S_2 = 1 - 5 - 5 = -9 by enumeration.
    CHECK(oracle::subset_sum({-1, -1, 5}, 2) == -9.0);
    CHECK_FALSE(in_gamma_k(EigenSpectrum{-1, -1, 5}, 2));
    CHECK(in_gamma_k(EigenSpectrum{-1, -1, 5}, 1));
    for (int k = 1; k <= 4; ++k) CHECK_FALSE(in_gamma_k(EigenSpectrum{0, 0, 0, 0}, k));
    // Below the 1e-14 floor counts as the boundary of the cone.
    CHECK_FALSE(in_gamma_k(EigenSpectrum{1e-15, 1e-15}, 1));
    CHECK_THROWS_AS(in_gamma_k(EigenSpectrum{1, 2}, 3), std::domain_error);
  }

  TEST_CASE("property: Euler identity, Maclaurin and concavity on Gamma_k") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
      const int n = 2 + trial % 3;
      const int k = 1 + (trial / 3) % n;
      const SymMatrix a = random_gamma(rng, n, k);
      const SymMatrix b = random_gamma(rng, n, k);

      const double s = sk(a, k);
      CHECK(std::abs(sk_jacobian(a, k).dot(a) - k * s) <= 1e-10 * std::max(1.0, std::abs(k * s)));

      if (k >= 2) {
        const double lhs = std::pow(s / binomial(n, k), 1.0 / k);
        const double rhs = std::pow(sk(a, k - 1) / binomial(n, k - 1), 1.0 / (k - 1));
        CHECK(lhs <= rhs + 1e-12);
      }

      const double mid = std::pow(sk((a + b) * 0.5, k), 1.0 / k);
      CHECK(mid >= 0.5 * (std::pow(s, 1.0 / k) + std::pow(sk(b, k), 1.0 / k)) - 1e-10);
    }
  }

  TEST_CASE("eigenvalues are sorted and bitwise reproducible") {
    std::mt19937_64 rng(19);
    const SymMatrix m = from_dense(oracle::random_symmetric(rng, 4));
    const EigenSpectrum e1 = eigenvalues(m), e2 = eigenvalues(m);
    for (int i = 0; i < 4; ++i) {
      CHECK(e1[i] == e2[i]);
      if (i > 0) CHECK(e1[i - 1] <= e1[i]);
    }
    CHECK(e1[0] + e1[1] + e1[2] + e1[3] == doctest::Approx(m.trace()).epsilon(1e-13));
  }
}
