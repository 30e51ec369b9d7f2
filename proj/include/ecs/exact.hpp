#pragma once

// Integer polynomials and unimodular integer matrices whose spectra are
// prescribed sets of integer powers of q.

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "ecs/qfield.hpp"

namespace ecs {

/// Integer polynomial, coefficients in increasing degree (constant term first).
struct IntPolynomial {
  std::vector<mpz_class> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  const mpz_class& leading() const { return coeffs.back(); }
  const mpz_class& constant() const { return coeffs.front(); }
  bool is_monic() const { return !coeffs.empty() && leading() == 1; }

  /// The same roots, scaled so that the leading coefficient is (-1)^degree,
  /// i.e. det(M - x I) for a matrix M with this characteristic polynomial.
  IntPolynomial sign_normalized() const {
    IntPolynomial out = *this;
    if (degree() % 2 != 0)
      for (auto& c : out.coeffs) c = -c;
    return out;
  }

  QFieldElement evaluate(const QFieldElement& x) const {
    // Horner.
    QFieldElement acc = QFieldElement::rational(0, x.radicand());
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
      acc *= x;
      acc += QFieldElement::rational(mpq_class(*it), x.radicand());
    }
    return acc;
  }

  friend IntPolynomial operator*(const IntPolynomial& x, const IntPolynomial& y) {
    IntPolynomial out;
    out.coeffs.assign(x.coeffs.size() + y.coeffs.size() - 1, 0);
    for (std::size_t i = 0; i < x.coeffs.size(); ++i)
      for (std::size_t j = 0; j < y.coeffs.size(); ++j) out.coeffs[i + j] += x.coeffs[i] * y.coeffs[j];
    return out;
  }
  friend bool operator==(const IntPolynomial&, const IntPolynomial&) = default;
};

/// Dense square integer matrix, row-major.
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(int size) : n_(size), data_(static_cast<std::size_t>(size) * size, 0) {}

  static IntMatrix identity(int size) {
    IntMatrix m(size);
    for (int i = 0; i < size; ++i) m(i, i) = 1;
    return m;
  }

  int size() const { return n_; }
  mpz_class& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * n_ + j]; }
  const mpz_class& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * n_ + j]; }

  mpz_class trace() const {
    mpz_class t = 0;
    for (int i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  friend IntMatrix operator*(const IntMatrix& x, const IntMatrix& y) {
    if (x.n_ != y.n_) throw std::invalid_argument("IntMatrix: size mismatch");
    IntMatrix out(x.n_);
    for (int i = 0; i < x.n_; ++i)
      for (int k = 0; k < x.n_; ++k) {
        if (x(i, k) == 0) continue;
        for (int j = 0; j < x.n_; ++j) out(i, j) += x(i, k) * y(k, j);
      }
    return out;
  }
  friend std::vector<mpz_class> operator*(const IntMatrix& x, const std::vector<mpz_class>& v) {
    std::vector<mpz_class> out(static_cast<std::size_t>(x.n_), 0);
    for (int i = 0; i < x.n_; ++i)
      for (int j = 0; j < x.n_; ++j) out[i] += x(i, j) * v[j];
    return out;
  }
  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

 private:
  int n_ = 0;
  std::vector<mpz_class> data_;
};

/// s_a = q^a + q^-a, an integer: s_0 = 2, s_1 = p, s_a = p s_{a-1} - s_{a-2}.
inline mpz_class trace_sequence(const QFieldContext& ctx, long a) {
  if (a < 0) a = -a;
  mpz_class prev = 2;
  if (a == 0) return prev;
  mpz_class cur = ctx.p();
  for (long i = 1; i < a; ++i) {
    mpz_class next = ctx.p() * cur - prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

/// Monic integer polynomial whose roots are exactly { q^a : a in Y }.
/// Y must be closed under negation.
inline IntPolynomial char_poly_from_exponents(const std::set<long>& exponents, const QFieldContext& ctx) {
  for (long a : exponents)
    if (!exponents.contains(-a))
      throw std::invalid_argument("char_poly_from_exponents: exponent set is not symmetric about 0 (" +
                                  std::to_string(a) + " has no partner)");
  IntPolynomial poly{{1}};
  if (exponents.contains(0)) poly = poly * IntPolynomial{{-1, 1}};
  for (long a : exponents) {
    if (a <= 0) continue;
    poly = poly * IntPolynomial{{1, -trace_sequence(ctx, a), 1}};
  }
  return poly;
}

/// Companion matrix: ones on the subdiagonal, negated coefficients in the last
/// column. Its characteristic polynomial is `poly`.
inline IntMatrix companion_matrix(const IntPolynomial& poly) {
  if (poly.degree() < 1) throw std::invalid_argument("companion_matrix: degree must be >= 1");
  if (!poly.is_monic()) throw std::invalid_argument("companion_matrix: polynomial must be monic");
  if (abs(poly.constant()) != 1)
    throw std::invalid_argument("companion_matrix: constant term must be +-1 for a unimodular matrix");
  const int n = poly.degree();
  IntMatrix m(n);
  for (int i = 1; i < n; ++i) m(i, i - 1) = 1;
  for (int i = 0; i < n; ++i) m(i, n - 1) = -poly.coeffs[i];
  return m;
}

namespace detail {

// Faddeev-LeVerrier over Z. Returns the monic characteristic polynomial and the
// auxiliary matrix M_n with A M_n = -c_0 I.
inline std::pair<IntPolynomial, IntMatrix> faddeev_leverrier(const IntMatrix& a) {
  const int n = a.size();
  IntPolynomial poly;
  poly.coeffs.assign(static_cast<std::size_t>(n) + 1, 0);
  poly.coeffs[n] = 1;
  IntMatrix m(n);
  IntMatrix am(n);
  for (int k = 1; k <= n; ++k) {
    m = am;
    for (int i = 0; i < n; ++i) m(i, i) += poly.coeffs[n - k + 1];
    am = a * m;
    mpz_class t = am.trace();
    mpz_class c;
    mpz_divexact_ui(c.get_mpz_t(), t.get_mpz_t(), static_cast<unsigned long>(k));
    poly.coeffs[n - k] = -c;
  }
  return {poly, m};
}

}  // namespace detail

/// Monic characteristic polynomial det(x I - M).
inline IntPolynomial characteristic_polynomial(const IntMatrix& m) {
  return detail::faddeev_leverrier(m).first;
}

inline mpz_class determinant(const IntMatrix& m) {
  const IntPolynomial p = characteristic_polynomial(m);
  return m.size() % 2 == 0 ? p.constant() : mpz_class(-p.constant());
}

/// Inverse of a unimodular matrix, exact.
inline IntMatrix unimodular_inverse(const IntMatrix& m) {
  auto [poly, aux] = detail::faddeev_leverrier(m);
  if (abs(poly.constant()) != 1) throw std::domain_error("unimodular_inverse: determinant is not +-1");
  // A M_n = -c_0 I, so A^{-1} = -M_n / c_0 = -c_0 M_n.
  IntMatrix inv(m.size());
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) inv(i, j) = -poly.constant() * aux(i, j);
  return inv;
}

/// True iff `m` lies in GL(n, Z) and its characteristic polynomial vanishes at
/// every q^a, a in Y. With |Y| = size this pins the spectrum to { q^a }.
inline bool verify_spectrum(const IntMatrix& m, const std::set<long>& exponents, const QFieldContext& ctx) {
  if (static_cast<int>(exponents.size()) != m.size())
    throw std::invalid_argument("verify_spectrum: |Y| does not match the matrix size");
  const IntPolynomial p = characteristic_polynomial(m);
  if (abs(p.constant()) != 1) return false;
  return std::all_of(exponents.begin(), exponents.end(),
                     [&](long a) { return p.evaluate(ctx.power(a)).is_zero(); });
}

}  // namespace ecs
