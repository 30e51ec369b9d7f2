#pragma once

// Exact arithmetic in the real quadratic field Q(sqrt(d)), d = p^2 - 4, which
// contains q = (p + sqrt(d)) / 2 with q + 1/q = p.

#include <gmpxx.h>

#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ecs {

/// Element a + b*sqrt(d) with rational a, b. The radicand d travels with the
/// element so that mixed-context arithmetic is caught at runtime.
class QFieldElement {
 public:
  QFieldElement() = default;
  QFieldElement(mpq_class a, mpq_class b, long d) : a_(std::move(a)), b_(std::move(b)), d_(d) {
    a_.canonicalize();
    b_.canonicalize();
  }
  static QFieldElement rational(const mpq_class& a, long d) { return {a, 0, d}; }

  const mpq_class& a() const { return a_; }
  const mpq_class& b() const { return b_; }
  long radicand() const { return d_; }

  bool is_zero() const { return sgn(a_) == 0 && sgn(b_) == 0; }
  bool is_rational() const { return sgn(b_) == 0; }

  /// Exact sign of the real embedding: -1, 0 or +1.
  int sign() const {
    const int sa = sgn(a_);
    const int sb = sgn(b_);
    if (sb == 0) return sa;
    if (sa == 0) return sb;
    if (sa == sb) return sa;
    // Opposite signs: compare a^2 with b^2 d.
    const mpq_class lhs = a_ * a_;
    const mpq_class rhs = b_ * b_ * d_;
    const int c = cmp(lhs, rhs);
    if (c == 0) return 0;  // only possible when d is a perfect square
    return c > 0 ? sa : sb;
  }

  QFieldElement conjugate() const { return {a_, -b_, d_}; }
  /// Field norm a^2 - d b^2.
  mpq_class norm() const { return a_ * a_ - b_ * b_ * d_; }

  QFieldElement inverse() const {
    const mpq_class n = norm();
    if (sgn(n) == 0) throw std::domain_error("QFieldElement: inverse of zero");
    return {a_ / n, -b_ / n, d_};
  }

  QFieldElement operator-() const { return {-a_, -b_, d_}; }

  QFieldElement& operator+=(const QFieldElement& o) {
    check(o);
    a_ += o.a_;
    b_ += o.b_;
    return *this;
  }
  QFieldElement& operator-=(const QFieldElement& o) {
    check(o);
    a_ -= o.a_;
    b_ -= o.b_;
    return *this;
  }
  QFieldElement& operator*=(const QFieldElement& o) {
    check(o);
    mpq_class na = a_ * o.a_ + b_ * o.b_ * d_;
    mpq_class nb = a_ * o.b_ + b_ * o.a_;
    a_ = std::move(na);
    b_ = std::move(nb);
    return *this;
  }
  QFieldElement& operator/=(const QFieldElement& o) { return *this *= o.inverse(); }
  QFieldElement& operator*=(const mpq_class& s) {
    a_ *= s;
    b_ *= s;
    return *this;
  }

  friend QFieldElement operator+(QFieldElement x, const QFieldElement& y) { return x += y; }
  friend QFieldElement operator-(QFieldElement x, const QFieldElement& y) { return x -= y; }
  friend QFieldElement operator*(QFieldElement x, const QFieldElement& y) { return x *= y; }
  friend QFieldElement operator/(QFieldElement x, const QFieldElement& y) { return x /= y; }
  friend QFieldElement operator*(QFieldElement x, const mpq_class& s) { return x *= s; }
  friend QFieldElement operator*(const mpq_class& s, QFieldElement x) { return x *= s; }

  friend bool operator==(const QFieldElement& x, const QFieldElement& y) {
    return x.d_ == y.d_ && x.a_ == y.a_ && x.b_ == y.b_;
  }
  friend std::strong_ordering operator<=>(const QFieldElement& x, const QFieldElement& y) {
    const int s = (x - y).sign();
    return s < 0 ? std::strong_ordering::less
                 : (s > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

  /// Nearest double. Uses the conjugate form when a and b have opposite signs to
  /// avoid cancellation.
  double to_double() const {
    const double sd = std::sqrt(static_cast<double>(d_));
    if (sgn(a_) == 0 || sgn(b_) == 0 || sgn(a_) == sgn(b_)) {
      return a_.get_d() + b_.get_d() * sd;
    }
    const mpq_class n = norm();
    return n.get_d() / (a_.get_d() - b_.get_d() * sd);
  }

  std::string to_string() const {
    return a_.get_str() + (sgn(b_) < 0 ? " - " : " + ") + mpq_class(abs(b_)).get_str() + "*sqrt(" +
           std::to_string(d_) + ")";
  }
  friend std::ostream& operator<<(std::ostream& os, const QFieldElement& x) {
    return os << x.to_string();
  }

 private:
  void check(const QFieldElement& o) {
    // A default-constructed element is the rational zero and adopts any radicand.
    if (d_ == 0) {
      d_ = o.d_;
    } else if (o.d_ != 0 && o.d_ != d_) {
      throw std::invalid_argument("QFieldElement: radicand mismatch");
    }
  }

  mpq_class a_{0};
  mpq_class b_{0};
  long d_{0};
};

/// The field context fixed by an integer p >= 3.
class QFieldContext {
 public:
  explicit QFieldContext(long p) : p_(p), d_(p * p - 4) {
    if (p < 3) throw std::invalid_argument("QFieldContext: p must be >= 3");
    q_ = QFieldElement(mpq_class(p, 2), mpq_class(1, 2), d_);
    q_inv_ = q_.conjugate();
  }

  long p() const { return p_; }
  long d() const { return d_; }
  const QFieldElement& q() const { return q_; }
  const QFieldElement& q_inverse() const { return q_inv_; }
  double q_double() const { return q_.to_double(); }
  double log_q() const { return std::log(q_double()); }

  QFieldElement zero() const { return QFieldElement(0, 0, d_); }
  QFieldElement one() const { return QFieldElement(1, 0, d_); }
  QFieldElement rational(const mpq_class& r) const { return QFieldElement(r, 0, d_); }

  /// q^e for any integer exponent.
  QFieldElement power(long e) const {
    QFieldElement base = e < 0 ? q_inv_ : q_;
    unsigned long n = e < 0 ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
    QFieldElement result = one();
    while (n != 0) {
      if (n & 1UL) result *= base;
      n >>= 1;
      if (n != 0) base *= base;
    }
    return result;
  }

  friend bool operator==(const QFieldContext& x, const QFieldContext& y) { return x.p_ == y.p_; }

 private:
  long p_;
  long d_;
  QFieldElement q_;
  QFieldElement q_inv_;
};

}  // namespace ecs
