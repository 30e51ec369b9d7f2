#pragma once

// The isometries gamma-hat and gamma = (r, u), the Heisenberg group H = R x E,
// the Lagrangian subspace L, the lattice Sigma and the quotient bookkeeping
// (normal forms, canonical representatives).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <gmpxx.h>

#include "ecs/checks.hpp"
#include "ecs/exact.hpp"
#include "ecs/funcspace.hpp"
#include "ecs/model.hpp"

namespace ecs {

// ---------------------------------------------------------------------------
// Small dense matrices over the quadratic field.

using QMatrix = std::vector<std::vector<QFieldElement>>;

inline QMatrix qmatrix_zero(int rows, int cols, long d) {
  return QMatrix(static_cast<std::size_t>(rows), std::vector<QFieldElement>(cols, QFieldElement::rational(0, d)));
}

inline QMatrix qmatrix_identity(int size, long d) {
  QMatrix m = qmatrix_zero(size, size, d);
  for (int i = 0; i < size; ++i) m[i][i] = QFieldElement::rational(1, d);
  return m;
}

inline QMatrix operator*(const QMatrix& x, const QMatrix& y) {
  const std::size_t rows = x.size(), inner = y.size(), cols = y.empty() ? 0 : y[0].size();
  const long d = x.empty() || x[0].empty() ? 0 : x[0][0].radicand();
  QMatrix out = qmatrix_zero(static_cast<int>(rows), static_cast<int>(cols), d);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < inner; ++k) {
      if (x[i][k].is_zero()) continue;
      for (std::size_t j = 0; j < cols; ++j)
        if (!y[k][j].is_zero()) out[i][j] += x[i][k] * y[k][j];
    }
  return out;
}

inline QMatrix operator*(const QMatrix& x, const IntMatrix& y) {
  const long d = x.empty() || x[0].empty() ? 0 : x[0][0].radicand();
  const int n = y.size();
  QMatrix out = qmatrix_zero(static_cast<int>(x.size()), n, d);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int k = 0; k < n; ++k) {
      if (x[i][k].is_zero()) continue;
      for (int j = 0; j < n; ++j)
        if (y(k, j) != 0) out[i][j] += x[i][k] * mpq_class(y(k, j));
    }
  return out;
}

inline Eigen::MatrixXd to_double(const QMatrix& m) {
  Eigen::MatrixXd out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j].to_double();
  return out;
}

// ---------------------------------------------------------------------------
// Points and group elements.

struct Point {
  double t = 1.0;
  double s = 0.0;
  Eigen::VectorXd v;
};

/// gamma-hat for fixed (r-hat, u-hat); u-hat empty means u-hat = 0.
struct GammaHat {
  double r_hat = 0.0;
  std::optional<ESolution> u_hat;
};

/// gamma = (r, u) in H = R x E.
struct HElement {
  double r = 0.0;
  ESolution u;
};

inline void require_positive_t(double t, const char* where) {
  if (!(t > 0.0)) throw std::domain_error(std::string(where) + ": t must be positive");
}

/// gamma-hat(t, s, v) = (qt, -<w(qt), 2Cv + u(qt)> + r + s/q, Cv + u(qt)), w = du/dt.
inline Point act(const ModelData& md, const GammaHat& g, const Point& x) {
  require_positive_t(x.t, "act");
  const double q = md.ctx.q_double();
  const Eigen::VectorXd cv = md.c_diagonal_double().cwiseProduct(x.v);
  Point out;
  out.t = q * x.t;
  out.s = g.r_hat + x.s / q;
  out.v = cv;
  if (g.u_hat) {
    const auto [u, w] = g.u_hat->evaluate(out.t);
    out.s -= inner(md, w, 2.0 * cv + u);
    out.v += u;
  }
  return out;
}

inline Point act_inverse(const ModelData& md, const GammaHat& g, const Point& x) {
  require_positive_t(x.t, "act_inverse");
  const double q = md.ctx.q_double();
  const Eigen::VectorXd cinv = md.c_diagonal_double().cwiseInverse();
  Point out;
  out.t = x.t / q;
  double s = x.s - g.r_hat;
  Eigen::VectorXd v = x.v;
  if (g.u_hat) {
    const auto [u, w] = g.u_hat->evaluate(x.t);
    v -= u;
    s += inner(md, w, v + x.v);  // 2Cv' + u(t) = (v - u) + v
  }
  out.v = cinv.cwiseProduct(v);
  out.s = q * s;
  return out;
}

/// gamma(t, s, v) = (t, -<u'(t), 2v + u(t)> + r + s, v + u(t)).
inline Point act(const ModelData& md, const HElement& g, const Point& x) {
  require_positive_t(x.t, "act");
  const auto [u, du] = g.u.evaluate(x.t);
  return {x.t, -inner(md, du, 2.0 * x.v + u) + g.r + x.s, x.v + u};
}

/// (r, u)(r', u') = (Omega(u', u) + r + r', u + u'), Omega taken at t = 1.
inline HElement compose(const ModelData& md, const HElement& a, const HElement& b) {
  return {omega_at(md, b.u, a.u, 1.0) + a.r + b.r, a.u + b.u};
}

inline HElement inverse(const HElement& a) { return {-a.r, a.u.scaled(-1.0)}; }

/// Conjugation by gamma-hat: Pi(r, u) = (2 Omega(CT u, u-hat) + r/q, CT u).
inline HElement conjugate(const ModelData& md, const GammaHat& g, const HElement& h) {
  HElement out;
  out.u = h.u.ct(md);
  out.r = h.r / md.ctx.q_double();
  if (g.u_hat) out.r += 2.0 * omega_at(md, out.u, *g.u_hat, 1.0);
  return out;
}

/// Scaling of the fiber coordinate of the parallel null line bundle: gamma-hat
/// multiplies t and ds-dual data by q^-1, elements of H act trivially.
inline QFieldElement holonomy_scaling(const ModelData& md, const GammaHat&) { return md.ctx.q_inverse(); }
inline QFieldElement holonomy_scaling(const ModelData& md, const HElement&) { return md.ctx.one(); }

// ---------------------------------------------------------------------------
// L, Pi and Sigma.

struct LagrangianL {
  std::vector<int> index_set;  // S, 1-based
  std::vector<ESolution> basis;
  std::vector<long> exponents;  // E(i), i in S
  std::vector<QFieldElement> eigenvalues;
  bool closed_form = false;
};

inline LagrangianL build_L(const ModelData& md, const EigenBasis& b) {
  LagrangianL l;
  l.closed_form = b.closed_form;
  for (int i : md.system.selector()) {
    l.index_set.push_back(i);
    l.basis.push_back(b.u[i - 1]);
    l.exponents.push_back(b.exponents[i - 1]);
    l.eigenvalues.push_back(b.eigenvalues[i - 1]);
  }
  return l;
}

/// Omega(u, u-hat) as an exact field element. u-hat must be zero or closed form.
inline QFieldElement exact_omega_with(const ModelData& md, const ESolution& u, const GammaHat& g) {
  if (!g.u_hat) return md.ctx.zero();
  if (!u.is_closed_form() || !g.u_hat->is_closed_form())
    throw std::invalid_argument("pi_map: exact Pi needs u-hat = 0 or closed-form solutions");
  const auto v = omega_exact(md, u, *g.u_hat);
  if (!v) throw std::runtime_error("pi_map: Omega is not constant");
  return *v;
}

/// Matrix of Pi on R x L in the basis ((1,0), (0,u_i)_{i in S}).
inline QMatrix pi_map(const ModelData& md, const LagrangianL& l, const GammaHat& g) {
  const int n = static_cast<int>(l.basis.size()) + 1;
  QMatrix p = qmatrix_zero(n, n, md.ctx.d());
  p[0][0] = md.ctx.q_inverse();
  for (int i = 1; i < n; ++i) {
    p[i][i] = l.eigenvalues[i - 1];
    p[0][i] = md.ctx.rational(2) * l.eigenvalues[i - 1] * exact_omega_with(md, l.basis[i - 1], g);
  }
  return p;
}

/// A better-conditioned basis Phi U of the same lattice, U unimodular; used
/// for floating-point lattice coordinates.
struct ReducedBasis {
  IntMatrix u;
  IntMatrix u_inverse;
  QMatrix phi;
  IntMatrix xi;  // U^-1 Xi U
  IntMatrix xi_inverse;
  Eigen::MatrixXd phi_d;
  Eigen::MatrixXd phi_inverse_d;
};

struct LatticeSigma {
  QMatrix phi;          // columns: lattice basis in ((1,0),(0,u_i)) coordinates
  QMatrix phi_inverse;  // exact
  IntMatrix xi;
  IntMatrix xi_inverse;
  IntPolynomial char_poly;
  std::vector<QFieldElement> nodes;  // eigenvalue order: q^-1, then q^E(i), i in S
  std::vector<QFieldElement> rho;    // R-components of the Pi eigenvectors
  Eigen::MatrixXd phi_d;
  Eigen::MatrixXd phi_inverse_d;
  ReducedBasis reduced;
  bool double_usable = false;  // reduced basis finite and reasonably conditioned in doubles
};

namespace detail {

// Coefficients (constant first) of poly(x) / (x - root) by synthetic division.
inline std::vector<QFieldElement> deflate(const IntPolynomial& poly, const QFieldElement& root) {
  const int deg = poly.degree();
  std::vector<QFieldElement> out(static_cast<std::size_t>(deg), QFieldElement::rational(0, root.radicand()));
  QFieldElement acc = QFieldElement::rational(mpq_class(poly.coeffs[deg]), root.radicand());
  for (int i = deg - 1; i >= 0; --i) {
    out[i] = acc;
    acc = acc * root + QFieldElement::rational(mpq_class(poly.coeffs[i]), root.radicand());
  }
  return out;
}

/// Real embedding of a QMatrix at the given precision (bits).
inline std::vector<std::vector<mpf_class>> to_mpf(const QMatrix& x, mp_bitcnt_t prec) {
  const long d = x[0][0].radicand();
  const mpf_class root = sqrt(mpf_class(d, prec));
  std::vector<std::vector<mpf_class>> out(x.size(), std::vector<mpf_class>(x[0].size(), mpf_class(0, prec)));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[0].size(); ++j)
      out[i][j] = mpf_class(x[i][j].a(), prec) + mpf_class(x[i][j].b(), prec) * root;
  return out;
}

/// Binary exponent range (largest minus smallest) over the nonzero entries.
inline long exponent_spread(const QMatrix& x) {
  const auto v = to_mpf(x, 128);
  long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
  for (const auto& row : v)
    for (const auto& e : row) {
      if (sgn(e) == 0) continue;
      long ex = 0;
      mpf_get_d_2exp(&ex, e.get_mpf_t());
      lo = std::min(lo, ex);
      hi = std::max(hi, ex);
    }
  return hi < lo ? 0 : hi - lo;
}

/// LLL reduction (delta = 0.99) of the columns of the real matrix phi.
/// Gram-Schmidt runs in GMP floating point with a precision scaled to the
/// entry range; the returned U is exactly unimodular and phi U is reduced.
inline IntMatrix lll_reduce(const QMatrix& phi) {
  const int n = static_cast<int>(phi.size());
  const mp_bitcnt_t prec = static_cast<mp_bitcnt_t>(256 + 4 * exponent_spread(phi));
  const auto real = to_mpf(phi, prec);
  using Vec = std::vector<mpf_class>;
  std::vector<Vec> b(n, Vec(n, mpf_class(0, prec)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b[j][i] = real[i][j];
  std::vector<std::vector<mpz_class>> u(n, std::vector<mpz_class>(n, 0));
  for (int i = 0; i < n; ++i) u[i][i] = 1;

  auto dot = [&](const Vec& x, const Vec& y) {
    mpf_class acc(0, prec);
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
  };
  std::vector<Vec> star(n, Vec(n, mpf_class(0, prec))), mu(n, Vec(n, mpf_class(0, prec)));
  Vec norms(n, mpf_class(0, prec));
  auto orthogonalize = [&](int from) {
    for (int i = from; i < n; ++i) {
      star[i] = b[i];
      for (int j = 0; j < i; ++j) {
        mu[i][j] = dot(b[i], star[j]) / norms[j];
        for (int t = 0; t < n; ++t) star[i][t] -= mu[i][j] * star[j][t];
      }
      norms[i] = dot(star[i], star[i]);
    }
  };
  orthogonalize(0);
  const mpf_class delta(0.99, prec), half(0.5, prec);
  int k = 1;
  for (long guard = 0; k < n && guard < 1000000; ++guard) {
    for (int j = k - 1; j >= 0; --j) {
      const mpf_class r = floor(mu[k][j] + half);
      if (sgn(r) == 0) continue;
      const mpz_class rz(r);
      for (int t = 0; t < n; ++t) {
        b[k][t] -= r * b[j][t];
        u[k][t] -= rz * u[j][t];
      }
      for (int i = 0; i < j; ++i) mu[k][i] -= r * mu[j][i];
      mu[k][j] -= r;
    }
    if (norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1]) {
      ++k;
    } else {
      std::swap(b[k], b[k - 1]);
      std::swap(u[k], u[k - 1]);
      orthogonalize(k - 1);
      k = std::max(k - 1, 1);
    }
  }
  IntMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = u[j][i];
  return out;
}

inline QMatrix left_multiply(const IntMatrix& x, const QMatrix& y) {
  const int n = x.size();
  const long d = y[0][0].radicand();
  QMatrix out = qmatrix_zero(n, static_cast<int>(y[0].size()), d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      if (x(i, k) == 0) continue;
      for (std::size_t j = 0; j < y[0].size(); ++j)
        if (!y[k][j].is_zero()) out[i][j] += y[k][j] * mpq_class(x(i, k));
    }
  return out;
}

}  // namespace detail

/// Lattice Sigma = Phi(Z^{m+1}) with Pi Phi = Phi Xi, Xi the companion matrix of
/// the characteristic polynomial of Pi.
///
/// The rows l(nu) = (1, nu, ..., nu^m) are left eigenvectors of the companion
/// matrix, so with D = diag(nodes) and Vand the matrix with these rows,
/// Vand Xi = D Vand. Pi is diagonalized by the unit upper triangular V_Pi, and
/// Phi = V_Pi Vand intertwines. With reduce = false the LLL step is skipped
/// and the reduced basis is the standard one.
inline LatticeSigma build_lattice(const ModelData& md, const QMatrix& pi, const std::set<long>& y, bool reduce = true) {
  const int n = static_cast<int>(pi.size());
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("build_lattice: |Y| must equal dim(R x L)");
  LatticeSigma sig;
  sig.char_poly = char_poly_from_exponents(y, md.ctx);
  sig.xi = companion_matrix(sig.char_poly);
  sig.xi_inverse = unimodular_inverse(sig.xi);

  for (int i = 0; i < n; ++i) sig.nodes.push_back(pi[i][i]);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (sig.nodes[i] == sig.nodes[j]) throw std::invalid_argument("build_lattice: repeated eigenvalue of Pi");
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      if (i != j && !pi[i][j].is_zero()) throw std::invalid_argument("build_lattice: Pi must be triangular");
  for (const auto& nu : sig.nodes)
    if (!sig.char_poly.evaluate(nu).is_zero())
      throw std::invalid_argument("build_lattice: spectrum of Pi differs from {q^a : a in Y}");

  const long d = md.ctx.d();
  sig.rho.assign(static_cast<std::size_t>(n), md.ctx.zero());
  for (int i = 1; i < n; ++i) sig.rho[i] = pi[0][i] / (sig.nodes[i] - sig.nodes[0]);

  QMatrix vand = qmatrix_zero(n, n, d);
  for (int i = 0; i < n; ++i) {
    QFieldElement pw = md.ctx.one();
    for (int j = 0; j < n; ++j) {
      vand[i][j] = pw;
      pw *= sig.nodes[i];
    }
  }
  // Phi = (I + e_0 rho^T) Vand: row 0 picks up sum_i rho_i row_i.
  sig.phi = vand;
  for (int i = 1; i < n; ++i)
    if (!sig.rho[i].is_zero())
      for (int j = 0; j < n; ++j) sig.phi[0][j] += sig.rho[i] * vand[i][j];

  // Vand^-1 has the Lagrange basis coefficient vectors as columns.
  QMatrix vinv = qmatrix_zero(n, n, d);
  for (int j = 0; j < n; ++j) {
    const auto quotient = detail::deflate(sig.char_poly, sig.nodes[j]);
    QFieldElement denom = md.ctx.zero();
    QFieldElement pw = md.ctx.one();
    for (const auto& c : quotient) {
      denom += c * pw;
      pw *= sig.nodes[j];
    }
    const QFieldElement inv = denom.inverse();
    for (int i = 0; i < n; ++i) vinv[i][j] = quotient[i] * inv;
  }
  // Phi^-1 = Vand^-1 (I - e_0 rho^T).
  sig.phi_inverse = vinv;
  for (int j = 1; j < n; ++j)
    if (!sig.rho[j].is_zero())
      for (int i = 0; i < n; ++i) sig.phi_inverse[i][j] -= vinv[i][0] * sig.rho[j];

  sig.phi_d = to_double(sig.phi);
  sig.phi_inverse_d = to_double(sig.phi_inverse);
  auto& red = sig.reduced;
  red.u = reduce ? detail::lll_reduce(sig.phi) : IntMatrix::identity(n);
  red.u_inverse = unimodular_inverse(red.u);
  red.phi = sig.phi * red.u;
  red.xi = red.u_inverse * sig.xi * red.u;
  red.xi_inverse = red.u_inverse * sig.xi_inverse * red.u;
  red.phi_d = to_double(red.phi);
  red.phi_inverse_d = to_double(detail::left_multiply(red.u_inverse, sig.phi_inverse));
  const double big = red.phi_d.cwiseAbs().maxCoeff() * red.phi_inverse_d.cwiseAbs().maxCoeff();
  sig.double_usable = red.phi_d.allFinite() && red.phi_inverse_d.allFinite() && big < 1e10;
  return sig;
}

/// Standard lattice coordinates U n of the vector with reduced coordinates n.
inline std::vector<long> from_reduced(const LatticeSigma& sig, const std::vector<long>& n) {
  std::vector<mpz_class> v(n.begin(), n.end());
  std::vector<long> out;
  for (const auto& x : sig.reduced.u * v) {
    if (!x.fits_slong_p()) throw std::overflow_error("from_reduced: coordinate too large");
    out.push_back(x.get_si());
  }
  return out;
}

/// The lattice element Phi n as (r, u) with u in L.
inline HElement lattice_element(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig,
                                const std::vector<long>& n) {
  const int dim = static_cast<int>(sig.phi.size());
  if (static_cast<int>(n.size()) != dim) throw std::invalid_argument("lattice_element: wrong coordinate count");
  std::vector<QFieldElement> coords(static_cast<std::size_t>(dim), md.ctx.zero());
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      if (n[j] != 0) coords[i] += sig.phi[i][j] * mpq_class(n[j]);
  HElement h;
  h.r = coords[0].to_double();
  if (l.closed_form) {
    h.u = ESolution::zero_closed(md.m, md.ctx.d());
    for (int i = 1; i < dim; ++i)
      if (!coords[i].is_zero()) h.u += l.basis[i - 1].scaled(coords[i]);
  } else {
    h.u = l.basis[0].scaled(coords[1].to_double());
    for (int i = 2; i < dim; ++i) h.u += l.basis[i - 1].scaled(coords[i].to_double());
  }
  return h;
}

/// The exact R-component and closed-form u of Phi n; closed-form models only.
struct ExactHElement {
  QFieldElement r;
  ESolution u;
};

inline ExactHElement lattice_element_exact(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig,
                                           const std::vector<mpz_class>& n) {
  if (!l.closed_form) throw std::invalid_argument("lattice_element_exact: closed-form models only");
  const int dim = static_cast<int>(sig.phi.size());
  std::vector<QFieldElement> coords(static_cast<std::size_t>(dim), md.ctx.zero());
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      if (n[j] != 0) coords[i] += sig.phi[i][j] * mpq_class(n[j]);
  ExactHElement h{coords[0], ESolution::zero_closed(md.m, md.ctx.d())};
  for (int i = 1; i < dim; ++i)
    if (!coords[i].is_zero()) h.u += l.basis[i - 1].scaled(coords[i]);
  return h;
}

/// Pi(r, u) computed from its definition, exactly.
inline ExactHElement conjugate_exact(const ModelData& md, const GammaHat& g, const ExactHElement& h) {
  ExactHElement out{h.r * md.ctx.q_inverse(), h.u.ct(md)};
  out.r += md.ctx.rational(2) * exact_omega_with(md, out.u, g);
  return out;
}

// ---------------------------------------------------------------------------
// Certification of the quotient conditions.

using QuotientCertificate = CheckList;

struct QuotientOptions {
  int evaluation_samples = 20;
  double condition_bound = 1e12;
  double numeric_tolerance = 1e-8;
  bool verify_phi_inverse = true;
};

namespace detail {

// Columns u_i(t), u_i'(t) for i in S.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> evaluate_L(const LagrangianL& l, double t) {
  const int m = static_cast<int>(l.basis.size());
  Eigen::MatrixXd u(m, m), du(m, m);
  for (int j = 0; j < m; ++j) {
    const auto [x, dx] = l.basis[j].evaluate(t);
    u.col(j) = x;
    du.col(j) = dx;
  }
  return {u, du};
}

}  // namespace detail

inline QuotientCertificate certify_ACE(const ModelData& md, const LagrangianL& l, const QMatrix& pi,
                                       const LatticeSigma& sig, const QuotientOptions& opt = {}) {
  QuotientCertificate cert;
  const int m = md.m;
  const double q = md.ctx.q_double();

  // (A)
  bool distinct = true;
  for (std::size_t i = 0; i < l.eigenvalues.size(); ++i)
    for (std::size_t j = i + 1; j < l.eigenvalues.size(); ++j)
      if (l.eigenvalues[i] == l.eigenvalues[j]) distinct = false;
  cert.exact("(A) dim L = n-2", static_cast<int>(l.basis.size()) == m && distinct,
             "basis of CT-eigenvectors with distinct eigenvalues");

  // (B)
  if (l.closed_form) {
    bool inv = true;
    for (std::size_t i = 0; i < l.basis.size(); ++i)
      if (!(l.basis[i].ct(md) - l.basis[i].scaled(l.eigenvalues[i])).is_exact_zero()) inv = false;
    cert.exact("(B) CT leaves L invariant", inv);
  } else {
    double worst = 0.0;
    const Eigen::VectorXd c = md.c_diagonal_double();
    for (std::size_t i = 0; i < l.basis.size(); ++i) {
      const double lam = l.eigenvalues[i].to_double();
      for (double t : log_spaced(1.0, q, 5)) {
        const Eigen::VectorXd u = l.basis[i].evaluate(t).first;
        const Eigen::VectorXd uq = l.basis[i].evaluate(t / q).first;
        worst = std::max(worst, (c.cwiseProduct(uq) - lam * u).cwiseAbs().maxCoeff() /
                                    std::max(1.0, lam * u.cwiseAbs().maxCoeff()));
      }
    }
    cert.numeric("(B) CT leaves L invariant", worst, opt.numeric_tolerance);
  }

  // (C)
  cert.exact("(C) Xi in GL(m+1,Z)", abs(determinant(sig.xi)) == 1 && sig.xi * sig.xi_inverse == IntMatrix::identity(m + 1));
  const QMatrix lhs = pi * sig.phi;
  const QMatrix rhs = sig.phi * sig.xi;
  cert.exact("(C) Pi Phi = Phi Xi", lhs == rhs, "exact in Q(sqrt d)");
  bool nodes_distinct = true;
  for (std::size_t i = 0; i < sig.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < sig.nodes.size(); ++j)
      if (sig.nodes[i] == sig.nodes[j]) nodes_distinct = false;
  if (opt.verify_phi_inverse) {
    cert.exact("(C) Phi invertible", nodes_distinct && sig.phi * sig.phi_inverse == qmatrix_identity(m + 1, md.ctx.d()),
               "Phi Phi^-1 = I exactly");
  } else {
    cert.exact("(C) Phi invertible", nodes_distinct, "Vandermonde nodes distinct, unit triangular factor");
  }

  // (D)
  if (l.closed_form) {
    bool zero = true;
    for (std::size_t i = 0; i < l.basis.size(); ++i)
      for (std::size_t j = i + 1; j < l.basis.size(); ++j) {
        const auto v = omega_exact(md, l.basis[i], l.basis[j]);
        if (!v || !v->is_zero()) zero = false;
      }
    cert.exact("(D) Omega vanishes on L", zero);
  } else {
    double worst = 0.0;
    for (std::size_t i = 0; i < l.basis.size(); ++i)
      for (std::size_t j = i + 1; j < l.basis.size(); ++j)
        worst = std::max(worst, std::abs(omega_at(md, l.basis[i], l.basis[j], 1.0)));
    cert.numeric("(D) Omega vanishes on L", worst, opt.numeric_tolerance);
  }

  // (E)
  bool triangular = true;
  double worst_cond = 0.0;
  for (double t : log_spaced(1.0 / q, q, opt.evaluation_samples)) {
    const Eigen::MatrixXd u = detail::evaluate_L(l, t).first;
    for (int i = 0; i < m; ++i) {
      if (!(u(i, i) > 0.0)) triangular = false;
      for (int j = 0; j < i; ++j)
        if (u(i, j) != 0.0) triangular = false;
    }
    // Basis vectors of L have arbitrary scale, so columns are equilibrated.
    const Eigen::MatrixXd eq = u * u.colwise().norm().cwiseInverse().asDiagonal();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(eq);
    const auto& sv = svd.singularValues();
    worst_cond = std::max(worst_cond, sv(0) / sv(sv.size() - 1));
  }
  cert.exact("(E) evaluation upper triangular, positive diagonal", triangular,
             std::to_string(opt.evaluation_samples) + " log-spaced t in [1/q, q]");
  cert.numeric("(E) evaluation condition number", worst_cond, opt.condition_bound, "column-equilibrated");
  return cert;
}

/// Sigma lies in the Abelian subgroup R x L: the skew part Omega of the group
/// law vanishes on lattice basis vectors. Exact; closed-form models only.
inline bool lattice_is_abelian(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig) {
  const int dim = static_cast<int>(sig.phi.size());
  std::vector<ExactHElement> basis;
  for (int j = 0; j < dim; ++j) {
    std::vector<mpz_class> n(static_cast<std::size_t>(dim), 0);
    n[j] = 1;
    basis.push_back(lattice_element_exact(md, l, sig, n));
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      const auto v = omega_exact(md, basis[i].u, basis[j].u);
      if (!v || !v->is_zero()) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// Words, normal forms, canonical representatives.

struct Generator {
  enum class Kind { gamma_hat, gamma_hat_inverse, lattice };
  Kind kind = Kind::lattice;
  std::vector<long> n;  // lattice coordinates when kind == lattice

  static Generator hat() { return {Kind::gamma_hat, {}}; }
  static Generator hat_inverse() { return {Kind::gamma_hat_inverse, {}}; }
  static Generator sigma(std::vector<long> coords) { return {Kind::lattice, std::move(coords)}; }
};

/// word = gamma-hat^r sigma_n.
struct NormalForm {
  long r = 0;
  std::vector<mpz_class> n;
  friend bool operator==(const NormalForm&, const NormalForm&) = default;
};

/// Pushes every gamma-hat to the left using gamma-hat^-1 sigma gamma-hat =
/// Pi^-1(sigma) and gamma-hat sigma gamma-hat^-1 = Pi(sigma), which act on
/// lattice coordinates by Xi^-1 and Xi.
inline NormalForm normal_form(const LatticeSigma& sig, const std::vector<Generator>& word) {
  const int dim = sig.xi.size();
  NormalForm nf;
  nf.n.assign(static_cast<std::size_t>(dim), 0);
  for (const auto& g : word) {
    switch (g.kind) {
      case Generator::Kind::gamma_hat:
        nf.r += 1;
        nf.n = sig.xi_inverse * nf.n;
        break;
      case Generator::Kind::gamma_hat_inverse:
        nf.r -= 1;
        nf.n = sig.xi * nf.n;
        break;
      case Generator::Kind::lattice:
        if (static_cast<int>(g.n.size()) != dim) throw std::invalid_argument("normal_form: wrong coordinate count");
        for (int i = 0; i < dim; ++i) nf.n[i] += g.n[i];
        break;
    }
  }
  return nf;
}

/// The gamma of a normal form as an element of H.
inline HElement normal_form_element(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig,
                                    const NormalForm& nf) {
  std::vector<long> n;
  for (const auto& v : nf.n) {
    if (!v.fits_slong_p()) throw std::overflow_error("normal_form_element: lattice coordinate too large");
    n.push_back(v.get_si());
  }
  return lattice_element(md, l, sig, n);
}

/// Chart of the equivariant diffeomorphism: (t, s, v) -> (t, x) with
/// x = (z, c), v = sum c_i u_i(t), z = s + <u'(t), u(t)>.
inline Eigen::VectorXd chart_coordinates(const ModelData& md, const LagrangianL& l, const Point& p) {
  require_positive_t(p.t, "chart_coordinates");
  const auto [u, du] = detail::evaluate_L(l, p.t);
  const Eigen::VectorXd c = u.partialPivLu().solve(p.v);
  Eigen::VectorXd x(md.m + 1);
  x(0) = p.s + inner(md, du * c, p.v);
  x.tail(md.m) = c;
  return x;
}

inline Point from_chart(const ModelData& md, const LagrangianL& l, double t, const Eigen::VectorXd& x) {
  const auto [u, du] = detail::evaluate_L(l, t);
  const Eigen::VectorXd c = x.tail(md.m);
  Point p;
  p.t = t;
  p.v = u * c;
  p.s = x(0) - inner(md, du * c, p.v);
  return p;
}

struct CanonicalForm {
  Point representative;
  double t = 1.0;                  // in [1, q)
  Eigen::VectorXd lattice_coords;  // in [0, 1)^{m+1}, reduced basis
  long r = 0;                      // gamma-hat power applied
};

/// Canonical representative of the orbit of p under the group generated by
/// gamma-hat and Sigma: gamma-hat^r moves t into [1, q), then the chart
/// coordinates are reduced modulo Sigma in the reduced lattice basis.
/// Requires u-hat = 0.
inline CanonicalForm canonicalize(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig,
                                  const GammaHat& g, const Point& p) {
  require_positive_t(p.t, "canonicalize");
  if (g.u_hat) throw std::invalid_argument("canonicalize: supported for u-hat = 0");
  if (!sig.double_usable) throw std::domain_error("canonicalize: lattice basis is too ill-conditioned in doubles");
  const int dim = md.m + 1;
  const double lq = md.ctx.log_q();
  CanonicalForm out;
  out.r = -static_cast<long>(std::floor(std::log(p.t) / lq));
  double t = p.t * std::pow(md.ctx.q_double(), static_cast<double>(out.r));
  // Guard the half-open interval against rounding at the endpoints.
  if (t >= md.ctx.q_double()) out.r -= 1;
  if (t < 1.0) out.r += 1;
  const auto& red = sig.reduced;
  Point x = p;
  for (long i = 0; i < out.r; ++i) x = act(md, g, x);
  for (long i = 0; i < -out.r; ++i) x = act_inverse(md, g, x);
  Eigen::VectorXd y = red.phi_inverse_d * chart_coordinates(md, l, x);
  y = y.array() - y.array().floor();
  out.lattice_coords = y;
  for (int i = 0; i < dim; ++i)
    if (out.lattice_coords(i) >= 1.0) out.lattice_coords(i) = 0.0;
  out.t = x.t;
  out.representative = from_chart(md, l, x.t, red.phi_d * out.lattice_coords);
  return out;
}

/// Distance between canonical forms: |log t| difference plus torus distance.
inline double canonical_distance(const CanonicalForm& a, const CanonicalForm& b) {
  double d = std::abs(std::log(a.t) - std::log(b.t));
  for (int i = 0; i < a.lattice_coords.size(); ++i) {
    const double diff = std::abs(a.lattice_coords(i) - b.lattice_coords(i));
    d = std::max(d, std::min(diff, 1.0 - diff));
  }
  return d;
}

/// Applies gamma-hat^r sigma_n geometrically.
inline Point apply_normal_form(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig, const GammaHat& g,
                               const NormalForm& nf, const Point& p) {
  Point x = act(md, normal_form_element(md, l, sig, nf), p);
  for (long i = 0; i < nf.r; ++i) x = act(md, g, x);
  for (long i = 0; i < -nf.r; ++i) x = act_inverse(md, g, x);
  return x;
}

/// Applies a word g_1 g_2 ... g_k, i.e. g_k first.
inline Point apply_word(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig, const GammaHat& g,
                        const std::vector<Generator>& word, const Point& p) {
  Point x = p;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    switch (it->kind) {
      case Generator::Kind::gamma_hat:
        x = act(md, g, x);
        break;
      case Generator::Kind::gamma_hat_inverse:
        x = act_inverse(md, g, x);
        break;
      case Generator::Kind::lattice:
        x = act(md, lattice_element(md, l, sig, it->n), x);
        break;
    }
  }
  return x;
}

}  // namespace ecs
