#pragma once

// GMP floating-point evaluation of the group action, the metric, isometry
// residuals and canonical forms for closed-form (homogeneous) models. Lattice
// elements of the larger models move points by amounts that leave no
// significant digits in double precision.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "ecs/quotient.hpp"

namespace ecs::precise {

using Real = mpf_class;
using Vec = std::vector<Real>;
using Mat = std::vector<Vec>;

/// Model constants at a fixed precision.
class Context {
 public:
  Context(const ModelData& md, mp_bitcnt_t bits)
      : md_(&md), prec_(bits), root_d_(0, bits), q_(0, bits), f_const_(0, bits) {
    if (!md.f.is_homogeneous()) throw std::invalid_argument("precise::Context: closed-form models only");
    // Assignment keeps the precision of the target.
    root_d_ = sqrt(Real(md.ctx.d(), prec_));
    q_ = real(md.ctx.q());
    const long k = md.f.homogeneous().k;
    f_const_ = Real(k * k - 1, prec_) / 4;
    for (const auto& c : md.c_diagonal()) c_.push_back(real(c));
  }

  const ModelData& model() const { return *md_; }
  mp_bitcnt_t precision() const { return prec_; }
  int m() const { return md_->m; }
  const Real& q() const { return q_; }
  const Vec& c_diagonal() const { return c_; }

  Real zero() const { return Real(0, prec_); }
  Real real(double x) const { return Real(x, prec_); }
  Real real(const mpz_class& x) const { return Real(x, prec_); }
  Real real(const QFieldElement& x) const { return Real(x.a(), prec_) + Real(x.b(), prec_) * root_d_; }

  /// t^e for integer e.
  Real power(const Real& t, long e) const {
    Real out(0, prec_);
    mpf_pow_ui(out.get_mpf_t(), t.get_mpf_t(), static_cast<unsigned long>(e < 0 ? -e : e));
    if (e < 0) out = Real(1, prec_) / out;
    return out;
  }

  /// <x, y> = eps sum x_i y_(m-1-i).
  Real inner(const Vec& x, const Vec& y) const {
    Real s(0, prec_);
    const int m = md_->m;
    for (int i = 0; i < m; ++i) s += x[i] * y[m - 1 - i];
    return md_->eps == 1 ? s : Real(-s);
  }

  Real f(const Real& t) const { return f_const_ / (t * t); }

 private:
  const ModelData* md_;
  mp_bitcnt_t prec_;
  Real root_d_, q_, f_const_;
  Vec c_;
};

struct Point {
  Real t, s;
  Vec v;
};

inline Point from_coordinates(const Context&, const Vec& x) {
  return {x[0], x[1], Vec(x.begin() + 2, x.end())};
}

inline Vec to_coordinates(const Point& p) {
  Vec x{p.t, p.s};
  x.insert(x.end(), p.v.begin(), p.v.end());
  return x;
}

inline Vec from_double(const Context& ctx, const Eigen::VectorXd& x) {
  Vec out;
  for (int i = 0; i < x.size(); ++i) out.push_back(ctx.real(x(i)));
  return out;
}

/// Value and derivative of a power sum at t.
inline std::pair<Real, Real> evaluate(const Context& ctx, const PowerSum& p, const Real& t) {
  Real v = ctx.zero(), dv = ctx.zero();
  for (const auto& [e, c] : p.terms()) {
    const Real ce = ctx.real(c) * ctx.power(t, e);
    v += ce;
    dv += ce * e / t;
  }
  return {v, dv};
}

/// u(t), u'(t) for a closed-form solution.
inline std::pair<Vec, Vec> evaluate(const Context& ctx, const ESolution& u, const Real& t) {
  if (!u.is_closed_form()) throw std::invalid_argument("precise::evaluate: closed-form solutions only");
  Vec val, der;
  for (const auto& c : u.components()) {
    auto [v, dv] = evaluate(ctx, c, t);
    val.push_back(v);
    der.push_back(dv);
  }
  return {val, der};
}

inline void require_positive(const Real& t, const char* where) {
  if (sgn(t) <= 0) throw std::domain_error(std::string(where) + ": t must be positive");
}

/// gamma(t, s, v) = (t, -<u'(t), 2v + u(t)> + r + s, v + u(t)).
inline Point act(const Context& ctx, const ExactHElement& h, const Point& x) {
  require_positive(x.t, "precise::act");
  const auto [u, du] = evaluate(ctx, h.u, x.t);
  Point out{x.t, x.s + ctx.real(h.r), x.v};
  Vec w(x.v.size(), ctx.zero());
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    w[i] = 2 * x.v[i] + u[i];
    out.v[i] += u[i];
  }
  out.s -= ctx.inner(du, w);
  return out;
}

/// gamma-hat(t, s, v) = (qt, -<w(qt), 2Cv + u(qt)> + r + s/q, Cv + u(qt)).
inline Point act(const Context& ctx, const GammaHat& g, const Point& x) {
  require_positive(x.t, "precise::act");
  Point out{ctx.q() * x.t, ctx.real(g.r_hat) + x.s / ctx.q(), x.v};
  for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = ctx.c_diagonal()[i] * x.v[i];
  if (g.u_hat) {
    const auto [u, du] = evaluate(ctx, *g.u_hat, out.t);
    Vec w(x.v.size(), ctx.zero());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      w[i] = 2 * out.v[i] + u[i];
      out.v[i] += u[i];
    }
    out.s -= ctx.inner(du, w);
  }
  return out;
}

/// Inverse of gamma-hat; u-hat = 0 only.
inline Point act_inverse(const Context& ctx, const GammaHat& g, const Point& x) {
  require_positive(x.t, "precise::act_inverse");
  if (g.u_hat) throw std::invalid_argument("precise::act_inverse: supported for u-hat = 0");
  Point out{x.t / ctx.q(), ctx.q() * (x.s - ctx.real(g.r_hat)), x.v};
  for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = x.v[i] / ctx.c_diagonal()[i];
  return out;
}

/// kappa dt^2 + dt ds + <dv, dv> in coordinates (t, s, v).
inline Mat metric(const Context& ctx, const Vec& x) {
  const int m = ctx.m(), n = m + 2;
  require_positive(x[0], "precise::metric");
  const Vec v(x.begin() + 2, x.end());
  Mat g(n, Vec(n, ctx.zero()));
  // <Av, v> = <v_m e_1, v> = eps v_m v_m.
  const Real av = ctx.model().eps * v[m - 1] * v[m - 1];
  g[0][0] = ctx.f(x[0]) * ctx.inner(v, v) + av;
  g[0][1] = g[1][0] = ctx.real(0.5);
  for (int i = 0; i < m; ++i) g[2 + i][2 + m - 1 - i] = ctx.real(static_cast<double>(ctx.model().eps));
  return g;
}

using Map = std::function<Vec(const Vec&)>;

/// Same definition as the double-precision isometry_residual: max over
/// entries of |F*g - g| / max(1, scale) with the Jacobian from a fourth-order
/// central stencil of relative step `step`.
inline double isometry_residual(const Context& ctx, const Map& map, const Vec& x, double step = 1e-6) {
  const int n = static_cast<int>(x.size());
  const Vec y = map(x);
  require_positive(y[0], "precise::isometry_residual");
  Mat jac(n, Vec(n, ctx.zero()));
  for (int i = 0; i < n; ++i) {
    Real h = ctx.real(step) * (abs(x[i]) > 1 ? Real(abs(x[i])) : ctx.real(1.0));
    auto at = [&](int k) {
      Vec z = x;
      z[i] += k * h;
      return map(z);
    };
    const Vec p1 = at(1), m1 = at(-1), p2 = at(2), m2 = at(-2);
    for (int a = 0; a < n; ++a) jac[a][i] = (8 * (p1[a] - m1[a]) - (p2[a] - m2[a])) / (12 * h);
  }
  const Mat g = metric(ctx, x), gy = metric(ctx, y);
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Real pulled = ctx.zero(), scale = abs(g[a][b]);
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          if (sgn(gy[c][d]) == 0) continue;
          const Real term = jac[c][a] * gy[c][d] * jac[d][b];
          pulled += term;
          scale += abs(term);
        }
      if (scale < 1) scale = 1;
      worst = std::max(worst, Real(abs(pulled - g[a][b]) / scale).get_d());
    }
  return worst;
}

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline Vec solve(Mat a, Vec b) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (abs(a[i][k]) > abs(a[piv][k])) piv = i;
    if (sgn(a[piv][k]) == 0) throw std::domain_error("precise::solve: singular matrix");
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (int i = k + 1; i < n; ++i) {
      const Real f = a[i][k] / a[k][k];
      for (int j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  Vec x(b);
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= a[i][j] * x[j];
    x[i] /= a[i][i];
  }
  return x;
}

/// U(t), U'(t) with the basis of L as columns.
inline std::pair<Mat, Mat> evaluate_L(const Context& ctx, const LagrangianL& l, const Real& t) {
  const int m = ctx.m();
  Mat u(m, Vec(m, ctx.zero())), du = u;
  for (int j = 0; j < m; ++j) {
    const auto [x, dx] = evaluate(ctx, l.basis[j], t);
    for (int i = 0; i < m; ++i) {
      u[i][j] = x[i];
      du[i][j] = dx[i];
    }
  }
  return {u, du};
}

inline Vec multiply(const Mat& a, const Vec& x) {
  Vec out(a.size(), Real(0, x.empty() ? 64 : x[0].get_prec()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += a[i][j] * x[j];
  return out;
}

/// Chart (t, s, v) -> (z, c) with v = U(t) c, z = s + <U'(t) c, v>.
inline Vec chart_coordinates(const Context& ctx, const LagrangianL& l, const Point& p) {
  const auto [u, du] = evaluate_L(ctx, l, p.t);
  const Vec c = solve(u, p.v);
  Vec x{p.s + ctx.inner(multiply(du, c), p.v)};
  x.insert(x.end(), c.begin(), c.end());
  return x;
}

inline Point from_chart(const Context& ctx, const LagrangianL& l, const Real& t, const Vec& x) {
  const auto [u, du] = evaluate_L(ctx, l, t);
  const Vec c(x.begin() + 1, x.end());
  Point p{t, x[0], multiply(u, c)};
  p.s -= ctx.inner(multiply(du, c), p.v);
  return p;
}

struct CanonicalForm {
  Point representative;
  Real t;              // in [1, q)
  Vec lattice_coords;  // in [0, 1)^{m+1}, reduced basis
  long r = 0;          // gamma-hat power applied
};

/// Exact matrices of the reduced basis and its inverse at the context precision.
struct ReducedReal {
  Mat phi, phi_inverse;
};

inline ReducedReal reduced_real(const Context& ctx, const LatticeSigma& sig) {
  const auto& red = sig.reduced;
  const QMatrix inv = detail::left_multiply(red.u_inverse, sig.phi_inverse);
  ReducedReal out;
  for (std::size_t i = 0; i < red.phi.size(); ++i) {
    Vec a, b;
    for (std::size_t j = 0; j < red.phi.size(); ++j) {
      a.push_back(ctx.real(red.phi[i][j]));
      b.push_back(ctx.real(inv[i][j]));
    }
    out.phi.push_back(a);
    out.phi_inverse.push_back(b);
  }
  return out;
}

/// Same construction as ecs::canonicalize: gamma-hat^r moves t into [1, q),
/// then chart coordinates are reduced modulo Sigma in the reduced basis.
inline CanonicalForm canonicalize(const Context& ctx, const LagrangianL& l, const ReducedReal& red,
                                  const GammaHat& g, const Point& p) {
  require_positive(p.t, "precise::canonicalize");
  if (g.u_hat) throw std::invalid_argument("precise::canonicalize: supported for u-hat = 0");
  CanonicalForm out{p, ctx.zero(), {}, 0};
  Point x = p;
  const Real one = ctx.real(1.0);
  while (x.t >= ctx.q()) {
    x = act_inverse(ctx, g, x);
    --out.r;
  }
  while (x.t < one) {
    x = act(ctx, g, x);
    ++out.r;
  }
  Vec y = multiply(red.phi_inverse, chart_coordinates(ctx, l, x));
  for (auto& c : y) {
    c -= floor(c);
    if (c >= one) c = ctx.zero();
  }
  out.lattice_coords = y;
  out.t = x.t;
  out.representative = from_chart(ctx, l, x.t, multiply(red.phi, y));
  return out;
}

/// max(|t_a - t_b| / t_a, torus distance of the lattice coordinates).
inline double canonical_distance(const CanonicalForm& a, const CanonicalForm& b) {
  double d = Real(abs(a.t - b.t) / a.t).get_d();
  for (std::size_t i = 0; i < a.lattice_coords.size(); ++i) {
    const double diff = Real(abs(a.lattice_coords[i] - b.lattice_coords[i])).get_d();
    d = std::max(d, std::min(diff, 1.0 - diff));
  }
  return d;
}

/// The lattice element with coordinates n in the reduced basis, exactly.
inline ExactHElement reduced_lattice_element(const ModelData& md, const LagrangianL& l, const LatticeSigma& sig,
                                             const std::vector<long>& n) {
  const std::vector<mpz_class> nz(n.begin(), n.end());
  return lattice_element_exact(md, l, sig, sig.reduced.u * nz);
}

/// Bits sufficient for the lattice of sig: the reduced basis entries span
/// `exponent_spread` binary orders, and points are moved by that much.
inline mp_bitcnt_t precision_for(const LatticeSigma& sig) {
  return static_cast<mp_bitcnt_t>(256 + 4 * detail::exponent_spread(sig.reduced.phi));
}

}  // namespace ecs::precise
