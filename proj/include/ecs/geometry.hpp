#pragma once

// Numerical differential geometry of g = kappa dt^2 + dt ds + <.,.> on the
// chart (t, s, v): curvature, Weyl tensor, parallelism residuals, Olszak
// distribution, isometry residuals and geodesics.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "ecs/model.hpp"

namespace ecs {

/// Value, first and second derivative of a function of t.
using Jet1 = std::function<std::array<double, 3>(double)>;

/// Coordinates x = (t, s, v_1, ..., v_m). kappa = phi(t) (f(t)<v,v> + <Av,v>);
/// phi = 1 for the actual models and is only varied by test harnesses.
struct MetricPatch {
  int m = 0;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd a;
  Jet1 f;
  Jet1 phi;

  int dim() const { return m + 2; }

  static MetricPatch from_model(const ModelData& md) {
    MetricPatch p;
    p.m = md.m;
    p.gram = md.gram_matrix();
    p.a = md.a_matrix();
    const FunctionChoice fc = md.f;
    p.f = [fc](double t) { return fc.derivatives(t); };
    return p;
  }

  /// kappa, its gradient and Hessian in all n coordinates.
  struct KappaJet {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };

  KappaJet kappa_jet(const Eigen::VectorXd& x) const {
    const int n = dim();
    const double t = x(0);
    if (!(t > 0.0)) throw std::domain_error("MetricPatch: t must be positive");
    const Eigen::VectorXd v = x.tail(m);
    const auto fj = f ? f(t) : std::array<double, 3>{0.0, 0.0, 0.0};
    const auto pj = phi ? phi(t) : std::array<double, 3>{1.0, 0.0, 0.0};
    const Eigen::VectorXd gv = gram * v;
    const Eigen::MatrixXd ga = gram * a;
    const Eigen::MatrixXd gas = 0.5 * (ga + ga.transpose());
    const double vv = v.dot(gv);
    const double ava = v.dot(gas * v);
    // base = f <v,v> + <Av,v>
    const double base = fj[0] * vv + ava;
    const double base_t = fj[1] * vv;
    const double base_tt = fj[2] * vv;
    const Eigen::VectorXd base_v = 2.0 * (fj[0] * gv + gas * v);
    const Eigen::VectorXd base_tv = 2.0 * fj[1] * gv;
    const Eigen::MatrixXd base_vv = 2.0 * (fj[0] * gram + gas);

    KappaJet k;
    k.value = pj[0] * base;
    k.grad = Eigen::VectorXd::Zero(n);
    k.hess = Eigen::MatrixXd::Zero(n, n);
    k.grad(0) = pj[1] * base + pj[0] * base_t;
    k.grad.tail(m) = pj[0] * base_v;
    k.hess(0, 0) = pj[2] * base + 2.0 * pj[1] * base_t + pj[0] * base_tt;
    const Eigen::VectorXd tv = pj[1] * base_v + pj[0] * base_tv;
    k.hess.block(0, 2, 1, m) = tv.transpose();
    k.hess.block(2, 0, m, 1) = tv;
    k.hess.bottomRightCorner(m, m) = pj[0] * base_vv;
    return k;
  }

  Eigen::MatrixXd metric(const Eigen::VectorXd& x) const {
    const int n = dim();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    g(0, 0) = kappa_jet(x).value;
    g(0, 1) = g(1, 0) = 0.5;
    g.bottomRightCorner(m, m) = gram;
    return g;
  }
};

// ---------------------------------------------------------------------------
// Harness metrics.

namespace harness {

inline MetricPatch flat(const ModelData& md) {
  MetricPatch p = MetricPatch::from_model(md);
  p.f = nullptr;
  p.a = Eigen::MatrixXd::Zero(md.m, md.m);
  return p;
}

/// A = 0 leaves only the pure-trace part of the Hessian of kappa: W = 0.
inline MetricPatch conformally_flat(const ModelData& md) {
  MetricPatch p = MetricPatch::from_model(md);
  p.a = Eigen::MatrixXd::Zero(md.m, md.m);
  return p;
}

/// f constant and A = 0: a locally symmetric metric.
inline MetricPatch symmetric(const ModelData& md, double c = 1.0) {
  MetricPatch p = MetricPatch::from_model(md);
  p.a = Eigen::MatrixXd::Zero(md.m, md.m);
  p.f = [c](double) { return std::array<double, 3>{c, 0.0, 0.0}; };
  return p;
}

/// A e_m = e_1, A e_{m-1} = e_2; needs m >= 4.
inline MetricPatch rank_two(const ModelData& md) {
  if (md.m < 4) throw std::invalid_argument("rank_two harness needs m >= 4");
  MetricPatch p = MetricPatch::from_model(md);
  p.a = Eigen::MatrixXd::Zero(md.m, md.m);
  p.a(0, md.m - 1) = 1.0;
  p.a(1, md.m - 2) = 1.0;
  return p;
}

/// kappa multiplied by 1 + eps t.
inline MetricPatch perturbed(const ModelData& md, double eps = 0.01) {
  MetricPatch p = MetricPatch::from_model(md);
  p.phi = [eps](double t) { return std::array<double, 3>{1.0 + eps * t, eps, 0.0}; };
  return p;
}

}  // namespace harness

// ---------------------------------------------------------------------------
// Tensors.

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

  int dim() const { return n_; }
  double& operator()(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return data_[index(a, b, c, d)]; }
  const std::vector<double>& data() const { return data_; }

  double norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0.0;
    for (double x : data_) s = std::max(s, std::abs(x));
    return s;
  }

 private:
  std::size_t index(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * n_ + b) * n_ + c) * n_ + d;
  }
  int n_ = 0;
  std::vector<double> data_;
};

/// Christoffel symbols gamma[a](b, c) = Gamma^a_bc and, on request, their
/// derivatives dgamma[e][a](b, c) = d_e Gamma^a_bc, from analytic metric jets.
struct Connection {
  Eigen::MatrixXd g;
  Eigen::MatrixXd ginv;
  std::vector<Eigen::MatrixXd> gamma;
  std::vector<std::vector<Eigen::MatrixXd>> dgamma;
};

inline Connection connection_at(const MetricPatch& patch, const Eigen::VectorXd& x, bool derivatives = true) {
  const int n = patch.dim();
  const auto kj = patch.kappa_jet(x);
  Connection c;
  c.g = patch.metric(x);
  c.ginv = c.g.inverse();
  // Only g_tt varies: d_e g_ab = delta_a0 delta_b0 kappa_e.
  auto dg = [&](int e, int a, int b) { return a == 0 && b == 0 ? kj.grad(e) : 0.0; };
  auto ddg = [&](int e, int f, int a, int b) { return a == 0 && b == 0 ? kj.hess(e, f) : 0.0; };
  // L_dbc = d_b g_dc + d_c g_db - d_d g_bc
  auto lower = [&](int d, int b, int cc) { return dg(b, d, cc) + dg(cc, d, b) - dg(d, b, cc); };
  auto dlower = [&](int e, int d, int b, int cc) { return ddg(e, b, d, cc) + ddg(e, cc, d, b) - ddg(e, d, b, cc); };

  c.gamma.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int cc = 0; cc < n; ++cc) {
        double s = 0.0;
        for (int d = 0; d < n; ++d)
          if (c.ginv(a, d) != 0.0) s += c.ginv(a, d) * lower(d, b, cc);
        c.gamma[a](b, cc) = 0.5 * s;
      }
  if (!derivatives) return c;

  c.dgamma.assign(static_cast<std::size_t>(n), std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n)));
  for (int e = 0; e < n; ++e) {
    Eigen::MatrixXd dgm = Eigen::MatrixXd::Zero(n, n);
    dgm(0, 0) = kj.grad(e);
    const Eigen::MatrixXd dginv = -c.ginv * dgm * c.ginv;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc) {
          double s = 0.0;
          for (int d = 0; d < n; ++d) s += dginv(a, d) * lower(d, b, cc) + c.ginv(a, d) * dlower(e, d, b, cc);
          c.dgamma[e][a](b, cc) = 0.5 * s;
        }
  }
  return c;
}

/// R_abcd = g_ae R^e_bcd with R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z -
/// nabla_[X,Y] Z and R(d_c, d_d) d_b = R^a_bcd d_a.
inline Tensor4 riemann_lower(const Connection& c) {
  const int n = static_cast<int>(c.g.rows());
  Tensor4 up(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int cc = 0; cc < n; ++cc)
        for (int d = 0; d < n; ++d) {
          double s = c.dgamma[cc][a](d, b) - c.dgamma[d][a](cc, b);
          for (int e = 0; e < n; ++e) s += c.gamma[a](cc, e) * c.gamma[e](d, b) - c.gamma[a](d, e) * c.gamma[e](cc, b);
          up(a, b, cc, d) = s;
        }
  Tensor4 r(n);
  for (int a = 0; a < n; ++a)
    for (int e = 0; e < n; ++e) {
      if (c.g(a, e) == 0.0) continue;
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int d = 0; d < n; ++d) r(a, b, cc, d) += c.g(a, e) * up(e, b, cc, d);
    }
  return r;
}

inline Eigen::MatrixXd ricci(const Tensor4& r, const Eigen::MatrixXd& ginv) {
  const int n = r.dim();
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d)
      for (int a = 0; a < n; ++a)
        for (int cc = 0; cc < n; ++cc)
          if (ginv(a, cc) != 0.0) ric(b, d) += ginv(a, cc) * r(a, b, cc, d);
  return ric;
}

/// (h o k)_abcd = h_ac k_bd + h_bd k_ac - h_ad k_bc - h_bc k_ad.
inline double kulkarni_nomizu(const Eigen::MatrixXd& h, const Eigen::MatrixXd& k, int a, int b, int c, int d) {
  return h(a, c) * k(b, d) + h(b, d) * k(a, c) - h(a, d) * k(b, c) - h(b, c) * k(a, d);
}

inline Tensor4 weyl(const Tensor4& r, const Eigen::MatrixXd& ric, double scalar, const Eigen::MatrixXd& g) {
  const int n = r.dim();
  Tensor4 w(n);
  const double c1 = 1.0 / (n - 2);
  const double c2 = scalar / (2.0 * (n - 1) * (n - 2));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          w(a, b, c, d) = r(a, b, c, d) - c1 * kulkarni_nomizu(ric, g, a, b, c, d) + c2 * kulkarni_nomizu(g, g, a, b, c, d);
  return w;
}

struct CurvatureTensors {
  Connection connection;
  Tensor4 riemann;
  Eigen::MatrixXd ricci;
  double scalar = 0.0;
  Tensor4 weyl;
};

inline CurvatureTensors curvature_tensors(const MetricPatch& patch, const Eigen::VectorXd& x) {
  CurvatureTensors out;
  out.connection = connection_at(patch, x);
  out.riemann = riemann_lower(out.connection);
  out.ricci = ricci(out.riemann, out.connection.ginv);
  out.scalar = (out.connection.ginv.cwiseProduct(out.ricci)).sum();
  out.weyl = weyl(out.riemann, out.ricci, out.scalar, out.connection.g);
  return out;
}

// ---------------------------------------------------------------------------
// Residuals.

/// Max relative violation of the pair, skew and first Bianchi symmetries.
inline double symmetry_residual(const Tensor4& r) {
  const int n = r.dim();
  const double scale = std::max(r.max_abs(), 1e-300);
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          const double x = r(a, b, c, d);
          worst = std::max({worst, std::abs(x + r(b, a, c, d)), std::abs(x + r(a, b, d, c)), std::abs(x - r(c, d, a, b)),
                            std::abs(x + r(a, c, d, b) + r(a, d, b, c))});
        }
  return r.max_abs() == 0.0 ? 0.0 : worst / scale;
}

/// Max |g^ac W_abcd| relative to max |W|.
inline double trace_residual(const Tensor4& w, const Eigen::MatrixXd& ginv) {
  const int n = w.dim();
  if (w.max_abs() == 0.0) return 0.0;
  double worst = 0.0;
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) s += ginv(a, c) * w(a, b, c, d);
      worst = std::max(worst, std::abs(s));
    }
  return worst / w.max_abs();
}

/// Frobenius norm of nabla T for a covariant 4-tensor field T, with d_e T by
/// central differences of step h in each coordinate.
inline double nabla_norm(const MetricPatch& patch, const Eigen::VectorXd& x,
                         const std::function<Tensor4(const Eigen::VectorXd&)>& field, double h) {
  const int n = patch.dim();
  const Connection c = connection_at(patch, x, false);
  const Tensor4 t0 = field(x);
  double total = 0.0;
  for (int e = 0; e < n; ++e) {
    Eigen::VectorXd xp = x, xm = x;
    xp(e) += h;
    xm(e) -= h;
    const Tensor4 tp = field(xp), tm = field(xm);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int d = 0; d < n; ++d) {
            double v = (tp(a, b, cc, d) - tm(a, b, cc, d)) / (2.0 * h);
            for (int f = 0; f < n; ++f) {
              v -= c.gamma[f](e, a) * t0(f, b, cc, d);
              v -= c.gamma[f](e, b) * t0(a, f, cc, d);
              v -= c.gamma[f](e, cc) * t0(a, b, f, d);
              v -= c.gamma[f](e, d) * t0(a, b, cc, f);
            }
            total += v * v;
          }
  }
  return std::sqrt(total);
}

struct OlszakResult {
  int dim = 0;
  std::vector<double> singular_values;  // descending
  double gap = 0.0;                     // first singular value below threshold over the last one above
  bool degenerate = false;              // W = 0 at the point
};

/// Dimension of {xi : xi ^ W(d_a, d_b, ., .) = 0 for all a, b}. W counts as
/// zero when max |W| <= zero_level.
inline OlszakResult olszak_dim(const Tensor4& w, double threshold = 1e-7, double zero_level = 0.0) {
  const int n = w.dim();
  OlszakResult out;
  const double scale = w.max_abs();
  if (scale <= zero_level) {
    out.dim = n;
    out.degenerate = true;
    out.singular_values.assign(static_cast<std::size_t>(n), 0.0);
    return out;
  }
  std::vector<Eigen::RowVectorXd> rows;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool nonzero = false;
      for (int c = 0; c < n && !nonzero; ++c)
        for (int d = 0; d < n; ++d)
          if (w(a, b, c, d) != 0.0) {
            nonzero = true;
            break;
          }
      if (!nonzero) continue;
      for (int c = 0; c < n; ++c)
        for (int d = c + 1; d < n; ++d)
          for (int e = d + 1; e < n; ++e) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            row(c) += w(a, b, d, e) / scale;
            row(d) -= w(a, b, c, e) / scale;
            row(e) += w(a, b, c, d) / scale;
            if (row.cwiseAbs().maxCoeff() > 0.0) rows.push_back(row);
          }
    }
  Eigen::MatrixXd mtx(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) mtx.row(static_cast<Eigen::Index>(i)) = rows[i];
  // Gram matrix keeps the SVD at n x n.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(mtx.transpose() * mtx);
  const Eigen::VectorXd sv = svd.singularValues().cwiseSqrt();
  const double cut = threshold * sv(0);
  int rank = 0;
  for (int i = 0; i < n; ++i) {
    out.singular_values.push_back(sv(i));
    if (sv(i) >= cut) ++rank;
  }
  out.dim = n - rank;
  if (rank > 0 && rank < n) out.gap = sv(rank) / sv(rank - 1);
  return out;
}

struct CurvatureReport {
  Eigen::VectorXd point;
  Tensor4 riemann;
  Eigen::MatrixXd ricci;
  double scalar = 0.0;
  Tensor4 weyl;
  double riemann_norm = 0.0;
  double weyl_norm = 0.0;
  double nabla_weyl = 0.0;      // ||nabla W|| / ||W||
  double nabla_weyl_half = 0.0;  // same with h/2
  double nabla_riemann = 0.0;   // ||nabla R|| / ||R||
  double riemann_symmetry = 0.0;
  double weyl_symmetry = 0.0;
  double weyl_trace = 0.0;
  double nabla_dt = 0.0;  // max |Gamma^t_ab|
  int ricci_rank = 0;
  OlszakResult olszak;
  double fd_step = 0.0;
};

inline CurvatureReport curvature_at(const MetricPatch& patch, const Eigen::VectorXd& x) {
  if (!(x(0) > 0.0)) throw std::domain_error("curvature_at: t must be positive");
  CurvatureReport rep;
  rep.point = x;
  const auto ct = curvature_tensors(patch, x);
  if (std::abs(ct.connection.g.determinant()) < 1e-14) throw std::runtime_error("curvature_at: degenerate metric");
  rep.riemann = ct.riemann;
  rep.ricci = ct.ricci;
  rep.scalar = ct.scalar;
  rep.weyl = ct.weyl;
  rep.riemann_norm = ct.riemann.norm();
  rep.weyl_norm = ct.weyl.norm();
  rep.riemann_symmetry = symmetry_residual(ct.riemann);
  rep.weyl_symmetry = symmetry_residual(ct.weyl);
  rep.weyl_trace = trace_residual(ct.weyl, ct.connection.ginv);
  rep.nabla_dt = ct.connection.gamma[0].cwiseAbs().maxCoeff();
  {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(ct.ricci);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-9 * std::max(1.0, sv(0))) ++rank;
    rep.ricci_rank = rank;
  }
  rep.olszak = olszak_dim(ct.weyl, 1e-7, 1e-10 * std::max(1.0, ct.riemann.max_abs()));

  rep.fd_step = 1e-4 * x(0);
  auto weyl_field = [&](const Eigen::VectorXd& y) { return curvature_tensors(patch, y).weyl; };
  auto riemann_field = [&](const Eigen::VectorXd& y) { return curvature_tensors(patch, y).riemann; };
  if (rep.weyl_norm > 0.0) {
    rep.nabla_weyl = nabla_norm(patch, x, weyl_field, rep.fd_step) / rep.weyl_norm;
    rep.nabla_weyl_half = nabla_norm(patch, x, weyl_field, 0.5 * rep.fd_step) / rep.weyl_norm;
  }
  if (rep.riemann_norm > 0.0) rep.nabla_riemann = nabla_norm(patch, x, riemann_field, rep.fd_step) / rep.riemann_norm;
  return rep;
}

/// ||nabla W|| / ||W||; throws when W vanishes at the point.
inline double nabla_weyl_residual(const MetricPatch& patch, const Eigen::VectorXd& x) {
  const auto w = curvature_tensors(patch, x).weyl;
  const double norm = w.norm();
  if (norm == 0.0) throw std::domain_error("nabla_weyl_residual: W vanishes at the point");
  auto field = [&](const Eigen::VectorXd& y) { return curvature_tensors(patch, y).weyl; };
  return nabla_norm(patch, x, field, 1e-4 * x(0)) / norm;
}

/// ||nabla R|| / ||R||, 0 where R vanishes.
inline double nabla_riemann_norm(const MetricPatch& patch, const Eigen::VectorXd& x) {
  const auto r = curvature_tensors(patch, x).riemann;
  const double norm = r.norm();
  if (norm == 0.0) return 0.0;
  auto field = [&](const Eigen::VectorXd& y) { return curvature_tensors(patch, y).riemann; };
  return nabla_norm(patch, x, field, 1e-4 * x(0)) / norm;
}

// ---------------------------------------------------------------------------
// Isometries.

using CoordinateMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::VectorXd to_coordinates(double t, double s, const Eigen::VectorXd& v) {
  Eigen::VectorXd x(v.size() + 2);
  x << t, s, v;
  return x;
}

/// max over entries of |F*g - g| / max(1, scale), scale being the sum of the
/// magnitudes of the terms forming the entry. The Jacobian of F comes from a
/// fourth-order central stencil with relative step `step`.
inline double isometry_residual(const MetricPatch& patch, const CoordinateMap& map, const Eigen::VectorXd& x,
                                double step = 1e-4) {
  const int n = patch.dim();
  const Eigen::VectorXd y = map(x);
  if (!(y(0) > 0.0)) throw std::domain_error("isometry_residual: image leaves the chart");
  Eigen::MatrixXd jac(n, n);
  for (int i = 0; i < n; ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    auto at = [&](double offset) {
      Eigen::VectorXd z = x;
      z(i) += offset;
      return map(z);
    };
    jac.col(i) = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
  }
  const Eigen::MatrixXd g = patch.metric(x);
  const Eigen::MatrixXd gy = patch.metric(y);
  const Eigen::MatrixXd pulled = jac.transpose() * gy * jac;
  const Eigen::MatrixXd scale =
      jac.cwiseAbs().transpose() * gy.cwiseAbs() * jac.cwiseAbs() + g.cwiseAbs();
  return ((pulled - g).cwiseAbs().array() / scale.array().max(1.0)).maxCoeff();
}

// ---------------------------------------------------------------------------
// Geodesics.

struct GeodesicResult {
  bool witness = false;              // t dropped below delta
  double witness_parameter = 0.0;    // first accepted parameter with t < delta
  double zero_parameter = 0.0;       // parameter where t extrapolates to 0
  double affinity_deviation = 0.0;   // max |t(tau) - t0 - tau dt0|
  double final_parameter = 0.0;
  Eigen::VectorXd final_state;
  std::vector<double> parameters;
  std::vector<double> t_values;
};

/// Integrates x'' = -Gamma(x', x') from (x0, v0) over tau in [0, span]; stops
/// early with a witness when t < delta.
inline GeodesicResult geodesic_trace(const MetricPatch& patch, const Eigen::VectorXd& x0, const Eigen::VectorXd& v0,
                                     double span, double delta = 1e-3, double abs_tol = 1e-12,
                                     double rel_tol = 1e-12) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const int n = patch.dim();
  if (!(x0(0) > 0.0)) throw std::domain_error("geodesic_trace: t must be positive");
  State y(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    y[i] = x0(i);
    y[n + i] = v0(i);
  }
  auto rhs = [&](const State& s, State& ds, double) {
    Eigen::VectorXd x(n), v(n);
    for (int i = 0; i < n; ++i) {
      x(i) = s[i];
      v(i) = s[n + i];
    }
    if (!(x(0) > 0.0)) throw std::domain_error("geodesic_trace: left the chart");
    const Connection c = connection_at(patch, x, false);
    for (int a = 0; a < n; ++a) {
      ds[a] = v(a);
      ds[n + a] = -v.dot(c.gamma[a] * v);
    }
  };
  auto stepper = odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_fehlberg78<State>());
  GeodesicResult out;
  double tau = 0.0;
  double dt = 1e-3;
  const double t0 = x0(0), rate = v0(0);
  out.parameters.push_back(0.0);
  out.t_values.push_back(t0);
  for (int guard = 0; tau < span && guard < 2000000; ++guard) {
    dt = std::min(dt, span - tau);
    // Do not step into t <= 0; t is affine, so this bound is exact.
    if (rate < 0.0) dt = std::min(dt, 0.5 * y[0] / -rate);
    if (stepper.try_step(rhs, y, tau, dt) != odeint::success) continue;
    out.parameters.push_back(tau);
    out.t_values.push_back(y[0]);
    out.affinity_deviation = std::max(out.affinity_deviation, std::abs(y[0] - (t0 + rate * tau)));
    if (y[0] < delta) {
      out.witness = true;
      out.witness_parameter = tau;
      out.zero_parameter = tau + y[0] / -y[n];
      break;
    }
  }
  out.final_parameter = tau;
  out.final_state = Eigen::Map<const Eigen::VectorXd>(y.data(), 2 * n);
  return out;
}

}  // namespace ecs
