#pragma once

// The standard dilational model data (V, <.,.>, A, C, f) assembled from a
// Z-spectral system and q.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecs/checks.hpp"
#include "ecs/coefficient.hpp"
#include "ecs/qfield.hpp"
#include "ecs/spectral.hpp"

namespace ecs {

using ModelCertificate = CheckList;

/// Model data. Basis indices are 0-based in code: e_1 of the text is basis(0).
struct ModelData {
  int n = 0;  // manifold dimension m + 2
  int m = 0;
  QFieldContext ctx{3};
  int eps = 1;
  ZSpectralSystem system;
  std::vector<long> a;  // C-exponents a(1..m), stored 0-based
  FunctionChoice f;

  /// <e_i, e_j> = eps exactly when i + j = m - 1 (0-based).
  double gram(int i, int j) const { return i + j == m - 1 ? eps : 0.0; }

  Eigen::MatrixXd gram_matrix() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) g(i, m - 1 - i) = eps;
    return g;
  }

  /// A e_m = e_1, A e_i = 0 otherwise.
  Eigen::MatrixXd a_matrix() const {
    Eigen::MatrixXd am = Eigen::MatrixXd::Zero(m, m);
    am(0, m - 1) = 1.0;
    return am;
  }

  /// Diagonal entries of C, exact.
  std::vector<QFieldElement> c_diagonal() const {
    std::vector<QFieldElement> out;
    out.reserve(a.size());
    for (long e : a) out.push_back(ctx.power(e));
    return out;
  }

  Eigen::VectorXd c_diagonal_double() const {
    Eigen::VectorXd out(m);
    for (int i = 0; i < m; ++i) out(i) = std::pow(ctx.q_double(), static_cast<double>(a[i]));
    return out;
  }

  /// T-eigenvalue exponents: mu^+- = q^((-1 +- k)/2).
  long mu_plus_exponent() const { return (system.k - 1) / 2; }
  long mu_minus_exponent() const { return (-1 - system.k) / 2; }
};

inline double inner(const ModelData& md, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (int i = 0; i < md.m; ++i) s += x(i) * y(md.m - 1 - i);
  return md.eps * s;
}

/// a(j) = E(2j-1) + (1-k)/2.
inline ModelData build_model(const ZSpectralSystem& sys, const QFieldContext& ctx, int eps, FunctionChoice f) {
  if (eps != 1 && eps != -1) throw std::invalid_argument("build_model: eps must be +1 or -1");
  const auto cert = validate(sys);
  if (!cert.pass()) {
    for (const auto& c : cert.checks)
      if (!c.pass) throw std::invalid_argument("build_model: Z-spectral system fails " + c.name);
  }
  if (f.is_homogeneous() && f.homogeneous().k != sys.k)
    throw std::invalid_argument("build_model: homogeneous f must use k of the system");
  if (!f.is_homogeneous() && std::abs(f.deformed().c - sys.k / 2.0) > 1e-12)
    throw std::invalid_argument("build_model: deformed f must have c = k/2");
  ModelData md;
  md.m = sys.m;
  md.n = sys.m + 2;
  md.ctx = ctx;
  md.eps = eps;
  md.system = sys;
  md.f = std::move(f);
  md.a.resize(static_cast<std::size_t>(sys.m));
  for (int j = 1; j <= sys.m; ++j) md.a[j - 1] = sys.E[2 * j - 1] + (1 - sys.k) / 2;
  return md;
}

/// kappa(t, v) = f(t) <v, v> + <A v, v>.
inline double kappa(const ModelData& md, double t, const Eigen::VectorXd& v) {
  if (!(t > 0.0)) throw std::domain_error("kappa: t must be positive");
  const Eigen::VectorXd av = md.a_matrix() * v;
  return md.f(t) * inner(md, v, v) + inner(md, av, v);
}

namespace detail {

// Rank of a small integer matrix over Q.
inline int rational_rank(const Eigen::MatrixXd& src) {
  const long rows = src.rows(), cols = src.cols();
  std::vector<std::vector<mpq_class>> a(rows, std::vector<mpq_class>(cols));
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) a[i][j] = static_cast<long>(std::lround(src(i, j)));
  int rank = 0;
  for (long col = 0; col < cols && rank < rows; ++col) {
    long pivot = -1;
    for (long r = rank; r < rows; ++r)
      if (sgn(a[r][col]) != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(a[pivot], a[rank]);
    for (long r = 0; r < rows; ++r) {
      if (r == rank || sgn(a[r][col]) == 0) continue;
      const mpq_class factor = a[r][col] / a[rank][col];
      for (long c = col; c < cols; ++c) a[r][c] -= factor * a[rank][c];
    }
    ++rank;
  }
  return rank;
}

}  // namespace detail

/// Exact checks of the model identities; a sampled residual for f(t) = q^2 f(qt)
/// when f is deformed.
inline ModelCertificate check_model(const ModelData& md, double periodicity_tol = 1e-12) {
  ModelCertificate cert;
  const int m = md.m;
  const auto& sys = md.system;
  const Eigen::MatrixXd g = md.gram_matrix();
  const Eigen::MatrixXd am = md.a_matrix();

  bool anti = true;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (g(i, j) != (i + j == m - 1 ? md.eps : 0)) anti = false;
  cert.exact("anti-diagonal inner product", anti && (md.eps == 1 || md.eps == -1));

  bool a_ok = static_cast<int>(md.a.size()) == m && m >= 1 && md.a[0] == 1;
  for (int i = 0; a_ok && i < m; ++i)
    if (md.a[i] + md.a[m - 1 - i] != 0) a_ok = false;
  cert.exact("a(1)=1, a(i)+a(m+1-i)=0", a_ok);

  bool from_e = static_cast<int>(md.a.size()) == m && sys.m == m;
  for (int j = 1; from_e && j <= m; ++j) {
    if (md.a[j - 1] != sys.E[2 * j - 1] + (1 - sys.k) / 2) from_e = false;
    if (md.a[j - 1] != sys.E[2 * j] + (1 + sys.k) / 2) from_e = false;
  }
  cert.exact("a(j)=E(2j-1)+(1-k)/2=E(2j)+(1+k)/2", from_e);

  bool a_shape = true;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (am(i, j) != ((i == 0 && j == m - 1) ? 1.0 : 0.0)) a_shape = false;
  cert.exact("Ae_m=e_1, Ae_i=0 (i<m)", a_shape);

  const Eigen::MatrixXd ga = g * am;
  cert.exact("A self-adjoint", ga == ga.transpose());
  cert.exact("A traceless", am.trace() == 0.0);
  cert.exact("A nonzero", am.cwiseAbs().maxCoeff() > 0.0);
  cert.exact("rank A = 1", detail::rational_rank(am) == 1);

  if (!a_ok) {
    cert.exact("CAC^-1 = q^2 A", false, "a(i) invalid");
    cert.exact("C isometry", false, "a(i) invalid");
  } else {
    const auto cd = md.c_diagonal();
    const QFieldElement q2 = md.ctx.power(2);
    bool conj = true;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const QFieldElement aij = md.ctx.rational(static_cast<long>(am(i, j)));
        if (cd[i] * aij * cd[j].inverse() != q2 * aij) conj = false;
      }
    cert.exact("CAC^-1 = q^2 A", conj);
    // C^T G C = G entrywise: c_i c_j g_ij = g_ij.
    bool iso = true;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const QFieldElement gij = md.ctx.rational(static_cast<long>(g(i, j)));
        if (cd[i] * cd[j] * gij != gij) iso = false;
      }
    cert.exact("C isometry", iso);
  }

  // (mu^+ q^a(j), mu^- q^a(j)) = (q^E(2j-1), q^E(2j)), compared as field elements.
  bool bridge = a_ok;
  for (int j = 1; bridge && j <= m; ++j) {
    const auto qa = md.ctx.power(md.a[j - 1]);
    if (md.ctx.power(md.mu_plus_exponent()) * qa != md.ctx.power(sys.E[2 * j - 1])) bridge = false;
    if (md.ctx.power(md.mu_minus_exponent()) * qa != md.ctx.power(sys.E[2 * j])) bridge = false;
  }
  cert.exact("mu^+- q^a(j) = q^E(2j-1), q^E(2j)", bridge);

  if (md.f.is_homogeneous()) {
    cert.exact("f(t) = q^2 f(qt)", md.f.homogeneous().k >= 2, "homogeneous f scales as t^-2");
  } else {
    const double q = md.ctx.q_double();
    double worst = 0.0;
    for (int i = 0; i <= 64; ++i) {
      const double t = std::exp(md.ctx.log_q() * (-2.0 + 4.0 * i / 64.0));
      const double lhs = md.f(t);
      const double rhs = q * q * md.f(q * t);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    cert.numeric("f(t) = q^2 f(qt)", worst, periodicity_tol, "relative, 65-point log grid in [q^-2, q^2]");
  }
  return cert;
}

}  // namespace ecs
