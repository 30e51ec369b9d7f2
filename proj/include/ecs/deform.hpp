#pragma once

// Deformations f = f* + f_a of the coefficient function with a prescribed
// spectrum {q^(c-1/2), q^(-c-1/2)} of the translation operator T.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "ecs/coefficient.hpp"
#include "ecs/funcspace.hpp"
#include "ecs/qfield.hpp"

namespace ecs {

/// Solver tolerances. The integrator runs tighter than the funcspace default
/// because the trace has to match its target to 1e-10 absolute.
struct DeformOptions {
  IntegratorTolerance integrator{1e-15, 1e-13};
  double bracket_half_width = 0.5;
  double newton_step = 1e-6;
  double trace_tolerance = 1e-11;
  double amplitude_fraction = 0.5;
};

inline FunctionChoice deformed_function(const PerturbationF0& fstar, double c, double a, const QFieldContext& ctx) {
  DeformedF d;
  d.perturbation = fstar;
  d.c = c;
  d.a_solved = a;
  d.target_trace = 2.0 / std::sqrt(ctx.q_double()) * std::cosh(c * ctx.log_q());
  return FunctionChoice(d, ctx.log_q());
}

inline FunctionChoice deformed_function(const DeformedF& df, const QFieldContext& ctx) {
  return FunctionChoice(df, ctx.log_q());
}

/// H(f*, a): trace of T for f = f* + f_a.
inline double trace_H(const PerturbationF0& fstar, double a, const QFieldContext& ctx, const DeformOptions& opt = {}) {
  if (!(a > 0.0)) throw std::invalid_argument("trace_H: a must be positive");
  return transfer_matrix_T(deformed_function(fstar, a, a, ctx), ctx, opt.integrator).trace();
}

/// 2 q^(-1/2) cosh(c log q) = q^(c-1/2) + q^(-c-1/2).
inline double target_trace(double c, const QFieldContext& ctx) {
  return 2.0 / std::sqrt(ctx.q_double()) * std::cosh(c * ctx.log_q());
}

/// Finds the exponent a near c for which f* + f_a has the prescribed trace:
/// bisection on [c - 1/2, c + 1/2] followed by a Newton polish.
inline DeformedF solve_a(const PerturbationF0& fstar, double c, const QFieldContext& ctx, const DeformOptions& opt = {}) {
  if (!(c > 0.5)) throw std::invalid_argument("solve_a: c must exceed 1/2");
  const double amp = fstar.max_abs();
  const double guard = opt.amplitude_fraction * (c * c - 0.25);
  if (amp > guard)
    throw std::invalid_argument("solve_a: perturbation amplitude " + std::to_string(amp) + " exceeds guard " +
                                std::to_string(guard));
  const double target = target_trace(c, ctx);
  auto h = [&](double a) { return trace_H(fstar, a, ctx, opt) - target; };

  double lo = std::max(1e-6, c - opt.bracket_half_width);
  double hi = c + opt.bracket_half_width;
  double hlo = h(lo);
  double hhi = h(hi);
  if (hlo == 0.0 || hhi == 0.0) {
    hi = lo = hlo == 0.0 ? lo : hi;
  } else if ((hlo > 0) == (hhi > 0)) {
    throw std::runtime_error("solve_a: no sign change on [c - 1/2, c + 1/2]; perturbation too large");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double hm = h(mid);
    if (hm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((hm > 0) == (hlo > 0)) {
      lo = mid;
      hlo = hm;
    } else {
      hi = mid;
    }
  }
  double a = 0.5 * (lo + hi);
  double ha = h(a);
  for (int it = 0; it < 8 && std::abs(ha) > opt.trace_tolerance * 1e-2; ++it) {
    const double d = (h(a + opt.newton_step) - h(a - opt.newton_step)) / (2.0 * opt.newton_step);
    if (d == 0.0) break;
    const double next = a - ha / d;
    const double hn = h(next);
    if (std::abs(hn) >= std::abs(ha)) break;
    a = next;
    ha = hn;
  }
  if (std::abs(ha) > opt.trace_tolerance * std::max(1.0, target))
    throw std::runtime_error("solve_a: trace residual " + std::to_string(ha) + " above tolerance");
  DeformedF out;
  out.perturbation = fstar;
  out.c = c;
  out.a_solved = a;
  out.target_trace = target;
  return out;
}

/// Multiplies y by -1 if needed so that y(1) >= 0.
inline WSolution normalize_sign(const WSolution& y, std::shared_ptr<const SolutionKernel> kernel) {
  const auto ic = y.initial_data();
  if (ic[0] >= 0.0) return y;
  return WSolution(-ic[0], -ic[1], std::move(kernel));
}

/// Summary of a solved deformation.
struct DeformSummary {
  double a_solved = 0.0;
  double trace = 0.0;
  double target = 0.0;
  double determinant = 0.0;
  std::array<double, 2> spectrum{};
  std::array<double, 2> expected_spectrum{};
  bool real_spectrum = false;
  bool positivity = false;
};

namespace detail {

inline std::array<WSolution, 2> eigenfunctions(const TransferEigen& eig, std::shared_ptr<const SolutionKernel> kernel) {
  std::array<WSolution, 2> out;
  for (int i = 0; i < 2; ++i) out[i] = WSolution(eig.vectors[i](0), eig.vectors[i](1), kernel);
  return out;
}

}  // namespace detail

/// True iff both T-eigenfunctions, after sign normalization, are strictly
/// positive on a grid of [1/q, q].
inline bool eig_positivity(const DeformedF& df, const QFieldContext& ctx, const DeformOptions& opt = {},
                           int samples = 200) {
  const auto kernel = std::make_shared<SolutionKernel>(deformed_function(df, ctx), opt.integrator);
  const auto eig = transfer_eigen(transfer_matrix_T(*kernel, ctx));
  if (!eig.real || !(eig.values[1] > 0.0)) return false;
  const double q = ctx.q_double();
  for (const auto& y : detail::eigenfunctions(eig, kernel))
    if (!positive_on_grid(normalize_sign(y, kernel), 1.0 / q, q, samples)) return false;
  return true;
}

inline DeformSummary summarize(const DeformedF& df, const QFieldContext& ctx, const DeformOptions& opt = {}) {
  DeformSummary s;
  const auto kernel = std::make_shared<SolutionKernel>(deformed_function(df, ctx), opt.integrator);
  const Eigen::Matrix2d t = transfer_matrix_T(*kernel, ctx);
  const auto eig = transfer_eigen(t);
  s.a_solved = df.a_solved;
  s.trace = t.trace();
  s.target = target_trace(df.c, ctx);
  s.determinant = t.determinant();
  s.real_spectrum = eig.real;
  s.spectrum = eig.values;
  s.expected_spectrum = {std::pow(ctx.q_double(), df.c - 0.5), std::pow(ctx.q_double(), -df.c - 0.5)};
  s.positivity = eig_positivity(df, ctx, opt);
  return s;
}

/// a from f(1) = a^2 - 1/4, valid because every f* vanishes at t = 1.
inline double recover_a(const FunctionChoice& f) { return std::sqrt(f(1.0) + 0.25); }

}  // namespace ecs
