#pragma once

// Coefficient functions f on (0, inf) with f(t) = q^2 f(qt).

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace ecs {

/// A 1-periodic trigonometric polynomial g with g(0) = 0, realized as
/// f*(t) = g(log t / log q) / t^2. Any such f* satisfies f*(t) = q^2 f*(qt)
/// and f*(1) = 0 by construction.
struct PerturbationF0 {
  /// (cos, sin) coefficient of harmonic j + 1.
  std::vector<std::pair<double, double>> fourier_coeffs;

  bool is_zero() const {
    for (auto [c, s] : fourier_coeffs)
      if (c != 0.0 || s != 0.0) return false;
    return true;
  }

  /// g, g', g'' at x (derivatives in x).
  std::array<double, 3> periodic(double x) const {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < fourier_coeffs.size(); ++j) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(j + 1);
      const auto [c, s] = fourier_coeffs[j];
      const double cw = std::cos(w * x);
      const double sw = std::sin(w * x);
      out[0] += c * (cw - 1.0) + s * sw;
      out[1] += w * (-c * sw + s * cw);
      out[2] += -w * w * (c * cw + s * sw);
    }
    return out;
  }

  /// max |g| sampled on a fine grid of one period.
  double max_abs(int samples = 512) const {
    double m = 0.0;
    for (int i = 0; i < samples; ++i) m = std::max(m, std::abs(periodic(static_cast<double>(i) / samples)[0]));
    return m;
  }

  friend bool operator==(const PerturbationF0&, const PerturbationF0&) = default;
};

struct HomogeneousF {
  int k = 0;
  friend bool operator==(const HomogeneousF&, const HomogeneousF&) = default;
};

/// f = f* + f_a with f_a(t) = (a^2 - 1/4) / t^2, a solved so that the
/// translation operator has the spectrum {q^(c-1/2), q^(-c-1/2)}.
struct DeformedF {
  PerturbationF0 perturbation;
  double c = 0.0;
  double a_solved = 0.0;
  double target_trace = 0.0;
  friend bool operator==(const DeformedF&, const DeformedF&) = default;
};

/// The coefficient function of a model, with analytic derivatives.
class FunctionChoice {
 public:
  using Variant = std::variant<HomogeneousF, DeformedF>;

  FunctionChoice() = default;
  FunctionChoice(Variant v, double log_q) : v_(std::move(v)), log_q_(log_q) {
    if (!(log_q_ > 0.0)) throw std::invalid_argument("FunctionChoice: log q must be positive");
  }

  static FunctionChoice homogeneous(int k, double log_q) { return {HomogeneousF{k}, log_q}; }

  const Variant& variant() const { return v_; }
  bool is_homogeneous() const { return std::holds_alternative<HomogeneousF>(v_); }
  const HomogeneousF& homogeneous() const { return std::get<HomogeneousF>(v_); }
  const DeformedF& deformed() const { return std::get<DeformedF>(v_); }
  double log_q() const { return log_q_; }

  /// The constant part h of t^2 f(t) = h + g(log t / log q).
  double scale_constant() const {
    if (is_homogeneous()) {
      const double k = homogeneous().k;
      return (k * k - 1.0) / 4.0;
    }
    const double a = deformed().a_solved;
    return a * a - 0.25;
  }

  /// t^2 f(t), a log q periodic function of log t.
  double t2f(double t) const {
    double out = scale_constant();
    if (!is_homogeneous()) out += deformed().perturbation.periodic(std::log(t) / log_q_)[0];
    return out;
  }

  /// f, f', f'' at t > 0.
  std::array<double, 3> derivatives(double t) const {
    double g = scale_constant();
    double g1 = 0.0;
    double g2 = 0.0;
    if (!is_homogeneous()) {
      const auto p = deformed().perturbation.periodic(std::log(t) / log_q_);
      g += p[0];
      g1 = p[1] / log_q_;
      g2 = p[2] / (log_q_ * log_q_);
    }
    // f = t^-2 G(log t) with G' = g1, G'' = g2 in log t.
    const double t2 = t * t;
    return {g / t2, (g1 - 2.0 * g) / (t2 * t), (g2 - 5.0 * g1 + 6.0 * g) / (t2 * t2)};
  }

  double operator()(double t) const { return t2f(t) / (t * t); }

  friend bool operator==(const FunctionChoice&, const FunctionChoice&) = default;

 private:
  Variant v_{HomogeneousF{3}};
  double log_q_ = 1.0;
};

}  // namespace ecs
