#include <gtest/gtest.h>

#include <random>

#include "ecs/model.hpp"

using namespace ecs;

namespace {

ModelData homogeneous_model(int r, long p, int eps = 1) {
  const auto sys = build_theorem22(r);
  QFieldContext ctx(p);
  return build_model(sys, ctx, eps, FunctionChoice::homogeneous(sys.k, ctx.log_q()));
}

}  // namespace

TEST(BuildModel, R3Example) {
  const auto md = homogeneous_model(3, 3);
  EXPECT_EQ(md.n, 5);
  EXPECT_EQ(md.a, (std::vector<long>{1, 0, -1}));
  const auto c = md.c_diagonal();
  EXPECT_EQ(c[0], md.ctx.q());
  EXPECT_EQ(c[1], md.ctx.one());
  EXPECT_EQ(c[2], md.ctx.q_inverse());
  const Eigen::MatrixXd a = md.a_matrix();
  Eigen::VectorXd e3 = Eigen::VectorXd::Zero(3);
  e3(2) = 1;
  EXPECT_EQ(a * e3, Eigen::VectorXd::Unit(3, 0));
}

TEST(BuildModel, BridgingIdentityR3) {
  const auto md = homogeneous_model(3, 3);
  // (mu+ q^a(1), mu- q^a(1), ...) = (q^3, q^-2, q^2, q^-3, q, q^-4).
  const std::vector<long> expect{3, -2, 2, -3, 1, -4};
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(md.ctx.power(md.mu_plus_exponent()) * md.ctx.power(md.a[j]), md.ctx.power(expect[2 * j]));
    EXPECT_EQ(md.ctx.power(md.mu_minus_exponent()) * md.ctx.power(md.a[j]), md.ctx.power(expect[2 * j + 1]));
  }
}

TEST(BuildModel, RejectsBadInput) {
  const auto sys = build_theorem22(3);
  QFieldContext ctx(3);
  EXPECT_THROW(build_model(sys, ctx, 0, FunctionChoice::homogeneous(5, ctx.log_q())), std::invalid_argument);
  EXPECT_THROW(build_model(sys, ctx, 1, FunctionChoice::homogeneous(7, ctx.log_q())), std::invalid_argument);
  auto bad = sys;
  bad.E[1] = 4;
  EXPECT_THROW(build_model(bad, ctx, 1, FunctionChoice::homogeneous(5, ctx.log_q())), std::invalid_argument);
}

TEST(Kappa, Examples) {
  const auto md = homogeneous_model(3, 3);
  EXPECT_EQ(kappa(md, 1.0, Eigen::VectorXd::Zero(3)), 0.0);
  EXPECT_DOUBLE_EQ(kappa(md, 1.0, Eigen::VectorXd::Unit(3, 1)), 6.0);
  EXPECT_DOUBLE_EQ(kappa(md, 1.0, Eigen::VectorXd::Unit(3, 2)), 1.0);
  EXPECT_THROW(kappa(md, 0.0, Eigen::VectorXd::Zero(3)), std::domain_error);
}

TEST(Kappa, QuadraticInV) {
  const auto md = homogeneous_model(4, 4, -1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd v(md.m);
    for (int j = 0; j < md.m; ++j) v(j) = u(rng);
    const double t = std::exp(u(rng));
    const double lam = u(rng);
    EXPECT_NEAR(kappa(md, t, lam * v), lam * lam * kappa(md, t, v), 1e-10 * (1 + std::abs(kappa(md, t, v))));
  }
}

TEST(CheckModel, AllPassForFamily) {
  for (int r = 3; r <= 13; ++r)
    for (long p : {3L, 4L, 5L})
      for (int eps : {1, -1}) {
        const auto md = homogeneous_model(r, p, eps);
        const auto cert = check_model(md);
        EXPECT_TRUE(cert.pass()) << "r=" << r << " p=" << p << " eps=" << eps;
        for (const auto& c : cert.checks) EXPECT_TRUE(c.exact) << c.name;
      }
}

TEST(CheckModel, TamperedExponentFails) {
  auto md = homogeneous_model(3, 3);
  md.a[0] = 2;
  const auto cert = check_model(md);
  EXPECT_FALSE(cert.pass());
  EXPECT_FALSE(cert["a(1)=1, a(i)+a(m+1-i)=0"].pass);
}

TEST(CheckModel, DeformedPeriodicityIsNumeric) {
  const auto sys = build_theorem22(3);
  QFieldContext ctx(3);
  DeformedF d;
  d.perturbation.fourier_coeffs = {{0.05, 0.0}, {0.0, 0.02}};
  d.c = 2.5;
  d.a_solved = 2.49;
  const auto md = build_model(sys, ctx, 1, FunctionChoice(d, ctx.log_q()));
  const auto cert = check_model(md);
  EXPECT_TRUE(cert.pass());
  EXPECT_FALSE(cert["f(t) = q^2 f(qt)"].exact);
  EXPECT_LT(cert["f(t) = q^2 f(qt)"].residual, 1e-12);
}

TEST(FunctionChoice, DerivativesMatchFiniteDifferences) {
  QFieldContext ctx(3);
  DeformedF d;
  d.perturbation.fourier_coeffs = {{0.05, 0.01}, {0.0, 0.03}};
  d.c = 2.5;
  d.a_solved = 2.5;
  const FunctionChoice f(d, ctx.log_q());
  for (double t : {0.5, 1.0, 1.7, 2.9}) {
    const auto der = f.derivatives(t);
    const double h = 1e-5 * t;
    EXPECT_NEAR(der[0], f(t), 1e-14);
    EXPECT_NEAR(der[1], (f(t + h) - f(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(der[2], (f.derivatives(t + h)[1] - f.derivatives(t - h)[1]) / (2 * h), 1e-5);
  }
}
