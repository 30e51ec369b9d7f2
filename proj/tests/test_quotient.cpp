#include <gtest/gtest.h>

#include <random>

#include "ecs/deform.hpp"
#include "ecs/quotient.hpp"

using namespace ecs;

namespace {

struct Fixture {
  ModelData md;
  EigenBasis b;
  LagrangianL l;
};

Fixture homogeneous(int r, long p, int eps = 1) {
  const auto sys = build_theorem22(r);
  QFieldContext ctx(p);
  auto md = build_model(sys, ctx, eps, FunctionChoice::homogeneous(sys.k, ctx.log_q()));
  auto b = ct_eigenbasis(md);
  auto l = build_L(md, b);
  return {std::move(md), std::move(b), std::move(l)};
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

Point random_point(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> lt(-1.5, 1.5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {std::exp(lt(rng)), u(rng), random_vector(rng, m)};
}

double point_distance(const Point& a, const Point& b) {
  const double scale = std::max({1.0, std::abs(a.s), a.v.cwiseAbs().maxCoeff()});
  return std::max({std::abs(a.t - b.t) / a.t, std::abs(a.s - b.s) / scale, (a.v - b.v).cwiseAbs().maxCoeff() / scale});
}

std::vector<long> unit(int dim, int j) {
  std::vector<long> n(static_cast<std::size_t>(dim), 0);
  n[j] = 1;
  return n;
}

}  // namespace

TEST(Act, GammaHatWithZeroData) {
  const auto fx = homogeneous(3, 3);
  const double q = fx.md.ctx.q_double();
  const Point x{1.3, 0.4, Eigen::Vector3d(1.0, -2.0, 0.5)};
  const Point y = act(fx.md, GammaHat{}, x);
  EXPECT_DOUBLE_EQ(y.t, q * 1.3);
  EXPECT_DOUBLE_EQ(y.s, 0.4 / q);
  EXPECT_TRUE(y.v.isApprox(fx.md.c_diagonal_double().cwiseProduct(x.v)));
}

TEST(Act, TranslationAndEigenvector) {
  const auto fx = homogeneous(3, 3);
  const Point x{2.0, 0.25, Eigen::Vector3d(0.3, 0.1, -0.7)};
  const Point y = act(fx.md, HElement{1.5, ESolution::zero_closed(3, fx.md.ctx.d())}, x);
  EXPECT_EQ(y.t, 2.0);
  EXPECT_EQ(y.s, 1.75);
  EXPECT_EQ(y.v, x.v);

  const Point z = act(fx.md, HElement{0.0, fx.b.u[0]}, Point{1.0, 0.0, Eigen::Vector3d::Zero()});
  EXPECT_EQ(z.t, 1.0);
  EXPECT_NEAR(z.s, 0.0, 1e-15);
  EXPECT_TRUE(z.v.isApprox(Eigen::Vector3d(1, 0, 0)));
  EXPECT_TRUE(fx.b.u[0].evaluate(1.0).second.isApprox(Eigen::Vector3d(-2, 0, 0)));
}

TEST(Act, RejectsNonPositiveT) {
  const auto fx = homogeneous(3, 3);
  const Point bad{0.0, 0.0, Eigen::Vector3d::Zero()};
  EXPECT_THROW(act(fx.md, GammaHat{}, bad), std::domain_error);
  EXPECT_THROW(act_inverse(fx.md, GammaHat{}, bad), std::domain_error);
  EXPECT_THROW(act(fx.md, HElement{0.0, fx.b.u[0]}, bad), std::domain_error);
}

TEST(Act, InverseAndGroupLaw) {
  const auto fx = homogeneous(4, 3, -1);
  const GammaHat g{0.7, fx.b.u[5]};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, fx.md.m);
    // Round-off is relative to the intermediate point, where u-hat can be large.
    const Point fwd = act(fx.md, g, x), back = act_inverse(fx.md, g, x);
    const double sf = std::max({1.0, std::abs(fwd.s), fwd.v.cwiseAbs().maxCoeff()});
    const double sb = std::max({1.0, std::abs(back.s), back.v.cwiseAbs().maxCoeff()});
    EXPECT_LT(point_distance(act_inverse(fx.md, g, fwd), x), 1e-13 * sf);
    EXPECT_LT(point_distance(act(fx.md, g, back), x), 1e-13 * sb);

    const HElement a{0.3, fx.b.u[i % 10] + fx.b.u[(3 * i + 1) % 10]};
    const HElement c{-1.1, fx.b.u[(i + 4) % 10].scaled(-1.0)};
    EXPECT_LT(point_distance(act(fx.md, compose(fx.md, a, c), x), act(fx.md, a, act(fx.md, c, x))), 1e-11);
    EXPECT_LT(point_distance(act(fx.md, inverse(a), act(fx.md, a, x)), x), 1e-11);
    // gamma-hat gamma gamma-hat^-1 = Pi(gamma)
    const Point lhs = act(fx.md, g, act(fx.md, a, act_inverse(fx.md, g, x)));
    EXPECT_LT(point_distance(lhs, act(fx.md, conjugate(fx.md, g, a), x)), 1e-11);
  }
}

TEST(PiMap, SpectrumForZeroData) {
  const auto fx = homogeneous(3, 3);
  const QMatrix p = pi_map(fx.md, fx.l, GammaHat{});
  const auto& ctx = fx.md.ctx;
  std::set<long> diag;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j)
      if (i != j) {
        EXPECT_TRUE(p[i][j].is_zero());
      }
    for (long a : {-3L, -1L, 1L, 3L})
      if (p[i][i] == ctx.power(a)) diag.insert(a);
  }
  EXPECT_EQ(diag, (std::set<long>{-3, -1, 1, 3}));
  EXPECT_EQ(p[0][0], ctx.q_inverse());
}

TEST(PiMap, FirstRowForNonzeroUHat) {
  const auto fx = homogeneous(3, 3);
  ASSERT_EQ(fx.l.index_set, (std::vector<int>{1, 4, 5}));
  const QMatrix p = pi_map(fx.md, fx.l, GammaHat{0.0, fx.b.u[5]});
  const auto& ctx = fx.md.ctx;
  EXPECT_EQ(p[0][1], ctx.rational(-10) * ctx.power(3));
  EXPECT_EQ(p[0][0], ctx.q_inverse());
  // Independent: the definition with Omega from the power sum.
  for (int i = 1; i <= 3; ++i) {
    const auto w = omega_exact(fx.md, fx.l.basis[i - 1], fx.b.u[5]);
    ASSERT_TRUE(w.has_value());
    EXPECT_EQ(p[0][i], ctx.rational(2) * fx.l.eigenvalues[i - 1] * *w);
  }
}

TEST(BuildLattice, K5Example) {
  const auto fx = homogeneous(3, 3);
  const auto y = fx.md.system.exponent_set();
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, GammaHat{}), y);
  std::vector<mpz_class> expect{1, -21, 56, -21, 1};
  EXPECT_EQ(sig.char_poly.coeffs, expect);
  const QMatrix p = pi_map(fx.md, fx.l, GammaHat{});
  EXPECT_TRUE(p * sig.phi == sig.phi * sig.xi);
  EXPECT_TRUE(sig.phi * sig.phi_inverse == qmatrix_identity(4, fx.md.ctx.d()));
  EXPECT_TRUE(sig.double_usable);
  EXPECT_LT((sig.phi_d * sig.phi_inverse_d - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BuildLattice, NonzeroUHatRho) {
  const auto fx = homogeneous(3, 3);
  const GammaHat g{0.0, fx.b.u[5]};
  const QMatrix p = pi_map(fx.md, fx.l, g);
  const auto sig = build_lattice(fx.md, p, fx.md.system.exponent_set());
  EXPECT_TRUE(p * sig.phi == sig.phi * sig.xi);
  EXPECT_TRUE(sig.phi * sig.phi_inverse == qmatrix_identity(4, fx.md.ctx.d()));
  for (int i = 1; i < 4; ++i)
    EXPECT_EQ(sig.rho[i], p[0][i] / (fx.l.eigenvalues[i - 1] - fx.md.ctx.q_inverse()));
  EXPECT_FALSE(sig.rho[1].is_zero());
}

TEST(BuildLattice, RejectsSpectrumMismatch) {
  const auto fx = homogeneous(3, 3);
  const QMatrix p = pi_map(fx.md, fx.l, GammaHat{});
  EXPECT_THROW(build_lattice(fx.md, p, std::set<long>{-3, -1, 1, 5}), std::invalid_argument);
  EXPECT_THROW(build_lattice(fx.md, p, std::set<long>{-1, 1, 3}), std::invalid_argument);
  QMatrix rep = p;
  rep[1][1] = rep[2][2];
  EXPECT_THROW(build_lattice(fx.md, rep, fx.md.system.exponent_set()), std::invalid_argument);
}

TEST(CertifyACE, EvaluationMatrixExample) {
  const auto fx = homogeneous(3, 3);
  const auto [u, du] = detail::evaluate_L(fx.l, 1.0);
  Eigen::Matrix3d expect;
  expect << 1, 0, -1.0 / 6, 0, 1, 0, 0, 0, 1;
  EXPECT_LT((u - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CertifyACE, FamilyPasses) {
  for (int r = 3; r <= 6; ++r)
    for (long p : {3L, 4L})
      for (int eps : {1, -1}) {
        const auto fx = homogeneous(r, p, eps);
        for (const GammaHat& g : {GammaHat{}, GammaHat{0.5, fx.b.u[2 * fx.md.m - 1]}}) {
          const QMatrix pi = pi_map(fx.md, fx.l, g);
          const auto sig = build_lattice(fx.md, pi, fx.md.system.exponent_set());
          const auto cert = certify_ACE(fx.md, fx.l, pi, sig);
          EXPECT_TRUE(cert.pass()) << "r=" << r << " p=" << p << " eps=" << eps;
          for (const auto& c : cert.checks)
            if (c.name != "(E) evaluation condition number") {
              EXPECT_TRUE(c.exact) << c.name;
            }
          EXPECT_TRUE(lattice_is_abelian(fx.md, fx.l, sig));
        }
      }
}

TEST(CertifyACE, DetectsNonLagrangianSubspace) {
  const auto fx = homogeneous(3, 3);
  const QMatrix pi = pi_map(fx.md, fx.l, GammaHat{});
  const auto sig = build_lattice(fx.md, pi, fx.md.system.exponent_set());
  // Replace u_5 by its Omega-partner u_3 (index sum 2m+1).
  auto bad = fx.l;
  bad.basis[2] = fx.b.u[2];
  bad.eigenvalues[2] = fx.b.eigenvalues[2];
  const auto cert = certify_ACE(fx.md, bad, pi, sig);
  EXPECT_FALSE(cert.pass());
  EXPECT_FALSE(cert["(D) Omega vanishes on L"].pass);
  EXPECT_TRUE(cert["(B) CT leaves L invariant"].pass);
}

TEST(CertifyACE, DeformedModel) {
  const auto sys = build_theorem22(3);
  QFieldContext ctx(3);
  PerturbationF0 f0;
  f0.fourier_coeffs = {{0.05, 0.0}};
  const auto df = solve_a(f0, sys.k / 2.0, ctx);
  const auto md = build_model(sys, ctx, 1, deformed_function(df, ctx));
  const auto b = ct_eigenbasis(md);
  const auto l = build_L(md, b);
  const QMatrix pi = pi_map(md, l, GammaHat{});
  const auto sig = build_lattice(md, pi, sys.exponent_set());
  const auto cert = certify_ACE(md, l, pi, sig);
  EXPECT_TRUE(cert.pass());
  EXPECT_FALSE(cert["(B) CT leaves L invariant"].exact);
  EXPECT_TRUE(cert["(C) Pi Phi = Phi Xi"].exact);
}

TEST(NormalForm, Examples) {
  const auto fx = homogeneous(3, 3);
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, GammaHat{}), fx.md.system.exponent_set());
  using G = Generator;
  const auto id = normal_form(sig, {G::hat(), G::hat_inverse()});
  EXPECT_EQ(id.r, 0);
  EXPECT_EQ(id.n, std::vector<mpz_class>(4, 0));

  const auto a = normal_form(sig, {G::sigma({1, 0, 0, 0}), G::hat(), G::sigma({0, 2, 0, -1})});
  EXPECT_EQ(a.r, 1);
  const auto shifted = sig.xi_inverse * std::vector<mpz_class>{1, 0, 0, 0};
  EXPECT_EQ(a.n, (std::vector<mpz_class>{shifted[0], shifted[1] + 2, shifted[2], shifted[3] - 1}));

  const auto b = normal_form(sig, {G::hat(), G::sigma({0, 1, 0, 0}), G::hat()});
  EXPECT_EQ(b.r, 2);
  EXPECT_EQ(b.n, sig.xi_inverse * std::vector<mpz_class>({0, 1, 0, 0}));
}

TEST(NormalForm, ConjugationIdentityExact) {
  for (int r : {3, 4, 5}) {
    const auto fx = homogeneous(r, 3);
    for (const GammaHat& g : {GammaHat{}, GammaHat{0.0, fx.b.u[2 * fx.md.m - 1]}}) {
      const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, g), fx.md.system.exponent_set());
      const int dim = fx.md.m + 1;
      for (int j = 0; j < dim; ++j) {
        const auto nf = normal_form(sig, {Generator::hat(), Generator::sigma(unit(dim, j)), Generator::hat_inverse()});
        EXPECT_EQ(nf.r, 0);
        std::vector<mpz_class> ej(static_cast<std::size_t>(dim), 0);
        ej[j] = 1;
        const auto lhs = lattice_element_exact(fx.md, fx.l, sig, nf.n);
        const auto rhs = conjugate_exact(fx.md, g, lattice_element_exact(fx.md, fx.l, sig, ej));
        EXPECT_EQ(lhs.r, rhs.r) << "r=" << r << " j=" << j;
        EXPECT_TRUE((lhs.u - rhs.u).is_exact_zero()) << "r=" << r << " j=" << j;
      }
    }
  }
}

TEST(NormalForm, MatchesGeometricAction) {
  const auto fx = homogeneous(3, 3);
  const GammaHat g{0.4, fx.b.u[5]};
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, g), fx.md.system.exponent_set());
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> kind(0, 2), coord(-2, 2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Generator> word;
    for (int i = 0; i < 4; ++i) {
      const int k = kind(rng);
      if (k == 0) word.push_back(Generator::hat());
      if (k == 1) word.push_back(Generator::hat_inverse());
      if (k == 2) word.push_back(Generator::sigma({coord(rng), coord(rng), coord(rng), coord(rng)}));
    }
    const Point x = random_point(rng, 3);
    const auto nf = normal_form(sig, word);
    long expect_r = 0;
    for (const auto& w : word) expect_r += w.kind == Generator::Kind::gamma_hat ? 1 : w.kind == Generator::Kind::gamma_hat_inverse ? -1 : 0;
    EXPECT_EQ(nf.r, expect_r);
    const Point a = apply_word(fx.md, fx.l, sig, g, word, x);
    const Point b = apply_normal_form(fx.md, fx.l, sig, g, nf, x);
    EXPECT_LT(point_distance(a, b), 1e-8) << "trial " << trial;
  }
}

TEST(Canonicalize, RPartExample) {
  const auto fx = homogeneous(3, 3);
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, GammaHat{}), fx.md.system.exponent_set());
  const double q = fx.md.ctx.q_double();
  const auto c = canonicalize(fx.md, fx.l, sig, GammaHat{}, Point{std::pow(q, 2.5), 0.1, Eigen::Vector3d(0.2, 0.1, 0.3)});
  EXPECT_EQ(c.r, -2);
  EXPECT_NEAR(c.t, std::sqrt(q), 1e-12);
  EXPECT_THROW(canonicalize(fx.md, fx.l, sig, GammaHat{}, Point{-1.0, 0, Eigen::Vector3d::Zero()}), std::domain_error);
  EXPECT_THROW(canonicalize(fx.md, fx.l, sig, GammaHat{0.0, fx.b.u[5]}, Point{1.0, 0, Eigen::Vector3d::Zero()}),
               std::invalid_argument);
}

TEST(Canonicalize, IdempotentAndOrbitInvariant) {
  const auto fx = homogeneous(3, 3);
  const GammaHat g{0.3, std::nullopt};
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, g), fx.md.system.exponent_set());
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> kind(0, 2), coord(-3, 3);
  const double q = fx.md.ctx.q_double();
  std::uniform_real_distribution<double> lt(-std::log(q), std::log(q)), u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Point x{std::exp(lt(rng)), u(rng), Eigen::Vector3d(u(rng), u(rng), u(rng))};
    const auto c = canonicalize(fx.md, fx.l, sig, g, x);
    EXPECT_GE(c.t, 1.0);
    EXPECT_LT(c.t, q);
    for (int i = 0; i < 4; ++i) {
      EXPECT_GE(c.lattice_coords(i), 0.0);
      EXPECT_LT(c.lattice_coords(i), 1.0);
    }
    const auto cc = canonicalize(fx.md, fx.l, sig, g, c.representative);
    EXPECT_EQ(cc.r, 0);
    EXPECT_LT(canonical_distance(c, cc), 1e-9);

    // g = gamma-hat^e sigma with sigma drawn in the reduced basis. Longer
    // words move points to t where the (t, s, v) coordinates themselves lose
    // digits, which would test floating point rather than the quotient.
    std::vector<Generator> word;
    const int e = kind(rng) - 1;
    if (e == 1) word.push_back(Generator::hat());
    if (e == -1) word.push_back(Generator::hat_inverse());
    word.push_back(Generator::sigma(from_reduced(sig, {coord(rng), coord(rng), coord(rng), coord(rng)})));
    const auto cy = canonicalize(fx.md, fx.l, sig, g, apply_word(fx.md, fx.l, sig, g, word, x));
    EXPECT_LT(canonical_distance(c, cy), 1e-8) << "trial " << trial;
  }
}

TEST(Canonicalize, FreeActionSpotCheck) {
  const auto fx = homogeneous(3, 3);
  const GammaHat g{};
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, g), fx.md.system.exponent_set());
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> rr(-2, 2), coord(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    NormalForm nf;
    do {
      nf.r = rr(rng);
      nf.n.assign(4, 0);
      for (auto& v : nf.n) v = coord(rng);
    } while (nf.r == 0 && nf.n == std::vector<mpz_class>(4, 0));
    const Point x = random_point(rng, 3);
    const Point y = apply_normal_form(fx.md, fx.l, sig, g, nf, x);
    if (nf.r != 0) {
      EXPECT_NE(y.t, x.t);
    } else {
      const Eigen::VectorXd dx = chart_coordinates(fx.md, fx.l, y) - chart_coordinates(fx.md, fx.l, x);
      EXPECT_GT(dx.norm(), 1e-6);
    }
  }
}

TEST(Canonicalize, ChartRoundTrip) {
  const auto fx = homogeneous(4, 3);
  std::mt19937_64 rng(31);
  for (int i = 0; i < 10; ++i) {
    const Point x = random_point(rng, fx.md.m);
    const Point y = from_chart(fx.md, fx.l, x.t, chart_coordinates(fx.md, fx.l, x));
    EXPECT_LT(point_distance(x, y), 1e-10);
  }
  // Lattice elements translate chart coordinates by (r, c).
  const auto sig = build_lattice(fx.md, pi_map(fx.md, fx.l, GammaHat{}), fx.md.system.exponent_set());
  const Point x = random_point(rng, fx.md.m);
  const auto h = lattice_element(fx.md, fx.l, sig, unit(fx.md.m + 1, 2));
  const Eigen::VectorXd d = chart_coordinates(fx.md, fx.l, act(fx.md, h, x)) - chart_coordinates(fx.md, fx.l, x);
  EXPECT_LT((d - sig.phi_d.col(2)).cwiseAbs().maxCoeff(), 1e-8 * sig.phi_d.col(2).cwiseAbs().maxCoeff());
}

TEST(Holonomy, Scaling) {
  const auto fx = homogeneous(3, 3);
  const auto s = holonomy_scaling(fx.md, GammaHat{});
  EXPECT_EQ(s, QFieldElement(mpq_class(3, 2), mpq_class(-1, 2), 5));
  EXPECT_NE(s, fx.md.ctx.one());
  EXPECT_EQ(holonomy_scaling(fx.md, HElement{1.0, fx.b.u[0]}), fx.md.ctx.one());
  const QMatrix p = pi_map(fx.md, fx.l, GammaHat{});
  EXPECT_NE(p[0][0], fx.md.ctx.one());
}

TEST(BuildLattice, ReducedBasisIsSameLattice) {
  for (int r : {3, 4}) {
    const auto fx = homogeneous(r, 3);
    const QMatrix p = pi_map(fx.md, fx.l, GammaHat{});
    const auto sig = build_lattice(fx.md, p, fx.md.system.exponent_set());
    const auto& red = sig.reduced;
    const int dim = fx.md.m + 1;
    EXPECT_EQ(abs(determinant(red.u)), 1);
    EXPECT_TRUE(red.u * red.u_inverse == IntMatrix::identity(dim));
    EXPECT_TRUE(red.phi == sig.phi * red.u);
    EXPECT_TRUE(p * red.phi == red.phi * red.xi);
    EXPECT_LT((red.phi_d * red.phi_inverse_d - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-12);
    const auto cond = [](const Eigen::MatrixXd& m) {
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      return svd.singularValues()(0) / svd.singularValues()(m.rows() - 1);
    };
    EXPECT_LT(cond(red.phi_d), cond(sig.phi_d));
    EXPECT_TRUE(sig.double_usable);
  }
}
