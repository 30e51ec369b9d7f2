#pragma once

// The certify pipeline: every check the library can run on a model file,
// grouped into sections, plus the certificate JSON.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecs/geometry.hpp"
#include "ecs/io.hpp"
#include "ecs/precise.hpp"
#include "ecs/quotient.hpp"

namespace ecs {

inline std::map<std::string, double> default_tolerances() {
  return {{"eigen", 1e-8},
          {"omega", 1e-8},
          {"periodicity", 1e-12},
          {"deform_trace", 1e-9},
          {"condition", 1e12},
          {"isometry", 1e-6},
          {"nabla_weyl", 1e-5},
          {"nabla_riemann_min", 1e-3},
          {"symmetry", 1e-9},
          {"weyl_trace", 1e-9},
          {"canonicalize", 1e-8},
          {"word_action", 1e-8},
          {"geodesic_delta", 1e-3},
          {"geodesic_parameter", 1e-3},
          {"geodesic_affinity", 1e-6}};
}

struct CertifyOptions {
  int samples = 10;
  std::uint64_t seed = 1;
  std::map<std::string, double> tol = default_tolerances();

  /// Replaces tolerances from a JSON object; unknown keys are an error.
  void override_tolerances(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("tolerance overrides must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!tol.count(key)) throw std::invalid_argument("unknown tolerance '" + key + "'");
      if (!value.is_number() || !(value.get<double>() > 0.0))
        throw std::invalid_argument("tolerance '" + key + "' must be a positive number");
      tol[key] = value.get<double>();
    }
  }
};

struct Section {
  std::string name;
  CheckList checks;
  std::string skipped;  // reason, when the section could not run

  bool pass() const { return skipped.empty() && checks.pass(); }
  bool exact() const {
    return std::all_of(checks.checks.begin(), checks.checks.end(), [](const Check& c) { return c.exact; });
  }
  /// Residual of the numeric upper-bound check closest to its tolerance.
  double residual() const {
    double r = 0.0, worst = -1.0;
    for (const auto& c : checks.checks)
      if (!c.exact && !c.lower_bound && c.residual / c.tolerance > worst) {
        worst = c.residual / c.tolerance;
        r = c.residual;
      }
    return r;
  }
};

struct Certificate {
  Json input;
  CertifyOptions options;
  std::vector<Section> sections;
  Json lattice;
  Json eigenbasis;
  Json curvature;  // report at the first curvature sample
  bool dilational = false;
  bool homogeneous = false;

  bool overall_pass() const {
    return !sections.empty() && std::all_of(sections.begin(), sections.end(), [](const Section& s) { return s.pass(); });
  }
  const Section& operator[](const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return s;
    throw std::out_of_range("Certificate: no section named " + name);
  }
};

inline Json curvature_report_json(const CurvatureReport& rep) {
  return {{"point", std::vector<double>(rep.point.data(), rep.point.data() + rep.point.size())},
          {"riemann_norm", rep.riemann_norm},
          {"weyl_norm", rep.weyl_norm},
          {"scalar", rep.scalar},
          {"ricci_rank", rep.ricci_rank},
          {"nabla_weyl", rep.nabla_weyl},
          {"nabla_weyl_half_step", rep.nabla_weyl_half},
          {"nabla_riemann", rep.nabla_riemann},
          {"riemann_symmetry", rep.riemann_symmetry},
          {"weyl_symmetry", rep.weyl_symmetry},
          {"weyl_trace", rep.weyl_trace},
          {"fd_step", rep.fd_step},
          {"olszak", {{"dim", rep.olszak.dim}, {"singular_values", rep.olszak.singular_values}, {"gap", rep.olszak.gap}}}};
}

namespace detail {

inline Json check_json(const Check& c) {
  Json j = {{"name", c.name}, {"exact", c.exact}, {"pass", c.pass}};
  if (c.exact) {
    j["residual"] = "0";
  } else {
    j["residual"] = c.residual;
    j[c.lower_bound ? "minimum" : "tolerance"] = c.tolerance;
  }
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

inline std::string format(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace detail

inline Json certificate_json(const Certificate& cert) {
  Json sections = Json::array();
  for (const auto& s : cert.sections) {
    Json checks = Json::array();
    for (const auto& c : s.checks.checks) checks.push_back(detail::check_json(c));
    Json j = {{"name", s.name}, {"kind", s.exact() ? "exact" : "numeric"}, {"pass", s.pass()}, {"details", checks}};
    if (s.exact())
      j["residual"] = "0";
    else
      j["residual"] = s.residual();
    if (!s.skipped.empty()) j["skipped"] = s.skipped;
    sections.push_back(j);
  }
  Json tolerances = Json::object();
  for (const auto& [k, v] : cert.options.tol) tolerances[k] = v;
  Json out = {{"schema", kSchema},
              {"tool_version", kToolVersion},
              {"input", cert.input},
              {"options", {{"samples", cert.options.samples}, {"seed", cert.options.seed}, {"tolerances", tolerances}}},
              {"sections", sections},
              {"overall_pass", cert.overall_pass()},
              {"dilational", cert.dilational},
              {"eigenbasis", cert.eigenbasis},
              {"curvature", cert.curvature},
              {"homogeneous", cert.homogeneous}};
  if (!cert.lattice.is_null()) out["lattice"] = cert.lattice;
  return out;
}

/// Uniform random point with log t in [-log q, log q], |s| <= 1, |v| <= 2.
inline Eigen::VectorXd sample_point(std::mt19937_64& rng, const ModelData& md) {
  const double lq = md.ctx.log_q();
  std::uniform_real_distribution<double> lt(-lq, lq), u(-1.0, 1.0);
  Eigen::VectorXd x(md.m + 2);
  x(0) = std::exp(lt(rng));
  x(1) = u(rng);
  Eigen::VectorXd v(md.m);
  for (int i = 0; i < md.m; ++i) v(i) = u(rng);
  x.tail(md.m) = v * (2.0 * std::abs(u(rng)) / std::max(1.0, v.norm()));
  return x;
}

inline Point to_point(const ModelData& md, const Eigen::VectorXd& x) { return {x(0), x(1), x.tail(md.m)}; }

template <class Element>
CoordinateMap coordinate_map(const ModelData& md, const Element& g) {
  return [&md, g](const Eigen::VectorXd& x) {
    const Point y = act(md, g, to_point(md, x));
    return to_coordinates(y.t, y.s, y.v);
  };
}

/// Lattice coordinates in the reduced basis, uniform in [-range, range].
inline std::vector<long> sample_reduced_coords(std::mt19937_64& rng, int dim, int range) {
  std::uniform_int_distribution<int> coord(-range, range);
  std::vector<long> n(static_cast<std::size_t>(dim));
  for (auto& c : n) c = coord(rng);
  return n;
}

/// Runs every section on the model. Sections whose prerequisites failed are
/// reported as skipped, and a skipped section does not pass.
inline Certificate certify(const ModelData& md, const CertifyOptions& opt) {
  Certificate cert;
  cert.input = model_json(md);
  cert.options = opt;
  cert.homogeneous = md.f.is_homogeneous();
  const auto tol = [&](const char* key) { return opt.tol.at(key); };
  std::mt19937_64 rng(opt.seed);
  std::string blocked;

  auto run = [&](const std::string& name, const std::function<void(CheckList&)>& body) {
    Section s{name, {}, {}};
    if (!blocked.empty()) {
      s.skipped = blocked;
    } else {
      try {
        body(s.checks);
      } catch (const std::exception& e) {
        s.checks.exact("completed", false, e.what());
      }
    }
    cert.sections.push_back(std::move(s));
    return cert.sections.back().pass();
  };

  if (!run("spectral axioms", [&](CheckList& c) { c.append(validate(md.system)); }))
    blocked = "spectral axioms failed";

  if (!run("model identities", [&](CheckList& c) {
        c.exact("n = m + 2", md.n == md.m + 2);
        if (md.f.is_homogeneous()) {
          c.exact("f uses k of the system", md.f.homogeneous().k == md.system.k);
        } else {
          c.exact("c = k/2", 2.0 * md.f.deformed().c == md.system.k);
        }
        c.append(check_model(md, tol("periodicity")));
        if (!md.f.is_homogeneous()) {
          const auto s = summarize(md.f.deformed(), md.ctx);
          c.numeric("trace T = q^(c-1/2) + q^(-c-1/2)", std::abs(s.trace - s.target), tol("deform_trace"),
                    "a_solved = " + detail::format(s.a_solved));
          c.numeric("det T = q^-1", std::abs(s.determinant - 1.0 / md.ctx.q_double()), tol("eigen"));
          c.exact("T eigenfunctions positive", s.positivity);
        }
      }))
    blocked = "model identities failed";

  std::optional<EigenBasis> basis;
  if (!run("eigenbasis residuals", [&](CheckList& c) {
        basis = ct_eigenbasis(md);
        cert.eigenbasis = Json::array();
        for (const auto& u : basis->u) cert.eigenbasis.push_back(solution_json(u));
        const double q = md.ctx.q_double();
        const auto res = eigen_residual(md, *basis, log_spaced(1.0 / q, q, opt.samples));
        if (res.exact)
          c.exact("CT u_j = q^E(j) u_j", res.exact_pass);
        else
          c.numeric("CT u_j = q^E(j) u_j", res.residual, tol("eigen"));
        const auto sc = verify_ct_omega_scaling(md, *basis);
        if (sc.exact)
          c.exact("Omega(CT x, CT y) = q^-1 Omega(x, y)", sc.exact_pass);
        else
          c.numeric("Omega(CT x, CT y) = q^-1 Omega(x, y)", sc.residual, tol("omega"));
      }))
    blocked = "eigenbasis unavailable";

  run("omega table", [&](CheckList& c) {
    const auto& u = basis->u;
    const int n = static_cast<int>(u.size());
    const double q = md.ctx.q_double();
    bool zero_ok = true, pair_ok = true;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        // u[i] pairs with u[n-1-i]
        const bool paired = i + j == n - 1;
        if (basis->closed_form) {
          const auto v = omega_exact(md, u[i], u[j]);
          if (!v) throw std::runtime_error("omega table: closed form expected");
          if (paired ? v->is_zero() : !v->is_zero()) (paired ? pair_ok : zero_ok) = false;
        } else {
          const auto v = omega(md, u[i], u[j], log_spaced(1.0 / q, q, 4));
          worst = std::max(worst, v.constancy_residual / std::max(1.0, std::abs(v.value)));
          if (!paired) worst = std::max(worst, std::abs(v.value));
          if (paired && !(std::abs(v.value) > tol("omega"))) pair_ok = false;
        }
      }
    if (basis->closed_form) {
      c.exact("Omega(u_i, u_j) = 0 off the anti-diagonal", zero_ok);
    } else {
      c.numeric("Omega constant in t, zero off the anti-diagonal", worst, tol("omega"));
    }
    c.exact("Omega nondegenerate on anti-diagonal pairs", pair_ok);
  });

  std::optional<LagrangianL> l;
  std::optional<LatticeSigma> sig;
  const GammaHat g{};
  if (!run("quotient conditions A-E", [&](CheckList& c) {
        l = build_L(md, *basis);
        const QMatrix pi = pi_map(md, *l, g);
        sig = build_lattice(md, pi, md.system.exponent_set());
        QuotientOptions qo;
        qo.condition_bound = tol("condition");
        qo.numeric_tolerance = tol("eigen");
        c.append(certify_ACE(md, *l, pi, *sig, qo));
        cert.lattice = {{"char_poly", polynomial_json(sig->char_poly)},
                        {"xi", matrix_json(sig->xi)},
                        {"phi", field_matrix_json(sig->phi)},
                        {"reduced_u", matrix_json(sig->reduced.u)}};
      }))
    blocked = "lattice unavailable";

  const int dim = md.m + 1;
  run("lattice intertwining", [&](CheckList& c) {
    c.exact("Xi Xi^-1 = I", sig->xi * sig->xi_inverse == IntMatrix::identity(dim));
    c.exact("reduced basis unimodular", sig->reduced.u * sig->reduced.u_inverse == IntMatrix::identity(dim));
    if (l->closed_form) {
      bool conj = true;
      for (int j = 0; j < dim; ++j) {
        std::vector<long> ej(static_cast<std::size_t>(dim), 0);
        ej[j] = 1;
        const auto nf = normal_form(*sig, {Generator::hat(), Generator::sigma(ej), Generator::hat_inverse()});
        std::vector<mpz_class> ez(ej.begin(), ej.end());
        const auto lhs = lattice_element_exact(md, *l, *sig, nf.n);
        const auto rhs = conjugate_exact(md, g, lattice_element_exact(md, *l, *sig, ez));
        if (nf.r != 0 || lhs.r != rhs.r || !(lhs.u - rhs.u).is_exact_zero()) conj = false;
      }
      c.exact("gamma-hat sigma_n gamma-hat^-1 = sigma_(Xi n)", conj);
      c.exact("Sigma Abelian (Omega = 0 on basis)", lattice_is_abelian(md, *l, *sig));
    } else {
      double worst = 0.0;
      for (int i = 0; i < opt.samples; ++i) {
        std::vector<long> n = from_reduced(*sig, sample_reduced_coords(rng, dim, 1));
        const std::vector<Generator> word{Generator::hat(), Generator::sigma(n), Generator::hat_inverse()};
        const Point x = to_point(md, sample_point(rng, md));
        const Point a = apply_word(md, *l, *sig, g, word, x);
        const Point b = apply_normal_form(md, *l, *sig, g, normal_form(*sig, word), x);
        const double scale = std::max({1.0, std::abs(a.s), a.v.cwiseAbs().maxCoeff()});
        worst = std::max({worst, std::abs(a.t - b.t) / a.t, std::abs(a.s - b.s) / scale,
                          (a.v - b.v).cwiseAbs().maxCoeff() / scale});
      }
      c.numeric("gamma-hat sigma_n gamma-hat^-1 = sigma_(Xi n) on points", worst, tol("word_action"),
                std::to_string(opt.samples) + " samples");
    }
  });

  // Closed-form models move points along the lattice in GMP floating point.
  std::optional<precise::Context> pctx;
  std::string precision_note;
  if (l && sig && l->closed_form) {
    pctx.emplace(md, precise::precision_for(*sig));
    precision_note = ", " + std::to_string(pctx->precision()) + "-bit floating point";
  }

  const MetricPatch patch = MetricPatch::from_model(md);
  run("isometry residuals", [&](CheckList& c) {
    double hat = 0.0, lattice = 0.0;
    for (int i = 0; i < opt.samples; ++i) {
      const auto x = sample_point(rng, md);
      hat = std::max(hat, isometry_residual(patch, coordinate_map(md, g), x));
      const auto n = sample_reduced_coords(rng, dim, 2);
      if (pctx) {
        const auto h = precise::reduced_lattice_element(md, *l, *sig, n);
        const precise::Map map = [&](const precise::Vec& y) {
          return precise::to_coordinates(precise::act(*pctx, h, precise::from_coordinates(*pctx, y)));
        };
        lattice = std::max(lattice, precise::isometry_residual(*pctx, map, precise::from_double(*pctx, x)));
      } else {
        const auto h = lattice_element(md, *l, *sig, from_reduced(*sig, n));
        lattice = std::max(lattice, isometry_residual(patch, coordinate_map(md, h), x));
      }
    }
    const std::string where = std::to_string(opt.samples) + " random points";
    c.numeric("gamma-hat", hat, tol("isometry"), where);
    c.numeric("lattice elements", lattice, tol("isometry"),
              where + ", reduced coordinates in [-2, 2]" + precision_note);
  });

  run("curvature suite", [&](CheckList& c) {
    double min_w = std::numeric_limits<double>::infinity(), nabla_w = 0.0, sym = 0.0, trace = 0.0;
    double min_nabla_r = std::numeric_limits<double>::infinity();
    int worst_dim = 2;
    double max_gap = 0.0;
    for (int i = 0; i < opt.samples; ++i) {
      const auto rep = curvature_at(patch, sample_point(rng, md));
      if (i == 0) cert.curvature = curvature_report_json(rep);
      min_w = std::min(min_w, rep.weyl_norm);
      nabla_w = std::max(nabla_w, rep.nabla_weyl);
      min_nabla_r = std::min(min_nabla_r, rep.nabla_riemann);
      sym = std::max({sym, rep.riemann_symmetry, rep.weyl_symmetry});
      trace = std::max(trace, rep.weyl_trace);
      if (rep.olszak.dim != 2) worst_dim = rep.olszak.dim;
      max_gap = std::max(max_gap, rep.olszak.gap);
    }
    c.at_least("||W||", min_w, 0.0, "minimum over samples");
    c.numeric("||nabla W|| / ||W||", nabla_w, tol("nabla_weyl"));
    c.at_least("||nabla R|| / ||R||", min_nabla_r, tol("nabla_riemann_min"), "minimum over samples");
    c.numeric("Riemann and Weyl symmetries", sym, tol("symmetry"));
    c.numeric("Weyl trace", trace, tol("weyl_trace"));
    c.numeric("Olszak distribution dimension 2", std::abs(worst_dim - 2), 0.5,
              "dim " + std::to_string(worst_dim) + ", largest ratio of the first dropped singular value to the last kept " +
                  detail::format(max_gap));
  });

  run("canonicalize orbit checks", [&](CheckList& c) {
    if (pctx) {
      const auto red = precise::reduced_real(*pctx, *sig);
      const precise::Real one = pctx->real(1.0);
      double idem = 0.0, orbit = 0.0;
      bool in_domain = true;
      std::uniform_int_distribution<int> power(-1, 1);
      for (int i = 0; i < opt.samples; ++i) {
        const auto x = precise::from_coordinates(*pctx, precise::from_double(*pctx, sample_point(rng, md)));
        const auto cx = precise::canonicalize(*pctx, *l, red, g, x);
        in_domain = in_domain && cx.t >= one && cx.t < pctx->q();
        for (const auto& y : cx.lattice_coords) in_domain = in_domain && sgn(y) >= 0 && y < one;
        idem = std::max(idem, precise::canonical_distance(cx, precise::canonicalize(*pctx, *l, red, g, cx.representative)));
        const int e = power(rng);
        auto y = precise::act(*pctx, precise::reduced_lattice_element(md, *l, *sig, sample_reduced_coords(rng, dim, 3)), x);
        if (e == 1) y = precise::act(*pctx, g, y);
        if (e == -1) y = precise::act_inverse(*pctx, g, y);
        orbit = std::max(orbit, precise::canonical_distance(cx, precise::canonicalize(*pctx, *l, red, g, y)));
      }
      c.exact("representative in the fundamental domain", in_domain);
      c.numeric("idempotent", idem, tol("canonicalize"), precision_note.substr(2));
      c.numeric("orbit invariant", orbit, tol("canonicalize"), "g = gamma-hat^e sigma, e in {-1, 0, 1}" + precision_note);
      return;
    }
    if (!sig->double_usable) {
      c.exact("lattice basis usable in double precision", false,
              "reduced basis too ill-conditioned; orbit checks not run");
      return;
    }
    const double q = md.ctx.q_double();
    double idem = 0.0, orbit = 0.0;
    bool in_domain = true;
    std::uniform_int_distribution<int> power(-1, 1);
    for (int i = 0; i < opt.samples; ++i) {
      const Point x = to_point(md, sample_point(rng, md));
      const auto cx = canonicalize(md, *l, *sig, g, x);
      in_domain = in_domain && cx.t >= 1.0 && cx.t < q && (cx.lattice_coords.array() >= 0.0).all() &&
                  (cx.lattice_coords.array() < 1.0).all();
      idem = std::max(idem, canonical_distance(cx, canonicalize(md, *l, *sig, g, cx.representative)));
      std::vector<Generator> word;
      const int e = power(rng);
      if (e == 1) word.push_back(Generator::hat());
      if (e == -1) word.push_back(Generator::hat_inverse());
      word.push_back(Generator::sigma(from_reduced(*sig, sample_reduced_coords(rng, dim, 3))));
      orbit = std::max(orbit, canonical_distance(cx, canonicalize(md, *l, *sig, g, apply_word(md, *l, *sig, g, word, x))));
    }
    c.exact("representative in the fundamental domain", in_domain);
    c.numeric("idempotent", idem, tol("canonicalize"));
    c.numeric("orbit invariant", orbit, tol("canonicalize"), "g = gamma-hat^e sigma, e in {-1, 0, 1}");
  });

  run("holonomy", [&](CheckList& c) {
    const auto hat = holonomy_scaling(md, g);
    c.exact("gamma-hat scales the parallel null field by q^-1", hat == md.ctx.q_inverse());
    c.exact("lattice holonomy trivial", holonomy_scaling(md, HElement{}) == md.ctx.one());
    c.exact("q^-1 != 1 (dilational)", hat != md.ctx.one());
  });
  cert.dilational = cert.sections.back().pass();

  run("geodesic witness", [&](CheckList& c) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(md.m + 2), v0 = Eigen::VectorXd::Zero(md.m + 2);
    x0(0) = 1.0;
    for (int i = 1; i < md.m + 2; ++i) {
      x0(i) = u(rng);
      v0(i) = u(rng);
    }
    v0(0) = -1.0;
    const auto r = geodesic_trace(patch, x0, v0, 2.0, tol("geodesic_delta"));
    c.exact("t reaches 0 at finite parameter", r.witness);
    c.numeric("|parameter - 1| where t < delta", std::abs(r.witness_parameter - 1.0), tol("geodesic_parameter"),
              "delta = " + detail::format(tol("geodesic_delta")) + ", reached at " + detail::format(r.witness_parameter) +
                  ", t = 0 extrapolated at " + detail::format(r.zero_parameter));
    c.numeric("t affine along the geodesic", r.affinity_deviation, tol("geodesic_affinity"));
  });

  return cert;
}

}  // namespace ecs
