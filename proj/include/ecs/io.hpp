#pragma once

// JSON persistence of systems, models and exact matrices. Serialization is
// canonical: keys are sorted and numbers print in shortest round-trip form,
// so load followed by dump reproduces a file byte for byte.

#include <string>
#include <vector>

#include <gmpxx.h>

#include "json.hpp"

#include "ecs/deform.hpp"
#include "ecs/exact.hpp"
#include "ecs/funcspace.hpp"
#include "ecs/model.hpp"
#include "ecs/qfield.hpp"
#include "ecs/spectral.hpp"

namespace ecs {

using Json = nlohmann::json;

inline constexpr const char* kSchema = "ecs-forge/1";
inline constexpr const char* kToolVersion = "1.0.0";

/// Malformed or inconsistent input file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Integers that fit in 64 bits are numbers, larger ones decimal strings.
inline Json integer_json(const mpz_class& z) {
  if (z.fits_slong_p()) return z.get_si();
  return z.get_str();
}

inline mpz_class integer_from_json(const Json& j) {
  if (j.is_number_integer()) return mpz_class(j.get<long>());
  if (j.is_string()) return mpz_class(j.get<std::string>());
  throw FormatError("expected an integer, got " + j.dump());
}

inline void put_rational(Json& out, const char* num, const char* den, const mpq_class& x) {
  out[num] = integer_json(x.get_num());
  out[den] = integer_json(x.get_den());
}

/// a + b sqrt(d) as {"a_num","a_den","b_num","b_den"}.
inline Json field_json(const QFieldElement& x) {
  Json out = Json::object();
  put_rational(out, "a_num", "a_den", x.a());
  put_rational(out, "b_num", "b_den", x.b());
  return out;
}

inline QFieldElement field_from_json(const Json& j, long d) {
  const mpq_class a(integer_from_json(j.at("a_num")), integer_from_json(j.at("a_den")));
  const mpq_class b(integer_from_json(j.at("b_num")), integer_from_json(j.at("b_den")));
  return QFieldElement(a, b, d);
}

/// Row-major nested arrays.
inline Json matrix_json(const IntMatrix& m) {
  Json out = Json::array();
  for (int i = 0; i < m.size(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.size(); ++j) row.push_back(integer_json(m(i, j)));
    out.push_back(row);
  }
  return out;
}

template <class Matrix>
Json field_matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (const auto& r : m) {
    Json row = Json::array();
    for (const auto& x : r) row.push_back(field_json(x));
    out.push_back(row);
  }
  return out;
}

/// Constant term first.
inline Json polynomial_json(const IntPolynomial& p) {
  Json out = Json::array();
  for (const auto& c : p.coeffs) out.push_back(integer_json(c));
  return out;
}

/// {"m","k","E","J"} with E, J listed for indices 1..2m.
inline Json system_json(const ZSpectralSystem& sys) {
  Json e = Json::array(), jj = Json::array();
  for (int i = 1; i <= sys.size(); ++i) {
    e.push_back(sys.E[i]);
    jj.push_back(sys.J[i]);
  }
  return {{"m", sys.m}, {"k", sys.k}, {"E", e}, {"J", jj}};
}

inline ZSpectralSystem system_from_json(const Json& j) {
  ZSpectralSystem sys;
  sys.m = j.at("m").get<int>();
  sys.k = j.at("k").get<int>();
  const auto e = j.at("E").get<std::vector<long>>();
  const auto jj = j.at("J").get<std::vector<int>>();
  if (sys.m < 1 || e.size() != static_cast<std::size_t>(2 * sys.m) || jj.size() != e.size())
    throw FormatError("system: E and J must have 2m entries");
  sys.E.assign(1, 0);
  sys.J.assign(1, 0);
  sys.E.insert(sys.E.end(), e.begin(), e.end());
  sys.J.insert(sys.J.end(), jj.begin(), jj.end());
  return sys;
}

inline Json perturbation_json(const PerturbationF0& f) {
  Json out = Json::array();
  for (auto [c, s] : f.fourier_coeffs) out.push_back({c, s});
  return out;
}

/// Accepts [[cos, sin], ...] with one pair per harmonic.
inline PerturbationF0 perturbation_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("perturbation coefficients must be an array of [cos, sin] pairs");
  PerturbationF0 f;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) throw FormatError("perturbation coefficient must be a [cos, sin] pair");
    f.fourier_coeffs.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  return f;
}

inline Json function_json(const FunctionChoice& f) {
  if (f.is_homogeneous()) return {{"variant", "homogeneous"}, {"k", f.homogeneous().k}};
  const auto& d = f.deformed();
  return {{"variant", "deformed"}, {"coeffs", perturbation_json(d.perturbation)}, {"c", d.c}, {"a_solved", d.a_solved}};
}

inline FunctionChoice function_from_json(const Json& j, const QFieldContext& ctx) {
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "homogeneous") return FunctionChoice::homogeneous(j.at("k").get<int>(), ctx.log_q());
  if (variant == "deformed") {
    DeformedF d;
    d.perturbation = perturbation_from_json(j.at("coeffs"));
    d.c = j.at("c").get<double>();
    d.a_solved = j.at("a_solved").get<double>();
    if (!(d.a_solved > 0.0)) throw FormatError("f: a_solved must be positive");
    d.target_trace = target_trace(d.c, ctx);
    return deformed_function(d, ctx);
  }
  throw FormatError("f: unknown variant '" + variant + "'");
}

/// {"powers": [[coeff_num, coeff_den, exponent], ...]}; a coefficient with an
/// irrational part is written as a field object in place of num, den.
inline Json power_sum_json(const PowerSum& p) {
  Json terms = Json::array();
  for (const auto& [e, c] : p.terms()) {
    if (c.b() == 0)
      terms.push_back({integer_json(c.a().get_num()), integer_json(c.a().get_den()), e});
    else
      terms.push_back({field_json(c), e});
  }
  return {{"powers", terms}};
}

/// Closed form: one power sum per component. Numeric: {"ic": [u(1), u'(1)]}.
inline Json solution_json(const ESolution& u) {
  if (u.is_closed_form()) {
    Json comps = Json::array();
    for (const auto& c : u.components()) comps.push_back(power_sum_json(c));
    return {{"components", comps}};
  }
  const auto [u0, u1] = u.initial_data();
  return {{"ic", {std::vector<double>(u0.data(), u0.data() + u0.size()), std::vector<double>(u1.data(), u1.data() + u1.size())}}};
}

inline Json model_json(const ModelData& md) {
  return {{"schema", kSchema},    {"n", md.n},          {"p", md.ctx.p()}, {"eps", md.eps},
          {"a", md.a},            {"f", function_json(md.f)}, {"system", system_json(md.system)}};
}

/// Loads a model as written, without validating it against its system:
/// inconsistencies are for the certificate to report. Structural problems
/// throw FormatError.
inline ModelData model_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSchema) throw FormatError("unsupported schema " + j.at("schema").dump());
    const long p = j.at("p").get<long>();
    if (p < 3) throw FormatError("p must be >= 3");
    ModelData md;
    md.ctx = QFieldContext(p);
    md.n = j.at("n").get<int>();
    md.eps = j.at("eps").get<int>();
    if (md.eps != 1 && md.eps != -1) throw FormatError("eps must be +1 or -1");
    md.system = system_from_json(j.at("system"));
    md.m = md.system.m;
    md.a = j.at("a").get<std::vector<long>>();
    if (md.a.size() != static_cast<std::size_t>(md.m)) throw FormatError("a must have m entries");
    md.f = function_from_json(j.at("f"), md.ctx);
    return md;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

/// Two-space indentation, trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ecs
