// ecs-forge: generate, certify, deform and search from the command line.
//
// Exit codes: 0 success, 1 a failing check, 2 invalid arguments (including
// even n), 3 unreadable model file.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ecs/certify.hpp"

namespace {

constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kUnreadable = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ecs::Json parse_json_arg(const std::string& text, const char* flag) {
  try {
    return ecs::Json::parse(text);
  } catch (const ecs::Json::exception& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_generate(int n, long p, int eps, const std::string& coeffs, const std::string& out) {
  if (n % 2 == 0)
    throw UsageError("n = " + std::to_string(n) + " gives m = n - 2 = " + std::to_string(n - 2) +
                     ", but the integer m must be odd; no Z-spectral system exists for even m");
  if (n < 5) throw UsageError("n must be odd and at least 5");
  if (p < 3) throw UsageError("p must be at least 3");
  if (eps != 1 && eps != -1) throw UsageError("eps must be +1 or -1");
  const auto sys = ecs::build_theorem22((n + 1) / 2);
  const ecs::QFieldContext ctx(p);
  ecs::FunctionChoice f = ecs::FunctionChoice::homogeneous(sys.k, ctx.log_q());
  if (!coeffs.empty()) {
    ecs::PerturbationF0 f0;
    try {
      f0 = ecs::perturbation_from_json(parse_json_arg(coeffs, "--deform-coeffs"));
    } catch (const ecs::FormatError& e) {
      throw UsageError(std::string("--deform-coeffs: ") + e.what());
    }
    f = ecs::deformed_function(ecs::solve_a(f0, sys.k / 2.0, ctx), ctx);
  }
  const auto md = ecs::build_model(sys, ctx, eps, f);
  const auto cert = ecs::check_model(md);
  write_output(out, ecs::dump(ecs::model_json(md)));
  if (!cert.pass()) {
    for (const auto& c : cert.checks)
      if (!c.pass) std::cerr << "model identity failed: " << c.name << "\n";
    return kFail;
  }
  return 0;
}

int cmd_certify(const std::string& path, int samples, std::uint64_t seed, const std::string& overrides,
                const std::string& out) {
  if (samples < 1) throw UsageError("--samples must be positive");
  ecs::CertifyOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  if (!overrides.empty()) {
    try {
      opt.override_tolerances(parse_json_arg(overrides, "--tol-overrides"));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--tol-overrides: ") + e.what());
    }
  }
  ecs::ModelData md;
  try {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ecs::FormatError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    md = ecs::model_from_json(ecs::Json::parse(buf.str()));
  } catch (const ecs::Json::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return kUnreadable;
  } catch (const ecs::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  const auto cert = ecs::certify(md, opt);
  write_output(out, ecs::dump(ecs::certificate_json(cert)));
  for (const auto& s : cert.sections) {
    std::cerr << (s.pass() ? "PASS " : "FAIL ") << s.name;
    if (!s.skipped.empty()) std::cerr << " (skipped: " << s.skipped << ")";
    for (const auto& c : s.checks.checks)
      if (!c.pass) std::cerr << "\n    failed: " << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")");
    std::cerr << "\n";
  }
  std::cerr << "overall_pass: " << (cert.overall_pass() ? "true" : "false") << "\n";
  return cert.overall_pass() ? 0 : kFail;
}

int cmd_search_even(int m, int k_max, const std::string& out) {
  std::vector<ecs::ZSpectralSystem> found;
  try {
    found = ecs::search_systems(m, k_max);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ecs::Json systems = ecs::Json::array();
  for (const auto& s : found) systems.push_back(ecs::system_json(s));
  write_output(out, ecs::dump({{"schema", ecs::kSchema}, {"m", m}, {"k_max", k_max}, {"systems", systems}}));
  return found.empty() ? 0 : kFail;
}

int cmd_deform(long p, double c, const std::string& coeffs, const std::string& out) {
  if (p < 3) throw UsageError("p must be at least 3");
  const ecs::QFieldContext ctx(p);
  ecs::PerturbationF0 f0;
  if (!coeffs.empty()) {
    try {
      f0 = ecs::perturbation_from_json(parse_json_arg(coeffs, "--deform-coeffs"));
    } catch (const ecs::FormatError& e) {
      throw UsageError(std::string("--deform-coeffs: ") + e.what());
    }
  }
  ecs::DeformedF df;
  try {
    df = ecs::solve_a(f0, c, ctx);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto s = ecs::summarize(df, ctx);
  write_output(out, ecs::dump({{"schema", ecs::kSchema},
                               {"p", p},
                               {"c", c},
                               {"coeffs", ecs::perturbation_json(f0)},
                               {"a_solved", s.a_solved},
                               {"trace", s.trace},
                               {"spectrum", s.spectrum},
                               {"positivity", s.positivity}}));
  return s.positivity && s.real_spectrum ? 0 : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compact dilational ECS manifolds: generate models and certify them"};
  app.require_subcommand(1);

  int n = 0, eps = 1, samples = 10, m = 0, k_max = 0;
  long p = 3;
  double c = 0.0;
  std::uint64_t seed = 1;
  std::string coeffs, overrides, out, model;

  auto* gen = app.add_subcommand("generate", "Write the model JSON for an odd dimension n >= 5");
  gen->add_option("--n", n, "Manifold dimension (odd, >= 5)")->required();
  gen->add_option("--p", p, "Trace p = q + 1/q (integer >= 3)")->capture_default_str();
  gen->add_option("--eps", eps, "Sign of the inner product (+1 or -1)")->capture_default_str();
  gen->add_option("--deform-coeffs", coeffs, "Perturbation [[cos, sin], ...] per harmonic, as JSON");
  gen->add_option("--out", out, "Output file (default stdout)");

  auto* cer = app.add_subcommand("certify", "Run every check on a model file and write a certificate");
  cer->add_option("model", model, "Model JSON file")->required();
  cer->add_option("--samples", samples, "Random samples per numeric section")->capture_default_str();
  cer->add_option("--seed", seed, "Seed for the sampling RNG")->capture_default_str();
  cer->add_option("--tol-overrides", overrides, "JSON object of tolerance overrides");
  cer->add_option("--out", out, "Certificate file (default stdout)");

  auto* search = app.add_subcommand("search-even", "Search for Z-spectral systems; exit 0 iff none exist");
  search->add_option("--m", m, "Half the number of exponents (2..5)")->required();
  search->add_option("--k-max", k_max, "Largest odd k to try (<= 99)")->required();
  search->add_option("--out", out, "Report file (default stdout)");

  auto* deform = app.add_subcommand("deform", "Solve for the exponent a of a perturbed coefficient");
  deform->add_option("--p", p, "Trace p = q + 1/q (integer >= 3)")->capture_default_str();
  deform->add_option("--c", c, "Target exponent c > 1/2")->required();
  deform->add_option("--deform-coeffs", coeffs, "Perturbation [[cos, sin], ...] per harmonic, as JSON");
  deform->add_option("--out", out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return cmd_generate(n, p, eps, coeffs, out);
    if (*cer) return cmd_certify(model, samples, seed, overrides, out);
    if (*search) return cmd_search_even(m, k_max, out);
    if (*deform) return cmd_deform(p, c, coeffs, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
