#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "compete/problem.hpp"

namespace compete {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ConfigCode code) {
  switch (code) {
    case ConfigCode::malformed_json: return "MALFORMED_JSON";
    case ConfigCode::file_not_found: return "FILE_NOT_FOUND";
    case ConfigCode::unknown_catalog_id: return "UNKNOWN_CATALOG_ID";
    case ConfigCode::exponent_order: return "EXPONENT_ORDER";
    case ConfigCode::alpha_range: return "ALPHA_RANGE";
    case ConfigCode::beta_range: return "BETA_RANGE";
    case ConfigCode::r_range: return "R_RANGE";
    case ConfigCode::levels_range: return "LEVELS_RANGE";
    case ConfigCode::invalid_value: return "INVALID_VALUE";
    case ConfigCode::mesh_invalid: return "MESH_INVALID";
  }
  return "INVALID_VALUE";
}

namespace {

[[noreturn]] void fail(ConfigCode code, const std::string& msg) { throw ConfigError(code, msg); }

const std::set<std::string> kTopKeys{"domain", "N",    "p",      "q",    "q_weight", "eps_reg",
                                     "levels", "quad_order", "f", "envelope", "T", "policy",
                                     "solver", "seed", "p_hat",  "safety"};

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) fail(ConfigCode::invalid_value, std::string("'") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ConfigCode::invalid_value, std::string("'") + key + "' must be finite");
  return x;
}

int integer(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(ConfigCode::invalid_value, std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// Translates library exceptions raised while building catalog objects.
template <class Fn>
auto catalog(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UnknownCatalogId& e) {
    fail(ConfigCode::unknown_catalog_id, e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(ConfigCode::invalid_value, e.what());
  } catch (const json::exception& e) {
    fail(ConfigCode::invalid_value, e.what());
  }
}

json canonical_domain(const json& d, const fs::path& base_dir, DomainMesh& mesh) {
  if (!d.is_object()) fail(ConfigCode::invalid_value, "'domain' must be an object");
  const std::string kind = d.contains("kind") && d.at("kind").is_string() ? d.at("kind").get<std::string>() : "interval";
  try {
    if (kind == "interval") {
      const double a = number(d, "a", 0.0), b = number(d, "b", 1.0);
      const int el = integer(d, "elements", 2);
      mesh = DomainMesh::interval(a, b, el);
      return {{"kind", kind}, {"a", a}, {"b", b}, {"elements", el}};
    }
    if (kind == "unit_square") {
      mesh = DomainMesh::unit_square();
      return {{"kind", kind}};
    }
    if (kind == "mesh") {
      if (!d.contains("mesh")) fail(ConfigCode::invalid_value, "domain kind 'mesh' needs a 'mesh' object");
      mesh = DomainMesh::from_json(d.at("mesh"));
      return {{"kind", kind}, {"mesh", mesh.to_json()}};
    }
    if (kind == "mesh_file") {
      if (!d.contains("path") || !d.at("path").is_string())
        fail(ConfigCode::invalid_value, "domain kind 'mesh_file' needs a 'path' string");
      fs::path path = d.at("path").get<std::string>();
      if (path.is_relative()) path = fs::absolute(base_dir / path);
      path = path.lexically_normal();
      std::ifstream in(path);
      if (!in) fail(ConfigCode::file_not_found, "mesh file " + path.string() + " not found");
      json mj;
      try {
        mj = json::parse(in);
      } catch (const json::parse_error& e) {
        fail(ConfigCode::malformed_json, "mesh file " + path.string() + ": " + e.what());
      }
      mesh = DomainMesh::from_json(mj);
      return {{"kind", kind}, {"path", path.string()}};
    }
  } catch (const MeshError& e) {
    fail(ConfigCode::mesh_invalid, e.what());
  } catch (const json::exception& e) {
    fail(ConfigCode::mesh_invalid, e.what());
  }
  fail(ConfigCode::unknown_catalog_id,
       "unknown domain kind '" + kind + "' (known: interval, unit_square, mesh, mesh_file)");
}

SolverOptions parse_solver(const json& j) {
  SolverOptions s;
  if (!j.is_object()) fail(ConfigCode::invalid_value, "'solver' must be an object");
  s.tol = number(j, "tol", s.tol);
  s.max_newton = integer(j, "max_newton", s.max_newton);
  s.max_depth = integer(j, "max_depth", s.max_depth);
  s.outer_max = integer(j, "outer_max", s.outer_max);
  s.outer_damping = number(j, "outer_damping", s.outer_damping);
  s.sphere_samples = integer(j, "sphere_samples", s.sphere_samples);
  s.test_set_size = integer(j, "test_set_size", s.test_set_size);
  s.constant_starts = integer(j, "constant_starts", s.constant_starts);
  s.constant_iterations = integer(j, "constant_iterations", s.constant_iterations);
  if (s.tol < 0.0) fail(ConfigCode::invalid_value, "solver.tol must be >= 0");
  if (s.max_newton < 1 || s.outer_max < 1 || s.constant_starts < 1 || s.constant_iterations < 1 || s.max_depth < 0)
    fail(ConfigCode::invalid_value, "solver iteration limits must be positive");
  if (!(s.outer_damping > 0.0 && s.outer_damping <= 1.0))
    fail(ConfigCode::invalid_value, "solver.outer_damping must lie in (0, 1]");
  if (s.sphere_samples < 0 || s.test_set_size < 0) fail(ConfigCode::invalid_value, "sample counts must be >= 0");
  return s;
}

json solver_json(const SolverOptions& s) {
  return {{"tol", s.tol},
          {"max_newton", s.max_newton},
          {"max_depth", s.max_depth},
          {"outer_max", s.outer_max},
          {"outer_damping", s.outer_damping},
          {"sphere_samples", s.sphere_samples},
          {"test_set_size", s.test_set_size},
          {"constant_starts", s.constant_starts},
          {"constant_iterations", s.constant_iterations}};
}

void check_envelope_ranges(const GrowthEnvelope& env, double p, double ph) {
  if (!(env.alpha > 0.0 && env.alpha < ph - 1.0))
    fail(ConfigCode::alpha_range, "alpha = " + fmt(env.alpha) + " must lie in (0, p_hat - 1) = (0, " + fmt(ph - 1.0) + ")");
  const double beta_max = p * (ph - 1.0) / ph;
  if (!(env.beta > 0.0 && env.beta < beta_max))
    fail(ConfigCode::beta_range, "beta = " + fmt(env.beta) + " must lie in (0, p/p_hat') = (0, " + fmt(beta_max) + ")");
  if (!(env.r >= 1.0 && env.r < ph))
    fail(ConfigCode::r_range, "r = " + fmt(env.r) + " must lie in [1, p_hat) = [1, " + fmt(ph) + ")");
  if (!(env.a1 >= 0.0 && env.a2 >= 0.0)) fail(ConfigCode::invalid_value, "a1 and a2 must be >= 0");
}

}  // namespace

ProblemSpec parse_config_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) fail(ConfigCode::malformed_json, "config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kTopKeys.count(key)) fail(ConfigCode::invalid_value, "unknown config key '" + key + "'");

  ProblemSpec s;
  DomainMesh mesh = DomainMesh::interval(0.0, 1.0, 2);
  s.domain = canonical_domain(j.value("domain", json{{"kind", "interval"}}), base_dir, mesh);
  s.N = integer(j, "N", mesh.dimension());
  if (s.N != mesh.dimension())
    fail(ConfigCode::invalid_value, "N = " + std::to_string(s.N) + " does not match the mesh dimension " +
                                        std::to_string(mesh.dimension()));

  s.p = number(j, "p", s.p);
  s.q = number(j, "q", s.q);
  if (!(s.q > 1.0 && s.q < s.p))
    fail(ConfigCode::exponent_order, "need 1 < q < p, got q = " + fmt(s.q) + ", p = " + fmt(s.p));
  s.q_weight = number(j, "q_weight", s.q_weight);
  s.eps_reg = number(j, "eps_reg", s.eps_reg);
  if (s.q_weight < 0.0 || s.eps_reg < 0.0) fail(ConfigCode::invalid_value, "q_weight and eps_reg must be >= 0");

  s.levels = integer(j, "levels", s.levels);
  if (s.levels < 1 || s.levels > 16) fail(ConfigCode::levels_range, "levels = " + std::to_string(s.levels) + " must lie in [1, 16]");
  s.quad_order = integer(j, "quad_order", s.quad_order);
  if (s.quad_order < 1 || s.quad_order > 20) fail(ConfigCode::invalid_value, "quad_order must lie in [1, 20]");

  if (j.contains("p_hat")) {
    if (!j.at("p_hat").is_null()) s.p_hat = number(j, "p_hat", 0.0);
  }
  s.safety = number(j, "safety", s.safety);
  if (!(s.safety >= 1.0)) fail(ConfigCode::invalid_value, "safety factor must be >= 1");
  double ph = 0.0;
  try {
    ph = s.critical_surrogate();
  } catch (const Error& e) {
    fail(ConfigCode::invalid_value, e.what());
  }

  const json f = j.value("f", json{{"kind", "zero"}});
  if (!f.is_object() || !f.contains("kind") || !f.at("kind").is_string())
    fail(ConfigCode::invalid_value, "'f' must be an object with a string 'kind'");
  s.f_kind = f.at("kind").get<std::string>();
  s.f_params = f.value("params", json::object());
  const ConvectionTerm term = catalog([&] { return ConvectionTerm::from_catalog(s.f_kind, s.f_params, s.p); });
  if (s.f_kind == "manufactured_p3q2" && (s.p != 3.0 || s.q != 2.0))
    fail(ConfigCode::invalid_value, "manufactured_p3q2 requires p = 3 and q = 2");
  if (s.f_kind == "manufactured_pq" && (number(s.f_params, "p", s.p) != s.p || number(s.f_params, "q", 2.0) != s.q))
    fail(ConfigCode::invalid_value, "manufactured_pq parameters must match the problem's p and q");

  if (j.contains("envelope")) s.envelope = catalog([&] { return GrowthEnvelope::from_json(j.at("envelope"), s.p); });
  check_envelope_ranges(s.envelope ? *s.envelope : term.envelope(), s.p, ph);

  s.T = catalog([&] { return IntrinsicOperator::from_json(j.value("T", json{{"kind", "identity"}})); });

  std::string policy = "refuse";
  if (j.contains("policy")) {
    if (!j.at("policy").is_string()) fail(ConfigCode::invalid_value, "policy must be a string");
    policy = j.at("policy").get<std::string>();
  }
  if (policy == "refuse") s.policy = HypothesisPolicy::refuse;
  else if (policy == "warn") s.policy = HypothesisPolicy::warn;
  else fail(ConfigCode::invalid_value, "policy must be 'refuse' or 'warn'");

  if (j.contains("solver")) s.solver = parse_solver(j.at("solver"));
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
      fail(ConfigCode::invalid_value, "seed must be a nonnegative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  return s;
}

ProblemSpec parse_config_text(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ConfigCode::malformed_json, e.what());
  }
  return parse_config_json(j, base_dir);
}

ProblemSpec parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ConfigCode::file_not_found, "config file " + path.string() + " not found");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json ProblemSpec::to_json() const {
  json j{{"domain", domain},
         {"N", N},
         {"p", p},
         {"q", q},
         {"q_weight", q_weight},
         {"eps_reg", eps_reg},
         {"levels", levels},
         {"quad_order", quad_order},
         {"f", {{"kind", f_kind}, {"params", f_params}}},
         {"T", T.to_json()},
         {"policy", policy == HypothesisPolicy::refuse ? "refuse" : "warn"},
         {"solver", solver_json(solver)},
         {"seed", seed},
         {"safety", safety}};
  if (envelope) j["envelope"] = envelope->to_json();
  j["p_hat"] = p_hat ? json(*p_hat) : json(nullptr);
  return j;
}

DomainMesh build_domain(const ProblemSpec& spec) {
  DomainMesh mesh = DomainMesh::interval(0.0, 1.0, 2);
  canonical_domain(spec.domain, ".", mesh);
  return mesh;
}

SpaceHierarchy build_hierarchy(const ProblemSpec& spec) {
  return SpaceHierarchy::build(build_domain(spec), spec.levels, spec.quad_order);
}

Problem make_problem(const ProblemSpec& spec) {
  Problem pr;
  pr.op = CompetingOperator{spec.p, spec.q, spec.q_weight, spec.eps_reg};
  pr.f = ConvectionTerm::from_catalog(spec.f_kind, spec.f_params, spec.p);
  if (spec.envelope) pr.f.set_envelope(*spec.envelope);
  pr.T = spec.T;
  pr.p_hat_override = spec.p_hat;
  pr.safety = spec.safety;
  pr.policy = spec.policy;
  pr.solver = spec.solver;
  pr.seed = spec.seed;
  return pr;
}

}  // namespace compete
