#pragma once

// Problem configuration: JSON parsing with coded errors, canonical emission,
// and construction of the runtime objects (mesh, hierarchy, Problem).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "compete/discretization.hpp"
#include "compete/error.hpp"
#include "compete/galerkin_solver.hpp"
#include "compete/intrinsic.hpp"
#include "compete/operators.hpp"
#include "json.hpp"

namespace compete {

enum class ConfigCode {
  malformed_json,
  file_not_found,
  unknown_catalog_id,
  exponent_order,
  alpha_range,
  beta_range,
  r_range,
  levels_range,
  invalid_value,
  mesh_invalid,
};

/// Upper-case code string, e.g. "EXPONENT_ORDER".
std::string to_string(ConfigCode code);

class ConfigError : public Error {
 public:
  ConfigError(ConfigCode code, const std::string& message)
      : Error(to_string(code) + ": " + message), code_(code) {}
  ConfigCode code() const noexcept { return code_; }

 private:
  ConfigCode code_;
};

struct ProblemSpec {
  /// Canonical domain description: {"kind":"interval","a","b","elements"},
  /// {"kind":"mesh","mesh":{...}} or {"kind":"mesh_file","path":...} with an
  /// absolute path.
  nlohmann::json domain;
  int N = 1;
  double p = 3.0;
  double q = 2.0;
  double q_weight = 1.0;
  double eps_reg = 0.0;
  int levels = 6;
  int quad_order = 4;
  std::string f_kind = "zero";
  nlohmann::json f_params = nlohmann::json::object();
  std::optional<GrowthEnvelope> envelope;  // overrides the catalog envelope
  IntrinsicOperator T;
  HypothesisPolicy policy = HypothesisPolicy::refuse;
  SolverOptions solver;
  std::uint64_t seed = 0;
  std::optional<double> p_hat;
  double safety = 1.1;

  double critical_surrogate() const { return critical_exponent_surrogate(N, p, p_hat); }
  nlohmann::json to_json() const;
  bool operator==(const ProblemSpec& other) const { return to_json() == other.to_json(); }
};

/// Validated spec from a JSON document. Relative mesh paths resolve against
/// `base_dir`.
ProblemSpec parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
/// Reads and validates a config file.
ProblemSpec parse_config(const std::filesystem::path& path);
/// Parses JSON text; malformed text raises MALFORMED_JSON.
ProblemSpec parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".");

DomainMesh build_domain(const ProblemSpec& spec);
SpaceHierarchy build_hierarchy(const ProblemSpec& spec);
Problem make_problem(const ProblemSpec& spec);

}  // namespace compete
