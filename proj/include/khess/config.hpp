#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "khess/geometry.hpp"
#include "khess/solver.hpp"

namespace khess {

inline constexpr int kSchemaVersion = 1;

struct DomainConfig {
  std::string preset = "ball";  // ball | ellipsoid | star-perturbed
  double radius = 1.0;
  std::vector<double> semi_axes;
  double base = 1.0;
  double alpha = 0.1;
  int lobes = 3;
  double r0 = 0.5;
  double R0 = 2.0;
  double tau0 = 0.25;
  bool operator==(const DomainConfig&) const = default;
};

struct ScheduleConfig {
  std::vector<double> epsilon{1e-2};
  std::vector<double> r{0.2};
  std::vector<double> h{0.04};
  bool operator==(const ScheduleConfig&) const = default;
};

struct SolverSettings {
  double newton_tol = 1e-8;
  int max_iters = 60;
  double armijo = 1e-4;
  double min_step = 1.0 / 4096.0;
  double gamma_floor = 1e-12;
  double linear_tol = 1e-10;
  bool operator==(const SolverSettings&) const = default;
};

struct AnalysisSettings {
  bool estimates = true;
  bool levels = true;
  bool monotonicity = true;
  bool inequality = true;
  int level_count = 9;
  /// Empty means c_{n,k} + 1/2.
  std::vector<double> b;
  int spot_checks = 64;
  bool operator==(const AnalysisSettings&) const = default;
};

struct ExperimentConfig {
  std::string name = "custom";
  int n = 2;
  int k = 1;
  DomainConfig domain;
  ScheduleConfig schedule;
  SolverSettings solver;
  AnalysisSettings analysis;
  std::string output = "out";
  std::uint64_t seed = 1;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and keys of another domain
/// preset are ConfigErrors. Missing keys take the defaults above.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical form; parse(serialize(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& c);
std::string serialize_config(const ExperimentConfig& c);

/// Range and consistency checks beyond parsing; throws ConfigError.
void validate(const ExperimentConfig& c);

DomainParams domain_params(const ExperimentConfig& c);
SolverConfig solver_config(const ExperimentConfig& c);
/// Configured b values, or the single default c_{n,k} + 1/2.
std::vector<double> b_values(const ExperimentConfig& c);

struct PresetInfo {
  std::string name;
  std::string description;
};
std::vector<PresetInfo> preset_list();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset(const std::string& name);

}  // namespace khess
