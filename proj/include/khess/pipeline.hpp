#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "khess/config.hpp"
#include "khess/grid.hpp"

namespace khess {

enum ExitCode : int { kExitPass = 0, kExitValidation = 2, kExitSolve = 3, kExitCheck = 4 };

/// One acceptance item: `value relation tolerance` decides the verdict.
struct SummaryItem {
  int criterion = 0;
  std::string id;
  std::string description;
  double value = 0.0;
  std::string relation;  // "<=", ">=" or ">"
  double tolerance = 0.0;
  std::string verdict;  // "pass", "fail" or "not-applicable"
  std::string reason;
};

struct Summary {
  std::vector<SummaryItem> items;
  bool passed() const;
  nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

/// Converged grid solution for one schedule entry.
struct CaseSolution {
  double epsilon = 0.0;
  double r = 0.0;
  double h = 0.0;
  GridFunction u;
};

/// Every report derived from the solutions. Deterministic: the same
/// solutions always give byte-identical text.
struct Reports {
  std::string barriers;
  std::string estimates;
  std::string levels;
  std::string monotonicity;
  std::string inequality;
  Summary summary;  // criteria 1-10; determinism is added by the caller
};

Reports analyze(const ExperimentConfig& cfg, const std::vector<CaseSolution>& cases,
                std::ostream& log);

std::string solution_filename(double epsilon, double r, double h, bool finest_h);

/// Builds the domain, runs the continuation for every h, writes the
/// artifact tree and returns an exit code. Errors are logged with the
/// failing stage.
int run_experiment(ExperimentConfig cfg, const std::filesystem::path& out, std::ostream& log);

/// Reloads config.json and the solution snapshots of an artifact tree,
/// recomputes every report and compares them byte for byte.
int check_artifacts(const std::filesystem::path& out, std::ostream& log);

/// Dense table rho, phi, phi', phi'', S_k residual of the radial oracle.
std::string radial_report(int n, int k, double epsilon, double r, double R, double inner, double outer, int rows);

/// Max relative gap of S_k (eigenvalues vs principal minors) and of its
/// Jacobian vs central differences over `samples` random symmetric
/// matrices of size 2..4.
struct AlgebraCheck {
  double sk_error = 0.0;
  double jacobian_error = 0.0;
  int samples = 0;
};
AlgebraCheck algebra_check(std::uint64_t seed, int samples = 1000);

}  // namespace khess
