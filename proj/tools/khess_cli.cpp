// khess: run, re-check and inspect k-Hessian experiments.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "khess/barriers.hpp"
#include "khess/config.hpp"
#include "khess/parallel.hpp"
#include "khess/pipeline.hpp"

using namespace khess;

namespace {

int cmd_run(const std::string& config_path, const std::string& preset_name, const std::string& out,
            std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  try {
    if (!config_path.empty() && !preset_name.empty()) throw ConfigError("give either --config or --preset, not both");
    cfg = !config_path.empty() ? load_config(config_path) : preset(preset_name.empty() ? "ball-n2-k1" : preset_name);
  } catch (const ConfigError& e) {
    std::cerr << "error in stage validate: " << e.what() << "\n";
    return kExitValidation;
  }
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output = out;
  return run_experiment(cfg, cfg.output, std::cerr);
}

int cmd_radial(int n, int k, double eps, double r, double R, std::optional<double> inner, std::optional<double> outer,
               int rows, const std::string& out) {
  try {
    const Regime regime = classify_regime(n, k);
    // Default data: the outer datum and the barrier profile at r for R0 = 2R.
    const double in = inner ? *inner : w_profile(n, k, r, 2.0 * R, 0.25);
    const double ou = outer ? *outer : outer_datum(regime);
    const std::string csv = radial_report(n, k, eps, r, R, in, ou, rows);
    if (out.empty()) {
      std::cout << csv;
    } else {
      std::ofstream f(out);
      if (!f) throw ConfigError("cannot write " + out);
      f << csv;
    }
    return kExitPass;
  } catch (const ConfigError& e) {
    std::cerr << "error in stage validate: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error in stage radial: " << e.what() << "\n";
    return kExitSolve;
  }
}

int cmd_presets(const std::string& show) {
  if (!show.empty()) {
    try {
      std::cout << serialize_config(preset(show));
      return kExitPass;
    } catch (const ConfigError& e) {
      std::cerr << "error in stage validate: " << e.what() << "\n";
      return kExitValidation;
    }
  }
  std::cout << "domain presets: ball, ellipsoid, star-perturbed\n\nexperiment presets:\n";
  for (const PresetInfo& p : preset_list()) std::printf("  %-18s %s\n", p.name.c_str(), p.description.c_str());
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-Hessian experiments on punctured starshaped domains"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  std::string config_path, preset_name, out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "solve, analyze and write the artifact tree");
  run->add_option("--config", config_path, "experiment config (JSON)");
  run->add_option("--preset", preset_name, "built-in experiment preset");
  run->add_option("--out", out, "output directory (overrides the config)");
  run->add_option("--seed", seed, "seed for spot-check sampling (overrides the config)");
  run->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  std::string check_dir;
  auto* check = app.add_subcommand("check", "re-verify an existing artifact tree");
  check->add_option("--out", check_dir, "artifact directory")->required();
  check->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  int n = 3, k = 2, rows = 201;
  double eps = 1e-2, r = 0.2, R = 1.0;
  std::optional<double> inner, outer;
  std::string radial_out;
  auto* radial = app.add_subcommand("radial", "tabulate the radial profile and its S_k residual");
  radial->add_option("--n", n, "dimension")->check(CLI::Range(2, 4));
  radial->add_option("--k", k, "Hessian order")->check(CLI::PositiveNumber);
  radial->add_option("--epsilon", eps, "right-hand side (>= 0)");
  radial->add_option("--r", r, "inner radius");
  radial->add_option("--R", R, "outer radius");
  radial->add_option("--inner", inner, "value on |x| = r");
  radial->add_option("--outer", outer, "value on |x| = R");
  radial->add_option("--rows", rows, "number of rows")->check(CLI::PositiveNumber);
  radial->add_option("--out", radial_out, "CSV path (default stdout)");

  std::string show;
  auto* presets = app.add_subcommand("presets", "list built-in configs");
  presets->add_option("--show", show, "print one preset as a config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  if (threads > 0) set_thread_count(threads);

  if (run->parsed()) return cmd_run(config_path, preset_name, out, seed);
  if (check->parsed()) return check_artifacts(check_dir, std::cerr);
  if (radial->parsed()) return cmd_radial(n, k, eps, r, R, inner, outer, rows, radial_out);
  return cmd_presets(show);
}
