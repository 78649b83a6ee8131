#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tucker_hurdle/inference.hpp"
#include "tucker_hurdle/io.hpp"
#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/sampler.hpp"
#include "tucker_hurdle/simulate.hpp"

namespace tucker_hurdle {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitSampler = 4,
  kExitDiagnostics = 5,
};

/// Exit code for an exception escaping a run.
int exit_code_for(const std::exception& e);

struct StratifyOptions {
  fs::path file;
  std::string column;
};

struct RunConfig {
  DatasetPaths data;
  int n_caries_categories = 3;
  int n_fluorosis_categories = 3;
  ModelRanks ranks;
  Hyperparameters hyper;
  NutsConfig nuts = NutsConfig::test();
  fs::path output_dir = "out";

  double level = 0.95;
  std::optional<fs::path> aggregation;
  std::optional<StratifyOptions> stratify;
  std::size_t summary_batch = 256;

  double rhat_threshold = 1.05;
  /// When set, R-hat above the threshold gives exit code 5.
  bool fail_on_rhat = true;
  /// "identified" checks log density, cutpoints and cell linear predictors; "all" adds raw parameters.
  std::string rhat_scope = "identified";

  /// Relative paths are resolved against `base_dir`. Throws ConfigError on unknown keys or bad values.
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir);
  static RunConfig load(const fs::path& path);
  /// Replaces warmup, sample and chain counts with the named preset ("paper" or "test").
  void apply_preset(const std::string& name);
};

/// Everything a run needs after pre-flight validation.
struct PreparedRun {
  PairedDataset data;
  ParamLayout layout;
  SummaryOptions summary;
  std::vector<int> indicator;  // empty when not stratifying
};

/// Loads and cross-checks every input; throws before any sampling work.
PreparedRun prepare_run(const RunConfig& cfg);

/// Samples, then writes draws.bin, diagnostics.csv and summary_<level>.{csv,txt}
/// (plus stratum0_/stratum1_ tables when stratifying) into cfg.output_dir.
int run_fit(const RunConfig& cfg, std::ostream& log);

/// Rebuilds the summary tables from an existing draws file.
int run_summarize(const RunConfig& cfg, const fs::path& draws_path, std::ostream& log);

/// Generates a synthetic dataset under `out_dir`: the four data files, map.csv, strata.csv,
/// truth.json and a run.json that fits it. `sim` holds SimConfig overrides.
void run_simulate(const nlohmann::json& sim, const fs::path& out_dir);
SimConfig sim_config_from_json(const nlohmann::json& j);

/// Largest finite-difference relative gradient error over `n_points` random points.
double run_check_grad(const RunConfig& cfg, std::size_t n_points, std::uint64_t seed);

}  // namespace tucker_hurdle
