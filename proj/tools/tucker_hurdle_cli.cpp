// Command-line front end: fit, summarize, simulate, check-grad.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "tucker_hurdle/run.hpp"

namespace th = tucker_hurdle;

namespace {

th::RunConfig load_config(const std::string& path, const std::string& preset,
                          const std::optional<std::uint64_t>& seed, const std::string& out,
                          bool quiet, const std::optional<std::size_t>& threads) {
  th::RunConfig cfg = th::RunConfig::load(path);
  if (!preset.empty()) cfg.apply_preset(preset);
  if (seed) cfg.nuts.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (quiet) cfg.nuts.progress = false;
  if (threads) cfg.nuts.threads = *threads;
  cfg.nuts.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint hurdle ordinal regression with linked Tucker coefficients"};
  app.require_subcommand(1);

  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides the config)");
  };

  auto* fit = app.add_subcommand("fit", "sample the posterior and write draws, diagnostics and tables");
  add_common(fit);
  fit->add_option("--preset", preset, "paper or test")->check(CLI::IsMember({"paper", "test"}));
  fit->add_option("--seed", seed, "random seed");
  fit->add_option("--threads", threads, "concurrent chains");
  fit->add_flag("--quiet", quiet, "suppress progress lines");

  std::string draws;
  auto* summ = app.add_subcommand("summarize", "rebuild summary tables from a draws file");
  add_common(summ);
  summ->add_option("--draws", draws, "draws file (default <out>/draws.bin)");

  std::string sim_config;
  std::string sim_out;
  std::string sim_preset = "desk";
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "write a synthetic dataset with known truth");
  sim->add_option("--config", sim_config, "simulation overrides (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--preset", sim_preset, "desk or desk-longitudinal")
      ->check(CLI::IsMember({"desk", "desk-longitudinal"}));
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out", sim_out, "output directory")->required();

  std::size_t n_points = 20;
  std::uint64_t grad_seed = 1;
  double tolerance = 1e-5;
  auto* grad = app.add_subcommand("check-grad", "compare the gradient with central differences");
  add_common(grad);
  grad->add_option("--points", n_points, "number of random points");
  grad->add_option("--seed", grad_seed, "random seed");
  grad->add_option("--tolerance", tolerance, "maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : th::kExitConfig;
  }

  try {
    if (fit->parsed()) {
      const auto cfg = load_config(config, preset, seed, out, quiet, threads);
      return th::run_fit(cfg, std::cerr);
    }
    if (summ->parsed()) {
      const auto cfg = load_config(config, "", std::nullopt, out, true, std::nullopt);
      const th::fs::path path = draws.empty() ? cfg.output_dir / "draws.bin" : th::fs::path(draws);
      return th::run_summarize(cfg, path, std::cerr);
    }
    if (sim->parsed()) {
      nlohmann::json j = nlohmann::json::object();
      if (!sim_config.empty()) {
        std::ifstream in(sim_config);
        j = nlohmann::json::parse(in);
      }
      if (!j.contains("preset")) j["preset"] = sim_preset;
      if (sim_seed) j["seed"] = *sim_seed;
      th::run_simulate(j, sim_out);
      std::cerr << "dataset written to " << sim_out << "\n";
      return th::kExitOk;
    }
    if (grad->parsed()) {
      const auto cfg = load_config(config, "", std::nullopt, out, true, std::nullopt);
      const double err = th::run_check_grad(cfg, n_points, grad_seed);
      std::printf("max relative gradient error over %zu points: %.3e\n", n_points, err);
      return err < tolerance ? th::kExitOk : th::kExitSampler;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return th::exit_code_for(e);
  }
  return th::kExitOk;
}
