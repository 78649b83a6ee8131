#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "tucker_hurdle/errors.hpp"
#include "tucker_hurdle/run.hpp"

using namespace tucker_hurdle;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& name) {
    root = fs::temp_directory_path() / ("tucker_hurdle_run_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
};

json tiny_sim() {
  return {{"n_subjects", 16}, {"n_caries_locations", 4}, {"n_fluorosis_locations", 2}, {"p_occurrence", 2},
          {"p_severity", 2},  {"rank", 1},               {"seed", 3}};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  os << j.dump(2);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Simulated data plus a run.json tuned for a seconds-long fit.
fs::path tiny_project(const Workspace& ws) {
  run_simulate(tiny_sim(), ws.root / "data");
  json run = read_json(ws.root / "data" / "run.json");
  run["sampler"] = {{"n_warmup", 60}, {"n_samples", 30}, {"n_chains", 2}, {"seed", 5}, {"progress", false}};
  run["diagnostics"] = {{"fail_on_rhat", false}};
  write_json(ws.root / "data" / "run.json", run);
  return ws.root / "data" / "run.json";
}

int cli(const std::string& args) {
  const std::string cmd = std::string(TH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("run") {

TEST_CASE("configuration parsing") {
  const json base = {{"data",
                      {{"caries", "c.csv"},
                       {"fluorosis", "f.csv"},
                       {"covariates_occurrence", "xo.csv"},
                       {"covariates_severity", "xs.csv"}}}};
  SUBCASE("defaults and relative paths") {
    const RunConfig cfg = RunConfig::from_json(base, "/base");
    CHECK(cfg.data.caries == fs::path("/base/c.csv"));
    CHECK(cfg.output_dir == fs::path("/base/out"));
    CHECK(cfg.level == 0.95);
    CHECK(cfg.nuts.n_samples == NutsConfig::test().n_samples);
    CHECK(cfg.rhat_scope == "identified");
  }
  SUBCASE("explicit settings") {
    json j = base;
    j["ranks"] = {{"subject", 3}, {"default", {{"spatial", 2}, {"predictor", 1}, {"time", 2}}},
                  {"blocks", {{"fluorosis.severity", {{"spatial", 1}}}}}};
    j["priors"] = {{"global_scale", "shared"}, {"sigma_b", 0.5}};
    j["sampler"] = {{"preset", "paper"}, {"seed", 17}, {"mass_matrix", "identity"}};
    j["summary"] = {{"level", 0.9}, {"stratify", {{"file", "s.csv"}, {"column", "grp"}}}};
    const RunConfig cfg = RunConfig::from_json(j, "/b");
    CHECK(cfg.ranks.subject_occurrence == 3);
    CHECK(cfg.ranks.subject_severity == 3);
    CHECK(cfg.ranks.blocks[3].spatial == 1);
    CHECK(cfg.ranks.blocks[2].spatial == 2);
    CHECK(cfg.ranks.blocks[0].predictor == 1);
    CHECK(cfg.hyper.global_scale == GlobalScaleMode::shared);
    CHECK(cfg.hyper.sigma_b == 0.5);
    CHECK(cfg.nuts.n_warmup == 5000);
    CHECK(cfg.nuts.seed == 17);
    CHECK(cfg.nuts.mass_matrix == MassMatrix::identity);
    CHECK(cfg.level == 0.9);
    REQUIRE(cfg.stratify.has_value());
    CHECK(cfg.stratify->column == "grp");
  }
  SUBCASE("unknown keys and bad values") {
    json j = base;
    j["samplr"] = json::object();
    CHECK_THROWS_AS(RunConfig::from_json(j, "."), ConfigError);
    j = base;
    j["sampler"] = {{"n_chians", 2}};
    CHECK_THROWS_AS(RunConfig::from_json(j, "."), ConfigError);
    j = base;
    j["sampler"] = {{"target_accept", 1.2}};
    CHECK_THROWS_AS(RunConfig::from_json(j, "."), ConfigError);
    j = base;
    j["summary"] = {{"level", 1.0}};
    CHECK_THROWS_AS(RunConfig::from_json(j, "."), ConfigError);
    j = base;
    j["sampler"] = {{"n_samples", "many"}};
    CHECK_THROWS_AS(RunConfig::from_json(j, "."), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::object(), "."), ConfigError);
  }
}

TEST_CASE("exit codes follow the error category") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(DataError("x")) == kExitData);
  CHECK(exit_code_for(RankError("x")) == kExitData);
  CHECK(exit_code_for(SamplerError("x")) == kExitSampler);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("simulate writes a fittable project") {
  const Workspace ws("sim");
  run_simulate(tiny_sim(), ws.root);
  for (const char* f : {"caries.csv", "fluorosis.csv", "x_occurrence.csv", "x_severity.csv", "map.csv",
                        "strata.csv", "truth.json", "run.json"}) {
    CHECK(fs::exists(ws.root / f));
  }
  const RunConfig cfg = RunConfig::load(ws.root / "run.json");
  const PreparedRun prep = prepare_run(cfg);
  CHECK(prep.data.n_subjects == 16);
  CHECK(prep.indicator.size() == 16);
  CHECK_THROWS_AS(sim_config_from_json({{"n_subject", 3}}), ConfigError);
}

TEST_CASE("ranks larger than the data fail before sampling") {
  const Workspace ws("rank");
  const fs::path cfg_path = tiny_project(ws);
  json run = read_json(cfg_path);
  run["ranks"] = {{"default", {{"spatial", 9}, {"predictor", 1}}}};
  run["output"] = "never";
  write_json(cfg_path, run);
  CHECK_THROWS_AS(prepare_run(RunConfig::load(cfg_path)), ConfigError);
  CHECK(cli("fit " + cfg_path.string() + " --quiet") == kExitConfig);
  CHECK_FALSE(fs::exists(ws.root / "data" / "never" / "draws.bin"));
}

TEST_CASE("command line exit codes") {
  const Workspace ws("cli");
  CHECK(cli("--help") == 0);
  CHECK(cli("fit") == kExitConfig);
  CHECK(cli("no-such-command") == kExitConfig);
  CHECK(cli("simulate --out " + (ws.root / "s").string() + " --config " + (ws.root / "missing.json").string()) ==
        kExitConfig);
  write_json(ws.root / "bad.json", {{"data", {{"caries", "nope.csv"},
                                              {"fluorosis", "nope.csv"},
                                              {"covariates_occurrence", "nope.csv"},
                                              {"covariates_severity", "nope.csv"}}}});
  CHECK(cli("fit " + (ws.root / "bad.json").string() + " --quiet") == kExitData);
  std::ofstream(ws.root / "garbage.json") << "{ not json";
  CHECK(cli("fit " + (ws.root / "garbage.json").string()) == kExitConfig);
  CHECK(cli("simulate --out " + (ws.root / "s").string()) == 0);
  CHECK(cli("check-grad " + (ws.root / "s" / "run.json").string() + " --points 2") == 0);
}

TEST_CASE("summarize reproduces the tables of a fit") {
  const Workspace ws("fit");
  const fs::path cfg_path = tiny_project(ws);
  RunConfig cfg = RunConfig::load(cfg_path);
  std::ostringstream log;
  REQUIRE(run_fit(cfg, log) == kExitOk);
  const fs::path out = cfg.output_dir;
  for (const char* f : {"draws.bin", "diagnostics.csv", "summary_location.csv", "stratum0_summary_tooth.csv",
                        "stratum1_summary_class.txt"}) {
    CHECK(fs::exists(out / f));
  }
  const std::string before = slurp(out / "summary_surface.csv");
  fs::remove(out / "summary_surface.csv");
  REQUIRE(run_summarize(cfg, out / "draws.bin", log) == kExitOk);
  CHECK(slurp(out / "summary_surface.csv") == before);
  CHECK(log.str().find("divergent") != std::string::npos);

  cfg.ranks = ModelRanks::uniform(1);
  cfg.ranks.subject_occurrence = 2;
  CHECK_THROWS_AS(run_summarize(cfg, out / "draws.bin", log), DataError);
}

}
