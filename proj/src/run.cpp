#include "tucker_hurdle/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "tucker_hurdle/diagnostics.hpp"
#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

using nlohmann::json;

namespace {

const char* const kBlockNames[4] = {"caries.occurrence", "caries.severity", "fluorosis.occurrence",
                                    "fluorosis.severity"};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

BlockRanks parse_block_ranks(const json& j, BlockRanks r, const std::string& where) {
  check_keys(j, {"spatial", "predictor", "time"}, where);
  read(j, "spatial", r.spatial, where);
  read(j, "predictor", r.predictor, where);
  read(j, "time", r.time, where);
  return r;
}

ModelRanks parse_ranks(const json& j) {
  const std::string where = "ranks";
  check_keys(j, {"subject", "subject_occurrence", "subject_severity", "default", "blocks"}, where);
  ModelRanks r;
  if (j.contains("subject")) {
    read(j, "subject", r.subject_occurrence, where);
    r.subject_severity = r.subject_occurrence;
  }
  read(j, "subject_occurrence", r.subject_occurrence, where);
  read(j, "subject_severity", r.subject_severity, where);
  BlockRanks def;
  if (j.contains("default")) def = parse_block_ranks(j["default"], def, "ranks.default");
  r.blocks.fill(def);
  if (j.contains("blocks")) {
    const json& b = j["blocks"];
    check_keys(b, {kBlockNames[0], kBlockNames[1], kBlockNames[2], kBlockNames[3]}, "ranks.blocks");
    for (std::size_t k = 0; k < 4; ++k) {
      if (b.contains(kBlockNames[k])) {
        r.blocks[k] = parse_block_ranks(b[kBlockNames[k]], def, std::string("ranks.blocks.") + kBlockNames[k]);
      }
    }
  }
  return r;
}

json ranks_to_json(const ModelRanks& r) {
  json blocks = json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    blocks[kBlockNames[k]] = {{"spatial", r.blocks[k].spatial},
                              {"predictor", r.blocks[k].predictor},
                              {"time", r.blocks[k].time}};
  }
  return {{"subject_occurrence", r.subject_occurrence},
          {"subject_severity", r.subject_severity},
          {"blocks", blocks}};
}

void apply_sampler(const json& j, NutsConfig& n) {
  const std::string where = "sampler";
  check_keys(j,
             {"preset", "n_warmup", "n_samples", "n_chains", "target_accept", "max_tree_depth", "seed",
              "init_scale", "mass_matrix", "max_delta_h", "progress", "threads"},
             where);
  if (j.contains("preset")) {
    std::string preset;
    read(j, "preset", preset, where);
    if (preset == "paper") {
      n = NutsConfig::paper();
    } else if (preset == "test") {
      n = NutsConfig::test();
    } else {
      throw ConfigError("sampler.preset must be 'paper' or 'test'");
    }
  }
  read(j, "n_warmup", n.n_warmup, where);
  read(j, "n_samples", n.n_samples, where);
  read(j, "n_chains", n.n_chains, where);
  read(j, "target_accept", n.target_accept, where);
  read(j, "max_tree_depth", n.max_tree_depth, where);
  read(j, "seed", n.seed, where);
  read(j, "init_scale", n.init_scale, where);
  read(j, "max_delta_h", n.max_delta_h, where);
  read(j, "progress", n.progress, where);
  read(j, "threads", n.threads, where);
  if (j.contains("mass_matrix")) {
    std::string m;
    read(j, "mass_matrix", m, where);
    if (m == "diagonal") {
      n.mass_matrix = MassMatrix::diagonal;
    } else if (m == "identity") {
      n.mass_matrix = MassMatrix::identity;
    } else {
      throw ConfigError("sampler.mass_matrix must be 'diagonal' or 'identity'");
    }
  }
}

std::ofstream open_text(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::vector<std::vector<double>> split_trace(const std::vector<double>& flat, std::size_t n_chains,
                                             std::size_t n_samples) {
  std::vector<std::vector<double>> out(n_chains);
  for (std::size_t c = 0; c < n_chains; ++c) {
    out[c].assign(flat.begin() + static_cast<std::ptrdiff_t>(c * n_samples),
                  flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * n_samples));
  }
  return out;
}

struct DiagnosticsOutcome {
  std::vector<DiagnosticRow> rows;
  std::size_t n_divergent = 0;
};

DiagnosticsOutcome compute_diagnostics(const PosteriorDraws& draws, const PreparedRun& run,
                                       const Hyperparameters& hyper) {
  DiagnosticsOutcome out;
  const std::size_t total = draws.total_draws();
  const ModelDims& dims = run.layout.dims();

  // Identified functionals: log density, cutpoints and a strided subset of cell predictors.
  std::vector<std::string> names;
  std::vector<std::vector<double>> traces;
  names.push_back("lp");
  traces.emplace_back(total);
  for (Outcome o : kOutcomes) {
    for (int u = 1; u + 1 < dims.n_categories(o); ++u) {
      names.push_back(std::string("cutpoint.") + to_string(o) + "[" + std::to_string(u) + "]");
      traces.emplace_back(total);
    }
  }
  std::array<std::size_t, 4> n_cells{};
  std::size_t all_cells = 0;
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      n_cells[block_index(o, c)] = run.data.n_subjects * run.data.n_locations(o) * run.data.n_times;
      all_cells += n_cells[block_index(o, c)];
    }
  }
  const std::size_t stride = std::max<std::size_t>(1, (all_cells + 999) / 1000);
  std::vector<std::pair<std::size_t, std::size_t>> picked;
  std::size_t running = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t k = 0; k < n_cells[b]; ++k, ++running) {
      if (running % stride != 0) continue;
      picked.emplace_back(b, k);
      names.push_back(std::string("linpred.") + kBlockNames[b] + "[" + std::to_string(k) + "]");
      traces.emplace_back(total);
    }
  }
  const std::size_t first_linpred = names.size() - picked.size();
  for (std::size_t r = 0; r < total; ++r) {
    const auto draw = std::span<const double>(draws.values).subspan(r * draws.dimension, draws.dimension);
    traces[0][r] = log_posterior(draw, run.layout, run.data, hyper);
    const ModelParams p = run.layout.unpack(draw);
    std::size_t slot = 1;
    for (Outcome o : kOutcomes) {
      const auto alpha = cutpoints((o == Outcome::caries ? p.raw_caries : p.raw_fluorosis).values);
      for (double a : alpha) traces[slot++][r] = a;
    }
    const auto lin = draw_linear_predictors(run.layout, draw, run.data);
    for (std::size_t k = 0; k < picked.size(); ++k) {
      traces[first_linpred + k][r] = lin[picked[k].first][picked[k].second];
    }
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto chains = split_trace(traces[k], draws.n_chains, draws.n_samples);
    const double rhat = split_rhat(chains);
    out.rows.push_back(DiagnosticRow{names[k], "identified", rhat, rhat == 0.0 ? 0.0 : ess_bulk(chains),
                                     rhat == 0.0});
  }

  const ChainDiagnostics d = diagnostics(draws);
  for (std::size_t i = 0; i < draws.dimension; ++i) {
    out.rows.push_back(DiagnosticRow{run.layout.coordinate_name(i), "parameter", d.split_rhat[i],
                                     d.ess_bulk[i], d.zero_variance[i]});
  }
  out.n_divergent = d.n_divergent;
  return out;
}

void write_summaries(const RunConfig& cfg, const PreparedRun& run, const PosteriorDraws& draws,
                     std::ostream& log) {
  const auto tables = summarize(draws, run.layout, run.data, run.summary);
  write_summary_tables(cfg.output_dir, "summary_", tables);
  if (!run.indicator.empty()) {
    const auto strata = stratified_summary(draws, run.layout, run.data, run.indicator, run.summary);
    write_summary_tables(cfg.output_dir, "stratum0_summary_", strata[0]);
    write_summary_tables(cfg.output_dir, "stratum1_summary_", strata[1]);
  }
  log << "summary tables written to " << cfg.output_dir.string() << "\n";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const json::exception*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const RankError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const ContractError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const SamplerError*>(&e)) return kExitSampler;
  return 1;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"data", "ranks", "priors", "sampler", "summary", "diagnostics", "output"}, "config");
  RunConfig cfg;
  if (!j.contains("data")) throw ConfigError("config.data is required");
  const json& d = j["data"];
  check_keys(d, {"caries", "fluorosis", "covariates_occurrence", "covariates_severity", "categories"},
             "data");
  for (const char* key : {"caries", "fluorosis", "covariates_occurrence", "covariates_severity"}) {
    if (!d.contains(key)) throw ConfigError(std::string("data.") + key + " is required");
  }
  std::string s;
  read(d, "caries", s, "data");
  cfg.data.caries = resolve(base_dir, s);
  read(d, "fluorosis", s, "data");
  cfg.data.fluorosis = resolve(base_dir, s);
  read(d, "covariates_occurrence", s, "data");
  cfg.data.covariates_occurrence = resolve(base_dir, s);
  read(d, "covariates_severity", s, "data");
  cfg.data.covariates_severity = resolve(base_dir, s);
  if (d.contains("categories")) {
    check_keys(d["categories"], {"caries", "fluorosis"}, "data.categories");
    read(d["categories"], "caries", cfg.n_caries_categories, "data.categories");
    read(d["categories"], "fluorosis", cfg.n_fluorosis_categories, "data.categories");
  }
  if (j.contains("ranks")) cfg.ranks = parse_ranks(j["ranks"]);
  if (j.contains("priors")) {
    const json& p = j["priors"];
    check_keys(p, {"sigma_a", "sigma_b", "cutpoint_sd", "global_scale"}, "priors");
    read(p, "sigma_a", cfg.hyper.sigma_a, "priors");
    read(p, "sigma_b", cfg.hyper.sigma_b, "priors");
    read(p, "cutpoint_sd", cfg.hyper.cutpoint_sd, "priors");
    if (p.contains("global_scale")) {
      read(p, "global_scale", s, "priors");
      if (s == "per_tensor") {
        cfg.hyper.global_scale = GlobalScaleMode::per_tensor;
      } else if (s == "shared") {
        cfg.hyper.global_scale = GlobalScaleMode::shared;
      } else {
        throw ConfigError("priors.global_scale must be 'per_tensor' or 'shared'");
      }
    }
    for (double v : {cfg.hyper.sigma_a, cfg.hyper.sigma_b, cfg.hyper.cutpoint_sd}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("prior scales must be positive and finite");
    }
  }
  if (j.contains("sampler")) apply_sampler(j["sampler"], cfg.nuts);
  if (j.contains("summary")) {
    const json& sm = j["summary"];
    check_keys(sm, {"level", "aggregation", "stratify", "batch"}, "summary");
    read(sm, "level", cfg.level, "summary");
    read(sm, "batch", cfg.summary_batch, "summary");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ConfigError("summary.level must lie in (0, 1)");
    if (cfg.summary_batch == 0) throw ConfigError("summary.batch must be positive");
    if (sm.contains("aggregation") && !sm["aggregation"].is_null()) {
      read(sm, "aggregation", s, "summary");
      cfg.aggregation = resolve(base_dir, s);
    }
    if (sm.contains("stratify") && !sm["stratify"].is_null()) {
      const json& st = sm["stratify"];
      check_keys(st, {"file", "column"}, "summary.stratify");
      if (!st.contains("file") || !st.contains("column")) {
        throw ConfigError("summary.stratify needs file and column");
      }
      StratifyOptions so;
      read(st, "file", s, "summary.stratify");
      so.file = resolve(base_dir, s);
      read(st, "column", so.column, "summary.stratify");
      cfg.stratify = so;
    }
  }
  if (j.contains("diagnostics")) {
    const json& dg = j["diagnostics"];
    check_keys(dg, {"rhat_threshold", "fail_on_rhat", "scope"}, "diagnostics");
    read(dg, "rhat_threshold", cfg.rhat_threshold, "diagnostics");
    read(dg, "fail_on_rhat", cfg.fail_on_rhat, "diagnostics");
    read(dg, "scope", cfg.rhat_scope, "diagnostics");
    if (cfg.rhat_scope != "identified" && cfg.rhat_scope != "all") {
      throw ConfigError("diagnostics.scope must be 'identified' or 'all'");
    }
  }
  if (j.contains("output")) {
    read(j, "output", s, "config");
    cfg.output_dir = resolve(base_dir, s);
  } else {
    cfg.output_dir = base_dir / "out";
  }
  cfg.nuts.validate();
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void RunConfig::apply_preset(const std::string& name) {
  NutsConfig preset;
  if (name == "paper") {
    preset = NutsConfig::paper();
  } else if (name == "test") {
    preset = NutsConfig::test();
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  nuts.n_warmup = preset.n_warmup;
  nuts.n_samples = preset.n_samples;
  nuts.n_chains = preset.n_chains;
}

PreparedRun prepare_run(const RunConfig& cfg) {
  cfg.nuts.validate();
  PreparedRun run;
  run.data = load_dataset(cfg.data, cfg.n_caries_categories, cfg.n_fluorosis_categories);
  const ModelDims dims = run.data.dims(cfg.ranks);
  dims.validate();
  run.layout = ParamLayout(dims, cfg.hyper.global_scale);
  run.summary.level = cfg.level;
  run.summary.batch = cfg.summary_batch;
  run.summary.map = cfg.aggregation ? load_aggregation_map(*cfg.aggregation, run.data)
                                    : AggregationMap::identity(run.data);
  run.summary.map.validate(run.data);
  if (cfg.stratify) run.indicator = load_indicator(cfg.stratify->file, cfg.stratify->column, run.data);
  // Rank-deficient designs (overall and per stratum) are rejected here rather than after sampling.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  groups.emplace_back("", std::vector<std::size_t>{});
  for (std::size_t i = 0; i < run.data.n_subjects; ++i) groups[0].second.push_back(i);
  for (int level : {0, 1}) {
    if (run.indicator.empty()) break;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < run.indicator.size(); ++i) {
      if (run.indicator[i] == level) members.push_back(i);
    }
    if (members.empty()) {
      throw DataError(cfg.stratify->file.string() + ": stratum " + std::to_string(level) +
                      " has no subjects");
    }
    groups.emplace_back(" in stratum " + std::to_string(level), std::move(members));
  }
  for (const auto& [label, members] : groups) {
    for (Component c : kComponents) {
      const Matrix& x = run.data.design(c);
      const auto cols = non_intercept_columns(x);
      for (std::size_t t = 0; t < run.data.n_times; ++t) {
        Matrix xt(static_cast<Eigen::Index>(members.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t r = 0; r < members.size(); ++r) {
          for (std::size_t k = 0; k < cols.size(); ++k) {
            xt(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                x(static_cast<Eigen::Index>(members[r] * run.data.n_times + t), cols[k]);
          }
        }
        try {
          (void)projection_matrix(xt);
        } catch (const RankError& e) {
          throw RankError(std::string(to_string(c)) + " design at age " + run.data.time_labels[t] +
                          label + ": " + e.what());
        }
      }
    }
  }
  return run;
}

int run_fit(const RunConfig& cfg, std::ostream& log) {
  const PreparedRun run = prepare_run(cfg);
  fs::create_directories(cfg.output_dir);
  log << "fitting " << run.layout.dimension() << " parameters on " << run.data.n_subjects
      << " subjects (" << cfg.nuts.n_chains << " chains, " << cfg.nuts.n_warmup << " warmup, "
      << cfg.nuts.n_samples << " kept)\n";
  const PosteriorTarget target(run.layout, run.data, cfg.hyper);
  const PosteriorDraws draws = run_chains(cfg.nuts, target);

  json extra = {{"seed", cfg.nuts.seed},
                {"n_warmup", cfg.nuts.n_warmup},
                {"target_accept", cfg.nuts.target_accept},
                {"max_tree_depth", cfg.nuts.max_tree_depth}};
  save_draws(cfg.output_dir / "draws.bin", draws, run.layout, extra);

  const DiagnosticsOutcome diag = compute_diagnostics(draws, run, cfg.hyper);
  write_diagnostics_csv(cfg.output_dir / "diagnostics.csv", diag.rows, diag.n_divergent);
  write_summaries(cfg, run, draws, log);

  std::size_t n_bad = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : diag.rows) {
    if (cfg.rhat_scope == "identified" && r.kind != "identified") continue;
    if (r.zero_variance) continue;
    if (r.split_rhat > worst) {
      worst = r.split_rhat;
      worst_name = r.quantity;
    }
    if (r.split_rhat > cfg.rhat_threshold) ++n_bad;
  }
  log << "divergent transitions: " << diag.n_divergent << "\n";
  log << "max split R-hat (" << cfg.rhat_scope << "): " << std::setprecision(4) << worst << " at "
      << worst_name << "\n";
  if (n_bad > 0) {
    log << n_bad << " quantities exceed R-hat " << cfg.rhat_threshold << "\n";
    if (cfg.fail_on_rhat) return kExitDiagnostics;
  }
  return kExitOk;
}

int run_summarize(const RunConfig& cfg, const fs::path& draws_path, std::ostream& log) {
  const PreparedRun run = prepare_run(cfg);
  const DrawsFile file = load_draws(draws_path);
  if (file.layout.to_json() != run.layout.to_json()) {
    throw DataError(draws_path.string() + ": parameter layout does not match the configured data and ranks");
  }
  fs::create_directories(cfg.output_dir);
  write_summaries(cfg, run, file.draws, log);
  return kExitOk;
}

SimConfig sim_config_from_json(const json& j) {
  const std::string where = "simulation";
  check_keys(j,
             {"preset", "n_subjects", "n_caries_locations", "n_fluorosis_locations", "n_times",
              "p_occurrence", "p_severity", "categories", "rank", "ranks", "core_sparsity",
              "missing_fraction", "covariates", "shared_covariates", "raw_caries", "raw_fluorosis",
              "core_scale", "locations_per_tooth", "seed"},
             where);
  SimConfig cfg;
  if (j.contains("preset")) {
    std::string p;
    read(j, "preset", p, where);
    if (p == "desk") {
      cfg = SimConfig::desk(false);
    } else if (p == "desk-longitudinal") {
      cfg = SimConfig::desk(true);
    } else {
      throw ConfigError("simulation.preset must be 'desk' or 'desk-longitudinal'");
    }
  }
  read(j, "n_subjects", cfg.n_subjects, where);
  read(j, "n_caries_locations", cfg.n_caries_locations, where);
  read(j, "n_fluorosis_locations", cfg.n_fluorosis_locations, where);
  read(j, "n_times", cfg.n_times, where);
  read(j, "p_occurrence", cfg.p_occurrence, where);
  read(j, "p_severity", cfg.p_severity, where);
  if (j.contains("categories")) {
    check_keys(j["categories"], {"caries", "fluorosis"}, "simulation.categories");
    read(j["categories"], "caries", cfg.n_caries_categories, where);
    read(j["categories"], "fluorosis", cfg.n_fluorosis_categories, where);
  }
  if (j.contains("rank")) {
    std::size_t r = 0;
    read(j, "rank", r, where);
    cfg.ranks = ModelRanks::uniform(r);
  }
  if (j.contains("ranks")) cfg.ranks = parse_ranks(j["ranks"]);
  read(j, "core_sparsity", cfg.core_sparsity, where);
  read(j, "missing_fraction", cfg.missing_fraction, where);
  if (j.contains("covariates")) {
    std::string c;
    read(j, "covariates", c, where);
    if (c == "normal") {
      cfg.covariates = CovariateDistribution::normal;
    } else if (c == "uniform") {
      cfg.covariates = CovariateDistribution::uniform;
    } else {
      throw ConfigError("simulation.covariates must be 'normal' or 'uniform'");
    }
  }
  read(j, "shared_covariates", cfg.shared_covariates, where);
  read(j, "raw_caries", cfg.raw_caries, where);
  read(j, "raw_fluorosis", cfg.raw_fluorosis, where);
  read(j, "core_scale", cfg.core_scale, where);
  read(j, "locations_per_tooth", cfg.locations_per_tooth, where);
  read(j, "seed", cfg.seed, where);
  cfg.validate();
  return cfg;
}

void run_simulate(const json& sim, const fs::path& out_dir) {
  const SimConfig cfg = sim_config_from_json(sim);
  const SimulatedData s = generate(cfg);
  fs::create_directories(out_dir);
  DatasetPaths paths{out_dir / "caries.csv", out_dir / "fluorosis.csv", out_dir / "x_occurrence.csv",
                     out_dir / "x_severity.csv"};
  save_dataset(s.data, paths);
  save_aggregation_map(s.map, s.data, out_dir / "map.csv");
  save_indicator(s.earlier_caries, "earlier_caries", s.data, out_dir / "strata.csv");

  json truth;
  truth["raw_caries"] = s.truth.raw_caries.values;
  truth["raw_fluorosis"] = s.truth.raw_fluorosis.values;
  json lin = json::object();
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      lin[kBlockNames[block_index(o, c)]] =
          linear_predictor(s.truth.coefficients, o, c, s.data.design(c), s.data.n_times);
    }
  }
  truth["linear_predictors"] = lin;
  truth["cell_order"] = "subject, location, time";
  open_text(out_dir / "truth.json") << truth.dump(1) << "\n";

  json run = {
      {"data",
       {{"caries", "caries.csv"},
        {"fluorosis", "fluorosis.csv"},
        {"covariates_occurrence", "x_occurrence.csv"},
        {"covariates_severity", "x_severity.csv"},
        {"categories", {{"caries", cfg.n_caries_categories}, {"fluorosis", cfg.n_fluorosis_categories}}}}},
      {"ranks", ranks_to_json(cfg.ranks)},
      {"sampler", {{"preset", "test"}, {"seed", cfg.seed}}},
      {"summary",
       {{"level", 0.95},
        {"aggregation", "map.csv"},
        {"stratify", {{"file", "strata.csv"}, {"column", "earlier_caries"}}}}},
      {"output", "fit"}};
  open_text(out_dir / "run.json") << run.dump(2) << "\n";
}

double run_check_grad(const RunConfig& cfg, std::size_t n_points, std::uint64_t seed) {
  const PreparedRun run = prepare_run(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::vector<double> v(run.layout.dimension());
  double worst = 0.0;
  for (std::size_t k = 0; k < n_points; ++k) {
    for (double& x : v) x = normal(rng);
    worst = std::max(worst, max_gradient_error(v, run.layout, run.data, cfg.hyper));
  }
  return worst;
}

}  // namespace tucker_hurdle
