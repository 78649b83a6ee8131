#include "tucker_hurdle/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

void fill_normal(Matrix& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  }
}

Matrix make_design(std::size_t rows, std::size_t p, CovariateDistribution dist,
                   std::mt19937_64& rng) {
  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-std::sqrt(3.0), std::sqrt(3.0));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = 1.0;
    for (Eigen::Index c = 1; c < x.cols(); ++c) {
      x(r, c) = dist == CovariateDistribution::normal ? normal(rng) : uniform(rng);
    }
  }
  return x;
}

std::string padded(const std::string& prefix, std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return prefix + s;
}

}  // namespace

SimConfig SimConfig::desk(bool longitudinal) {
  SimConfig c;
  if (longitudinal) c.n_times = 3;
  return c;
}

void SimConfig::validate() const {
  if (n_subjects == 0 || n_caries_locations == 0 || n_fluorosis_locations == 0 || n_times == 0) {
    throw ConfigError("simulation counts must be positive");
  }
  if (p_occurrence < 1 || p_severity < 1) throw ConfigError("designs need at least the intercept");
  if (n_caries_categories < 2 || n_fluorosis_categories < 2) {
    throw ConfigError("category counts must be at least 2");
  }
  if (!(core_sparsity >= 0.0 && core_sparsity <= 1.0)) throw ConfigError("core_sparsity must be in [0, 1]");
  if (!(missing_fraction >= 0.0 && missing_fraction <= 1.0)) {
    throw ConfigError("missing_fraction must be in [0, 1]");
  }
  if (!raw_caries.empty() && raw_caries.size() != static_cast<std::size_t>(n_caries_categories - 1)) {
    throw ConfigError("raw_caries must have C-1 entries");
  }
  if (!raw_fluorosis.empty() &&
      raw_fluorosis.size() != static_cast<std::size_t>(n_fluorosis_categories - 1)) {
    throw ConfigError("raw_fluorosis must have F-1 entries");
  }
  if (locations_per_tooth == 0) throw ConfigError("locations_per_tooth must be positive");
  ModelDims d;
  d.n_subjects = n_subjects;
  d.n_times = n_times;
  d.longitudinal = n_times > 1;
  d.n_caries_locations = n_caries_locations;
  d.n_fluorosis_locations = n_fluorosis_locations;
  d.p_occurrence = p_occurrence;
  d.p_severity = p_severity;
  d.n_caries_categories = n_caries_categories;
  d.n_fluorosis_categories = n_fluorosis_categories;
  d.ranks = ranks;
  d.validate();
}

SimulatedData generate(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SimulatedData out;
  PairedDataset& data = out.data;
  data.n_subjects = cfg.n_subjects;
  data.n_times = cfg.n_times;
  data.longitudinal = cfg.n_times > 1;
  data.n_caries_locations = cfg.n_caries_locations;
  data.n_fluorosis_locations = cfg.n_fluorosis_locations;
  data.n_caries_categories = cfg.n_caries_categories;
  data.n_fluorosis_categories = cfg.n_fluorosis_categories;

  const std::size_t rows = cfg.n_subjects * cfg.n_times;
  data.x_occurrence = make_design(rows, cfg.p_occurrence, cfg.covariates, rng);
  const bool share = cfg.shared_covariates && cfg.p_occurrence == cfg.p_severity;
  data.x_severity = share ? data.x_occurrence : make_design(rows, cfg.p_severity, cfg.covariates, rng);

  for (std::size_t i = 0; i < cfg.n_subjects; ++i) data.subject_ids.push_back(padded("s", i + 1, 3));
  for (std::size_t q = 0; q < cfg.n_caries_locations; ++q) {
    data.caries_location_ids.push_back(padded("c", q + 1, 2));
  }
  for (std::size_t q = 0; q < cfg.n_fluorosis_locations; ++q) {
    data.fluorosis_location_ids.push_back(padded("f", q + 1, 2));
  }
  if (cfg.n_times == 1) {
    data.time_labels = {"-"};
  } else if (cfg.n_times == 3) {
    data.time_labels = {"9", "13", "17"};
  } else {
    for (std::size_t t = 0; t < cfg.n_times; ++t) data.time_labels.push_back(std::to_string(t + 1));
  }
  data.occurrence_names.push_back("intercept");
  for (std::size_t j = 1; j < cfg.p_occurrence; ++j) data.occurrence_names.push_back("x" + std::to_string(j));
  data.severity_names.push_back("intercept");
  for (std::size_t j = 1; j < cfg.p_severity; ++j) {
    data.severity_names.push_back((share ? "x" : "s") + std::to_string(j));
  }

  const ModelDims dims = data.dims(cfg.ranks);
  GroundTruth& truth = out.truth;
  truth.coefficients = LinkedCoefficients::zeros(dims);
  auto& lc = truth.coefficients;
  fill_normal(lc.subject_occurrence, rng);
  fill_normal(lc.subject_severity, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& b : lc.blocks) {
    fill_normal(b.spatial, rng);
    fill_normal(b.predictor, rng);
    if (dims.longitudinal) fill_normal(b.time, rng);
    auto core = b.core.data();
    for (double& g : core) g = cfg.core_scale * normal(rng);
    const auto n_zero = static_cast<std::size_t>(std::round(cfg.core_sparsity * static_cast<double>(core.size())));
    std::vector<std::size_t> idx(core.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < n_zero; ++k) core[idx[k]] = 0.0;
  }
  truth.raw_caries.values = cfg.raw_caries.empty()
                                ? std::vector<double>(static_cast<std::size_t>(cfg.n_caries_categories - 1), 0.0)
                                : cfg.raw_caries;
  truth.raw_fluorosis.values =
      cfg.raw_fluorosis.empty()
          ? std::vector<double>(static_cast<std::size_t>(cfg.n_fluorosis_categories - 1), 0.0)
          : cfg.raw_fluorosis;
  truth.tensors = assemble_coefficients(lc);

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (Outcome o : kOutcomes) {
    const auto alphas = cutpoints(o == Outcome::caries ? truth.raw_caries.values
                                                       : truth.raw_fluorosis.values);
    const auto eta_occ = linear_predictor(lc, o, Component::occurrence, data.x_occurrence, cfg.n_times);
    const auto eta_sev = linear_predictor(lc, o, Component::severity, data.x_severity, cfg.n_times);
    auto& resp = data.responses(o);
    resp.resize(eta_occ.size());
    for (std::size_t k = 0; k < resp.size(); ++k) {
      const auto pmf = cell_pmf(eta_occ[k], eta_sev[k], alphas).pmf;
      const double u = uniform(rng);
      double acc = 0.0;
      int y = static_cast<int>(pmf.size()) - 1;
      for (std::size_t c = 0; c < pmf.size(); ++c) {
        acc += pmf[c];
        if (u < acc) {
          y = static_cast<int>(c);
          break;
        }
      }
      resp[k] = y;
    }
    const auto n_missing =
        static_cast<std::size_t>(std::round(cfg.missing_fraction * static_cast<double>(resp.size())));
    std::vector<std::size_t> idx(resp.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < n_missing; ++k) resp[idx[k]] = kMissing;
  }
  data.validate();

  for (Outcome o : kOutcomes) {
    const auto& ids = data.location_ids(o);
    const std::string prefix = o == Outcome::caries ? "tooth" : "ftooth";
    const std::vector<std::string> surface_names =
        o == Outcome::caries ? std::vector<std::string>{"b", "d", "l", "m", "o"}
                             : std::vector<std::string>{"C", "I", "M", "O"};
    for (std::size_t q = 0; q < ids.size(); ++q) {
      const std::size_t tooth = q / cfg.locations_per_tooth;
      const std::size_t pos = q % cfg.locations_per_tooth;
      const std::string surface =
          pos < surface_names.size() ? surface_names[pos] : "z" + std::to_string(pos + 1);
      out.map.outcomes[static_cast<std::size_t>(o)].push_back(
          LocationGroup{prefix + std::to_string(tooth + 1), surface,
                        tooth % 2 == 0 ? "anterior" : "posterior"});
    }
  }

  out.earlier_caries.assign(cfg.n_subjects, 0);
  for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
    for (std::size_t q = 0; q < std::min(cfg.locations_per_tooth, cfg.n_caries_locations); ++q) {
      if (data.caries[data.cell(i, q, 0, Outcome::caries)] > 0) out.earlier_caries[i] = 1;
    }
  }
  return out;
}

RecoveryReport recovery_error(const GroundTruth& truth, const PosteriorDraws& draws,
                              const ParamLayout& layout, const PairedDataset& data, double level) {
  if (draws.dimension != layout.dimension()) throw ShapeError("draws do not match the layout");
  truth.coefficients.validate(layout.dims());
  std::array<std::vector<double>, 4> true_eta;
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      true_eta[block_index(o, c)] =
          linear_predictor(truth.coefficients, o, c, data.design(c), data.n_times);
    }
  }
  std::size_t n_cells = 0;
  for (const auto& v : true_eta) n_cells += v.size();
  const std::size_t n_draws = draws.total_draws();
  // samples[cell * n_draws + draw]
  std::vector<double> samples(n_cells * n_draws);
  for (std::size_t g = 0; g < n_draws; ++g) {
    const auto lp = draw_linear_predictors(layout, draws.draw(g / draws.n_samples, g % draws.n_samples), data);
    std::size_t cell = 0;
    for (const auto& block : lp) {
      for (double v : block) samples[(cell++) * n_draws + g] = v;
    }
  }
  RecoveryReport r;
  r.n_cells = n_cells;
  double se = 0.0;
  double se0 = 0.0;
  std::size_t covered = 0;
  std::size_t cell = 0;
  for (const auto& block : true_eta) {
    for (double t : block) {
      std::span<const double> s(&samples[cell * n_draws], n_draws);
      const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n_draws);
      se += (mean - t) * (mean - t);
      se0 += t * t;
      const Interval iv = n_draws >= 2 ? credible_interval(s, level) : Interval{s[0], s[0]};
      if (iv.lower == iv.upper) ++r.degenerate_intervals;
      if (iv.lower <= t && t <= iv.upper) ++covered;
      ++cell;
    }
  }
  r.linpred_rmse = std::sqrt(se / static_cast<double>(n_cells));
  r.zero_rmse = std::sqrt(se0 / static_cast<double>(n_cells));
  r.coverage = static_cast<double>(covered) / static_cast<double>(n_cells);
  return r;
}

}  // namespace tucker_hurdle
