#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "tucker_hurdle/inference.hpp"
#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/sampler.hpp"

namespace tucker_hurdle {

enum class CovariateDistribution { normal, uniform };

struct SimConfig {
  std::size_t n_subjects = 60;
  std::size_t n_caries_locations = 8;
  std::size_t n_fluorosis_locations = 6;
  std::size_t n_times = 1;
  /// Columns of each design, the first being an intercept of ones.
  std::size_t p_occurrence = 3;
  std::size_t p_severity = 3;
  int n_caries_categories = 3;
  int n_fluorosis_categories = 3;
  ModelRanks ranks = ModelRanks::uniform(2);
  double core_sparsity = 0.0;
  double missing_fraction = 0.2;
  CovariateDistribution covariates = CovariateDistribution::normal;
  /// Severity design reuses the occurrence design when the widths agree.
  bool shared_covariates = true;
  /// Empty means all zeros; otherwise length K-1.
  std::vector<double> raw_caries;
  std::vector<double> raw_fluorosis;
  /// Multiplies every generated core entry (0 gives all-zero cores).
  double core_scale = 1.0;
  /// Number of consecutive locations per tooth in the generated aggregation map.
  std::size_t locations_per_tooth = 2;
  std::uint64_t seed = 1;

  /// The desk-scale fixture, cross-sectional or with three ages.
  static SimConfig desk(bool longitudinal = false);
  /// Throws ConfigError on invalid counts, fractions or ranks.
  void validate() const;
};

struct GroundTruth {
  LinkedCoefficients coefficients;
  CutpointRaw raw_caries;
  CutpointRaw raw_fluorosis;
  CoefficientTensors tensors;
};

struct SimulatedData {
  PairedDataset data;
  GroundTruth truth;
  AggregationMap map;
  /// 1 when the subject shows caries on the first caries tooth at the first time.
  std::vector<int> earlier_caries;
};

SimulatedData generate(const SimConfig& cfg);

struct RecoveryReport {
  double linpred_rmse = 0.0;
  /// RMSE of predicting every linear predictor by zero.
  double zero_rmse = 0.0;
  double coverage = 0.0;
  std::size_t n_cells = 0;
  std::size_t degenerate_intervals = 0;
};

/// Compares posterior linear predictors of every cell of the four blocks with the truth.
RecoveryReport recovery_error(const GroundTruth& truth, const PosteriorDraws& draws,
                              const ParamLayout& layout, const PairedDataset& data,
                              double level = 0.95);

}  // namespace tucker_hurdle
