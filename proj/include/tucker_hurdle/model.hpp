#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tucker_hurdle/tensor.hpp"

namespace tucker_hurdle {

/// Reserved response value for an unobserved cell.
inline constexpr int kMissing = -1;

enum class Outcome { caries = 0, fluorosis = 1 };
enum class Component { occurrence = 0, severity = 1 };

inline constexpr std::array<Outcome, 2> kOutcomes{Outcome::caries, Outcome::fluorosis};
inline constexpr std::array<Component, 2> kComponents{Component::occurrence, Component::severity};

/// Index of the (outcome, component) coefficient block: mu=0, beta=1, rho=2, theta=3.
constexpr std::size_t block_index(Outcome o, Component c) {
  return static_cast<std::size_t>(o) * 2 + static_cast<std::size_t>(c);
}
const char* to_string(Outcome o);
const char* to_string(Component c);

/// Unconstrained cutpoint parameters (delta_0..delta_{K-2}) for K ordered categories.
struct CutpointRaw {
  std::vector<double> values;
};

/// Ordered cutpoints alpha_u = sum_{j=1..u} exp(raw_j) - raw_0, u = 1..K-2.
std::vector<double> cutpoints(std::span<const double> raw);

double logistic(double x);
/// log(logistic(x)) without overflow or underflow.
double log_logistic(double x);

/// P(Y > 0) for occurrence linear predictor eta.
double occurrence_prob(double eta);
double log_occurrence_prob(double eta);

/// Mass over the positive categories 1..K-1 under the proportional-odds severity model.
std::vector<double> severity_pmf(double eta, std::span<const double> alphas);

struct CellProbabilities {
  std::vector<double> pmf;

  /// P(Y <= u).
  double cdf(std::size_t u) const;
};

/// Hurdle pmf over categories 0..K-1.
CellProbabilities cell_pmf(double eta_occ, double eta_sev, std::span<const double> alphas);

/// log P(Y = y) computed in the log domain.
double cell_log_prob(int y, double eta_occ, double eta_sev, std::span<const double> alphas);

/// Partial derivatives of cell_log_prob.
struct CellLogProbGrad {
  double value = 0.0;
  double d_eta_occ = 0.0;
  double d_eta_sev = 0.0;
  /// d/d(alpha_{y-1}) and d/d(alpha_y); entries for absent cutpoints stay zero.
  double d_alpha_lower = 0.0;
  double d_alpha_upper = 0.0;
};
CellLogProbGrad cell_log_prob_grad(int y, double eta_occ, double eta_sev,
                                   std::span<const double> alphas);

/// Multilinear ranks for one outcome/component block. `time` is ignored cross-sectionally.
struct BlockRanks {
  std::size_t spatial = 2;
  std::size_t predictor = 2;
  std::size_t time = 1;
};

struct ModelRanks {
  std::size_t subject_occurrence = 2;
  std::size_t subject_severity = 2;
  std::array<BlockRanks, 4> blocks{};

  std::size_t subject(Component c) const {
    return c == Component::occurrence ? subject_occurrence : subject_severity;
  }
  static ModelRanks uniform(std::size_t r);
};

/// Sizes of everything the parameter vector depends on.
struct ModelDims {
  std::size_t n_subjects = 0;
  std::size_t n_times = 1;
  bool longitudinal = false;
  std::size_t n_caries_locations = 0;
  std::size_t n_fluorosis_locations = 0;
  std::size_t p_occurrence = 0;
  std::size_t p_severity = 0;
  int n_caries_categories = 2;
  int n_fluorosis_categories = 2;
  ModelRanks ranks;

  std::size_t n_locations(Outcome o) const {
    return o == Outcome::caries ? n_caries_locations : n_fluorosis_locations;
  }
  std::size_t n_predictors(Component c) const {
    return c == Component::occurrence ? p_occurrence : p_severity;
  }
  int n_categories(Outcome o) const {
    return o == Outcome::caries ? n_caries_categories : n_fluorosis_categories;
  }
  /// Throws ConfigError naming the first rank that exceeds its dimension.
  void validate() const;
};

/// Spatial, predictor, optional time factor and core for one coefficient array.
struct FactorBlock {
  Matrix spatial;
  Matrix predictor;
  Matrix time;  // empty cross-sectionally
  DenseTensor core;
};

/// The four linked Tucker factorizations. Both occurrence blocks use subject_occurrence;
/// both severity blocks use subject_severity.
struct LinkedCoefficients {
  Matrix subject_occurrence;
  Matrix subject_severity;
  std::array<FactorBlock, 4> blocks;

  bool longitudinal() const { return blocks[0].time.size() > 0; }
  const Matrix& subject(Component c) const {
    return c == Component::occurrence ? subject_occurrence : subject_severity;
  }
  Matrix& subject(Component c) {
    return c == Component::occurrence ? subject_occurrence : subject_severity;
  }
  const FactorBlock& block(Outcome o, Component c) const { return blocks[block_index(o, c)]; }
  FactorBlock& block(Outcome o, Component c) { return blocks[block_index(o, c)]; }

  /// Zero-valued coefficients with the shapes implied by `dims`.
  static LinkedCoefficients zeros(const ModelDims& dims);
  /// Throws ShapeError if shapes disagree with `dims`.
  void validate(const ModelDims& dims) const;
  /// Tucker factorization of one block with the shared subject factor as mode 1.
  TuckerFactor tucker(Outcome o, Component c) const;
};

/// mu, beta, rho, theta in block_index order. Shapes n x |Q| x p (x T).
struct CoefficientTensors {
  std::array<DenseTensor, 4> tensors;

  const DenseTensor& get(Outcome o, Component c) const { return tensors[block_index(o, c)]; }
};
CoefficientTensors assemble_coefficients(const LinkedCoefficients& lc);

/// Observed paired responses. Response arrays are (subject, location, time) row-major;
/// design matrices have one row per (subject, time), row index subject * n_times + time.
struct PairedDataset {
  std::size_t n_subjects = 0;
  std::size_t n_times = 1;
  bool longitudinal = false;
  std::size_t n_caries_locations = 0;
  std::size_t n_fluorosis_locations = 0;
  int n_caries_categories = 2;
  int n_fluorosis_categories = 2;
  std::vector<int> caries;
  std::vector<int> fluorosis;
  Matrix x_occurrence;
  Matrix x_severity;

  std::vector<std::string> subject_ids;
  std::vector<std::string> caries_location_ids;
  std::vector<std::string> fluorosis_location_ids;
  std::vector<std::string> time_labels;
  std::vector<std::string> occurrence_names;
  std::vector<std::string> severity_names;

  std::size_t n_locations(Outcome o) const {
    return o == Outcome::caries ? n_caries_locations : n_fluorosis_locations;
  }
  int n_categories(Outcome o) const {
    return o == Outcome::caries ? n_caries_categories : n_fluorosis_categories;
  }
  const std::vector<int>& responses(Outcome o) const {
    return o == Outcome::caries ? caries : fluorosis;
  }
  std::vector<int>& responses(Outcome o) { return o == Outcome::caries ? caries : fluorosis; }
  const std::vector<std::string>& location_ids(Outcome o) const {
    return o == Outcome::caries ? caries_location_ids : fluorosis_location_ids;
  }
  const Matrix& design(Component c) const {
    return c == Component::occurrence ? x_occurrence : x_severity;
  }
  std::size_t cell(std::size_t subject, std::size_t location, std::size_t time,
                   Outcome o) const {
    return (subject * n_locations(o) + location) * n_times + time;
  }

  /// Fills empty label vectors with default names.
  void fill_default_labels();
  /// Throws DataError on out-of-range responses, non-finite design entries, bad sizes.
  void validate() const;
  ModelDims dims(const ModelRanks& ranks) const;
};

/// Per-cell linear predictor eta[i, q, t] = sum_j coef[i, q, j, t] * x[i, t, j] for one block,
/// computed by a fused contraction that never materializes the coefficient tensor.
std::vector<double> linear_predictor(const LinkedCoefficients& lc, Outcome o, Component c,
                                     const Matrix& design, std::size_t n_times);

/// Observed-data log-likelihood. Missing cells contribute nothing.
double log_likelihood(const PairedDataset& data, const LinkedCoefficients& lc,
                      const CutpointRaw& raw_caries, const CutpointRaw& raw_fluorosis);

/// Gradient of log_likelihood with respect to every factor, core and cutpoint raw.
struct LikelihoodGradient {
  double value = 0.0;
  LinkedCoefficients coefficients;
  std::vector<double> raw_caries;
  std::vector<double> raw_fluorosis;
};
LikelihoodGradient log_likelihood_gradient(const PairedDataset& data,
                                           const LinkedCoefficients& lc,
                                           const CutpointRaw& raw_caries,
                                           const CutpointRaw& raw_fluorosis);

}  // namespace tucker_hurdle
