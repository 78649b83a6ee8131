#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/sampler.hpp"

namespace tucker_hurdle {

/// Draw-major samples of a (p+1)-vector: values[draw * width + k].
struct ProjectedDraws {
  std::size_t n_draws = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t draw, std::size_t k) const { return values[draw * width + k]; }
  std::vector<double> coordinate(std::size_t k) const;
};

/// Design columns that are not identically one; an all-ones column is the intercept.
std::vector<Eigen::Index> non_intercept_columns(const Matrix& design);

/// Left inverse (X1'X1)^{-1} X1' of X1 = [1 | X], computed by column-pivoted QR.
/// Throws RankError naming the dependent columns when X1 lacks full column rank.
Matrix projection_matrix(const Matrix& x);

/// Applies `projection` ((p+1) x n) to every row of `linpred_draws` (draws x n).
ProjectedDraws project_draws(const Matrix& linpred_draws, const Matrix& projection);

/// Per-draw mean over the locations of each tooth; tooth_of_location[q] < n_teeth.
std::vector<ProjectedDraws> average_within_tooth(std::span<const ProjectedDraws> projected,
                                                 std::span<const std::size_t> tooth_of_location,
                                                 std::size_t n_teeth);

/// W2 barycenter of equal-weight 1-D empirical distributions, evaluated at the
/// mid-quantiles (k - 1/2) / m_out. Output is sorted.
std::vector<double> wasserstein_barycenter_1d(std::span<const std::vector<double>> samples,
                                              std::size_t m_out);

/// Coordinate-wise barycenter of projected draws.
ProjectedDraws barycenter(std::span<const ProjectedDraws> inputs, std::size_t m_out);

/// Type-7 empirical quantile (linear interpolation, plotting position (k-1)/(m-1)).
double empirical_quantile(std::span<const double> sorted, double prob);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

/// Equal-tail interval at (1-level)/2 and 1-(1-level)/2.
Interval credible_interval(std::span<const double> samples, double level = 0.95);

struct SummaryRow {
  std::string outcome;
  std::string component;
  std::string unit;
  std::string age;
  /// One entry per table predictor; absent when the component lacks that predictor.
  std::vector<std::optional<Interval>> intervals;
};

struct SummaryTable {
  std::string level;  // location, tooth, surface or class
  std::vector<std::string> predictors;
  std::vector<SummaryRow> rows;

  void write_csv(std::ostream& os) const;
  void write_text(std::ostream& os) const;
};

/// Location grouping for one outcome: tooth, surface/zone label and anatomical class.
struct LocationGroup {
  std::string tooth;
  std::string surface;
  std::string tooth_class;
};

struct AggregationMap {
  std::array<std::vector<LocationGroup>, 2> outcomes;  // indexed by Outcome

  /// Each location its own tooth, surface = location id, a single class "all".
  static AggregationMap identity(const PairedDataset& data);
  void validate(const PairedDataset& data) const;
};

struct SummaryOptions {
  double level = 0.95;
  AggregationMap map;
  /// Number of draws projected per batch.
  std::size_t batch = 256;
};

/// Linear predictors for every cell of the four blocks at one parameter draw.
std::array<std::vector<double>, 4> draw_linear_predictors(const ParamLayout& layout,
                                                          std::span<const double> draw,
                                                          const PairedDataset& data);

/// Projection, tooth averaging and barycenter tables for the given subjects
/// (all subjects when `subjects` is empty). Tables in order location, tooth, surface, class.
std::vector<SummaryTable> summarize(const PosteriorDraws& draws, const ParamLayout& layout,
                                    const PairedDataset& data, const SummaryOptions& options,
                                    std::span<const std::size_t> subjects = {});

/// summarize() run separately on the subjects with indicator 0 and indicator 1.
std::array<std::vector<SummaryTable>, 2> stratified_summary(const PosteriorDraws& draws,
                                                            const ParamLayout& layout,
                                                            const PairedDataset& data,
                                                            std::span<const int> indicator,
                                                            const SummaryOptions& options);

}  // namespace tucker_hurdle
