// Small hand-built datasets and random parameters shared by the unit tests.
#pragma once

#include <random>

#include "oracles.hpp"
#include "tucker_hurdle/model.hpp"

namespace fixture {

using namespace tucker_hurdle;

inline void fill(Matrix& m, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = n(rng);
  }
}

inline LinkedCoefficients random_coefficients(const ModelDims& dims, std::mt19937_64& rng,
                                              double sd = 0.7) {
  LinkedCoefficients lc = LinkedCoefficients::zeros(dims);
  fill(lc.subject_occurrence, rng, sd);
  fill(lc.subject_severity, rng, sd);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& b : lc.blocks) {
    fill(b.spatial, rng, sd);
    fill(b.predictor, rng, sd);
    fill(b.time, rng, sd);
    for (double& g : b.core.data()) g = n(rng);
  }
  return lc;
}

// n subjects, 2 caries and 3 fluorosis locations, C = F = 3, intercept plus one covariate.
inline PairedDataset small_dataset(std::size_t n, std::size_t n_times, std::uint64_t seed,
                                   double missing = 0.2) {
  std::mt19937_64 rng(seed);
  PairedDataset d;
  d.n_subjects = n;
  d.n_times = n_times;
  d.longitudinal = n_times > 1;
  d.n_caries_locations = 2;
  d.n_fluorosis_locations = 3;
  d.n_caries_categories = 3;
  d.n_fluorosis_categories = 3;
  std::uniform_int_distribution<int> cat(0, 2);
  std::bernoulli_distribution miss(missing);
  for (Outcome o : kOutcomes) {
    auto& y = d.responses(o);
    y.resize(n * d.n_locations(o) * n_times);
    for (int& v : y) v = miss(rng) ? kMissing : cat(rng);
  }
  d.x_occurrence = Matrix::Ones(static_cast<Eigen::Index>(n * n_times), 2);
  d.x_severity = Matrix::Ones(static_cast<Eigen::Index>(n * n_times), 2);
  std::normal_distribution<double> z;
  for (Eigen::Index r = 0; r < d.x_occurrence.rows(); ++r) {
    d.x_occurrence(r, 1) = z(rng);
    d.x_severity(r, 1) = z(rng);
  }
  d.fill_default_labels();
  return d;
}

inline ModelRanks small_ranks() {
  ModelRanks r = ModelRanks::uniform(2);
  r.blocks[1].spatial = 1;
  r.blocks[3].predictor = 1;
  for (auto& b : r.blocks) b.time = 2;
  return r;
}

}  // namespace fixture
