#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tucker_hurdle/errors.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/simulate.hpp"

using namespace tucker_hurdle;

namespace {

SimConfig tiny(std::uint64_t seed) {
  SimConfig c;
  c.n_subjects = 12;
  c.n_caries_locations = 4;
  c.n_fluorosis_locations = 3;
  c.seed = seed;
  return c;
}

PosteriorDraws truth_draws(const SimulatedData& sim, const ParamLayout& layout, std::size_t copies) {
  ModelParams p = layout.unpack(std::vector<double>(layout.dimension(), 0.0));
  p.coefficients = sim.truth.coefficients;
  p.raw_caries = sim.truth.raw_caries;
  p.raw_fluorosis = sim.truth.raw_fluorosis;
  const auto v = layout.pack(p);
  PosteriorDraws d;
  d.n_chains = 1;
  d.n_samples = copies;
  d.dimension = layout.dimension();
  for (std::size_t k = 0; k < copies; ++k) d.values.insert(d.values.end(), v.begin(), v.end());
  d.stats.resize(copies);
  return d;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("zero cores give the baseline category frequencies") {
  SimConfig c = tiny(2);
  c.n_subjects = 2000;
  c.core_scale = 0.0;
  c.missing_fraction = 0.0;
  c.raw_caries = {1.0, 0.0};     // first cutpoint at 0
  c.raw_fluorosis = {1.0, 0.0};
  const auto sim = generate(c);
  std::array<double, 3> counts{};
  std::size_t total = 0;
  for (Outcome o : kOutcomes) {
    for (int y : sim.data.responses(o)) {
      counts[static_cast<std::size_t>(y)] += 1.0;
      ++total;
    }
  }
  const std::array<double, 3> expect{0.5, 0.25, 0.25};
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = expect[k];
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(total));
    CHECK(std::abs(counts[k] / static_cast<double>(total) - p) < 3.0 * se);
  }
}

TEST_CASE("zero cores and zero cutpoint raws follow the exact cell pmf") {
  SimConfig c = tiny(12);
  c.n_subjects = 2000;
  c.core_scale = 0.0;
  c.missing_fraction = 0.0;
  const auto sim = generate(c);
  std::array<double, 3> counts{};
  std::size_t total = 0;
  for (Outcome o : kOutcomes) {
    for (int y : sim.data.responses(o)) {
      counts[static_cast<std::size_t>(y)] += 1.0;
      ++total;
    }
  }
  // Zero raws put the single cutpoint at 1.
  const std::vector<double> alpha = oracle::cutpoints({0.0, 0.0});
  REQUIRE(alpha == std::vector<double>{1.0});
  for (int k = 0; k < 3; ++k) {
    const double p = oracle::cell_prob(k, 0.0, 0.0, alpha);
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(total));
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] / static_cast<double>(total) - p) < 3.0 * se);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate(tiny(5));
  const auto b = generate(tiny(5));
  const auto c = generate(tiny(6));
  CHECK(a.data.caries == b.data.caries);
  CHECK(a.data.fluorosis == b.data.fluorosis);
  CHECK(a.data.x_occurrence == b.data.x_occurrence);
  CHECK(a.earlier_caries == b.earlier_caries);
  CHECK(a.data.caries != c.data.caries);
}

TEST_CASE("generated data has the configured shape") {
  SimConfig c = tiny(3);
  c.n_times = 3;
  c.p_severity = 2;
  c.missing_fraction = 0.25;
  const auto sim = generate(c);
  CHECK(sim.data.longitudinal);
  CHECK(sim.data.caries.size() == 12 * 4 * 3);
  CHECK(sim.data.x_occurrence.rows() == 36);
  CHECK(sim.data.x_severity.cols() == 2);
  CHECK((sim.data.x_occurrence.col(0).array() == 1.0).all());
  CHECK(sim.data.time_labels == std::vector<std::string>{"9", "13", "17"});
  std::size_t missing = 0;
  for (int y : sim.data.caries) missing += y == kMissing;
  CHECK(missing == 36);
  CHECK_NOTHROW(sim.map.validate(sim.data));
  CHECK(sim.earlier_caries.size() == 12);
}

TEST_CASE("all-missing data has zero log-likelihood") {
  SimConfig c = tiny(4);
  c.missing_fraction = 1.0;
  const auto sim = generate(c);
  CHECK(log_likelihood(sim.data, sim.truth.coefficients, sim.truth.raw_caries, sim.truth.raw_fluorosis) == 0.0);
}

TEST_CASE("truth tensors are the assembled coefficients") {
  SimConfig c = tiny(7);
  c.n_times = 2;
  const auto sim = generate(c);
  const auto again = assemble_coefficients(sim.truth.coefficients);
  for (std::size_t b = 0; b < 4; ++b) {
    CHECK(std::ranges::equal(sim.truth.tensors.tensors[b].data(), again.tensors[b].data()));
  }
}

TEST_CASE("core sparsity zeroes the requested share of entries") {
  SimConfig c = tiny(8);
  c.core_sparsity = 0.5;
  const auto sim = generate(c);
  for (const auto& b : sim.truth.coefficients.blocks) {
    const auto g = b.core.data();
    const auto zeros = static_cast<std::size_t>(std::count(g.begin(), g.end(), 0.0));
    CHECK(zeros == static_cast<std::size_t>(std::round(0.5 * static_cast<double>(g.size()))));
  }
}

TEST_CASE("recovery error is zero when every draw is the truth") {
  const auto sim = generate(tiny(9));
  const ParamLayout layout(sim.data.dims(SimConfig{}.ranks), GlobalScaleMode::per_tensor);
  const auto r = recovery_error(sim.truth, truth_draws(sim, layout, 5), layout, sim.data);
  CHECK(r.linpred_rmse < 1e-12);
  CHECK(r.zero_rmse > 0.0);
  CHECK(r.coverage == 1.0);
  CHECK(r.degenerate_intervals == r.n_cells);
  CHECK(r.n_cells == 12 * (4 + 4 + 3 + 3));
}

TEST_CASE("invalid simulation settings are rejected") {
  SimConfig c = tiny(1);
  c.missing_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(1);
  c.raw_caries = {0.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(1);
  c.n_caries_categories = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(1);
  c.ranks.blocks[0].spatial = 9;
  CHECK_THROWS(generate(c));
}

}
