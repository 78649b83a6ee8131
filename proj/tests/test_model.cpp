#include <numbers>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tucker_hurdle/errors.hpp"
#include "tucker_hurdle/model.hpp"

using namespace tucker_hurdle;

TEST_SUITE("model") {

TEST_CASE("cutpoint examples") {
  const std::vector<double> k3{0.0, 0.0};
  CHECK(cutpoints(k3) == std::vector<double>{1.0});
  const std::vector<double> k4{1.0, 0.0, 1.0};
  const auto a = cutpoints(k4);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(std::numbers::e).epsilon(1e-15));
  const std::vector<double> k2{0.3};
  CHECK(cutpoints(k2).empty());
}

TEST_CASE("cutpoints are strictly increasing and match the oracle") {
  std::normal_distribution<double> n(0.0, 3.0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> raw(6);
    for (double& x : raw) x = n(rng);
    const auto a = cutpoints(raw);
    const auto o = oracle::cutpoints(raw);
    REQUIRE(a.size() == 5);
    for (std::size_t u = 0; u < a.size(); ++u) {
      CHECK(a[u] == doctest::Approx(o[u]).epsilon(1e-14));
      if (u > 0) CHECK(a[u] > a[u - 1]);
    }
  }
}

TEST_CASE("occurrence probability is stable at the extremes") {
  CHECK(occurrence_prob(0.0) == 0.5);
  CHECK(std::abs(occurrence_prob(40.0) - 1.0) < 1e-15);
  const double tiny = 4.248354255291588977e-18;
  CHECK(std::abs(occurrence_prob(-40.0) - tiny) / tiny < 1e-12);
  CHECK(std::abs(std::exp(log_occurrence_prob(-40.0)) - tiny) / tiny < 1e-12);
  CHECK(std::isfinite(log_occurrence_prob(-800.0)));
  CHECK(log_occurrence_prob(-800.0) == doctest::Approx(-800.0));
  CHECK(log_logistic(800.0) == 0.0);
}

TEST_CASE("severity pmf examples") {
  const std::vector<double> a0{0.0};
  const auto p = severity_pmf(0.0, a0);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  const std::vector<double> a1{-1.0, 1.0};
  const auto q = severity_pmf(0.0, a1);
  CHECK(q[0] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(0.4621171572600098).epsilon(1e-14));
  CHECK(q[2] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  const auto top = severity_pmf(50.0, a1);
  CHECK(top[2] == doctest::Approx(1.0));
  CHECK(top[0] < 1e-20);
  const std::vector<double> bad{1.0, 1.0};
  CHECK_THROWS_AS(severity_pmf(0.0, bad), ContractError);
}

TEST_CASE("cell pmf examples and cdf form") {
  const std::vector<double> a{0.0};
  const auto c = cell_pmf(0.0, 0.0, a);
  CHECK(c.pmf == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(c.cdf(0) == doctest::Approx(0.5));
  CHECK(c.cdf(1) == doctest::Approx(0.75));
  CHECK(c.cdf(2) == doctest::Approx(1.0));
  const auto closed = cell_pmf(-50.0, 3.0, a);
  CHECK(closed.pmf[0] == doctest::Approx(1.0));
  CHECK(closed.pmf[1] < 1e-20);
}

TEST_CASE("cell pmf sums to one and matches the straight-line oracle") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 4.0);
  std::uniform_int_distribution<int> k_dist(2, 7);
  for (int trial = 0; trial < 10000; ++trial) {
    const int k = k_dist(rng);
    std::vector<double> raw(static_cast<std::size_t>(k - 1));
    for (double& x : raw) x = n(rng) / 2.0;
    const auto a = cutpoints(raw);
    const double eo = n(rng), es = n(rng);
    const auto c = cell_pmf(eo, es, a);
    double sum = 0.0;
    for (double p : c.pmf) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    const int y = std::uniform_int_distribution<int>(0, k - 1)(rng);
    const double ref = oracle::cell_prob(y, eo, es, a);
    if (ref > 1e-300) CHECK(std::exp(cell_log_prob(y, eo, es, a)) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("log cell probability is finite for extreme predictors") {
  const std::vector<double> a{-1.0, 1.0};
  for (double eo : {-500.0, -40.0, 0.0, 40.0, 500.0}) {
    for (double es : {-500.0, -40.0, 0.0, 40.0, 500.0}) {
      for (int y = 0; y < 4; ++y) CHECK(std::isfinite(cell_log_prob(y, eo, es, a)));
    }
  }
  // Middle category far in the tail: compare with the asymptotic value.
  const double lp = cell_log_prob(2, 0.0, -60.0, a);
  CHECK(lp == doctest::Approx(std::log(0.5) - 59.0 + std::log1p(-std::exp(-2.0))).epsilon(1e-12));
}

TEST_CASE("cell log probability gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  const std::vector<double> raw{0.2, -0.3, 0.4};
  auto a = cutpoints(raw);
  for (int trial = 0; trial < 200; ++trial) {
    const int y = std::uniform_int_distribution<int>(0, 3)(rng);
    const double eo = n(rng), es = n(rng);
    const auto g = cell_log_prob_grad(y, eo, es, a);
    const double h = 1e-6;
    CHECK(g.value == doctest::Approx(cell_log_prob(y, eo, es, a)).epsilon(1e-13));
    CHECK(g.d_eta_occ == doctest::Approx((cell_log_prob(y, eo + h, es, a) - cell_log_prob(y, eo - h, es, a)) / (2 * h)).epsilon(1e-6));
    CHECK(g.d_eta_sev == doctest::Approx((cell_log_prob(y, eo, es + h, a) - cell_log_prob(y, eo, es - h, a)) / (2 * h)).epsilon(1e-6));
    if (y >= 2) {
      auto up = a, dn = a;
      up[static_cast<std::size_t>(y - 2)] += h;
      dn[static_cast<std::size_t>(y - 2)] -= h;
      CHECK(g.d_alpha_lower == doctest::Approx((cell_log_prob(y, eo, es, up) - cell_log_prob(y, eo, es, dn)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("assembled coefficients") {
  std::mt19937_64 rng(9);
  SUBCASE("zero cores give zero tensors") {
    PairedDataset d = fixture::small_dataset(3, 1, 1);
    const ModelDims dims = d.dims(ModelRanks::uniform(1));
    LinkedCoefficients lc = fixture::random_coefficients(dims, rng);
    for (auto& b : lc.blocks) {
      for (double& g : b.core.data()) g = 0.0;
    }
    for (const auto& t : assemble_coefficients(lc).tensors) {
      for (double x : t.data()) CHECK(x == 0.0);
    }
  }
  SUBCASE("rank one of ones gives a constant tensor") {
    ModelDims dims;
    dims.n_subjects = 2;
    dims.n_caries_locations = 2;
    dims.n_fluorosis_locations = 2;
    dims.p_occurrence = 2;
    dims.p_severity = 2;
    dims.n_caries_categories = dims.n_fluorosis_categories = 3;
    dims.ranks = ModelRanks::uniform(1);
    LinkedCoefficients lc = LinkedCoefficients::zeros(dims);
    lc.subject_occurrence.setOnes();
    lc.subject_severity.setOnes();
    for (auto& b : lc.blocks) {
      b.spatial.setOnes();
      b.predictor.setOnes();
      b.core.data()[0] = 1.5;
    }
    const auto mu = assemble_coefficients(lc).get(Outcome::caries, Component::occurrence);
    CHECK(mu.dims() == std::vector<std::size_t>{2, 2, 2});
    for (double x : mu.data()) CHECK(x == 1.5);
  }
  SUBCASE("random instances match the nested-loop oracle, cross-sectional and longitudinal") {
    for (std::size_t T : {std::size_t{1}, std::size_t{3}}) {
      PairedDataset d = fixture::small_dataset(4, T, 2);
      const ModelDims dims = d.dims(fixture::small_ranks());
      const LinkedCoefficients lc = fixture::random_coefficients(dims, rng);
      const auto tensors = assemble_coefficients(lc);
      for (Outcome o : kOutcomes) {
        for (Component c : kComponents) {
          const auto& t = tensors.get(o, c);
          CHECK(t.order() == (T > 1 ? 4u : 3u));
          const auto tf = lc.tucker(o, c);
          const auto ref = oracle::tucker(tf.core.dims(), {tf.core.data().begin(), tf.core.data().end()}, tf.factors);
          for (std::size_t k = 0; k < ref.size(); ++k) CHECK(t.data()[k] == doctest::Approx(ref[k]).epsilon(1e-12));
          // Occurrence blocks share the subject factor.
          CHECK(tf.factors[0] == lc.subject(c));
        }
      }
    }
  }
}

TEST_CASE("log likelihood matches the straight-line reference") {
  std::mt19937_64 rng(21);
  for (std::size_t T : {std::size_t{1}, std::size_t{3}}) {
    PairedDataset d = fixture::small_dataset(3, T, 5);
    const ModelDims dims = d.dims(fixture::small_ranks());
    const auto lc = fixture::random_coefficients(dims, rng);
    const CutpointRaw rc{{0.3, -0.2}}, rf{{-0.5, 0.4}};
    const double ll = log_likelihood(d, lc, rc, rf);
    CHECK(ll == doctest::Approx(oracle::log_likelihood(d, lc, rc.values, rf.values)).epsilon(1e-12));
    for (Outcome o : kOutcomes) {
      for (Component c : kComponents) {
        const auto eta = linear_predictor(lc, o, c, d.design(c), d.n_times);
        const DenseTensor coef = assemble_coefficients(lc).get(o, c);
        const auto ref = oracle::linear_predictor(coef, d.design(c), d.n_times);
        for (std::size_t k = 0; k < eta.size(); ++k) CHECK(eta[k] == doctest::Approx(ref[k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("likelihood edge cases") {
  PairedDataset d = fixture::small_dataset(3, 1, 8);
  const ModelDims dims = d.dims(ModelRanks::uniform(1));
  const LinkedCoefficients zero = LinkedCoefficients::zeros(dims);
  const CutpointRaw r{{0.0, 0.0}};
  PairedDataset all_missing = d;
  std::fill(all_missing.caries.begin(), all_missing.caries.end(), kMissing);
  std::fill(all_missing.fluorosis.begin(), all_missing.fluorosis.end(), kMissing);
  CHECK(log_likelihood(all_missing, zero, r, r) == 0.0);
  PairedDataset one = all_missing;
  one.caries[0] = 0;
  CHECK(log_likelihood(one, zero, r, r) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  PairedDataset bad = d;
  bad.caries[0] = 3;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.x_occurrence(0, 1) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("masking a cell removes exactly its log probability") {
  std::mt19937_64 rng(4);
  PairedDataset d = fixture::small_dataset(3, 2, 13, 0.1);
  const ModelDims dims = d.dims(fixture::small_ranks());
  const auto lc = fixture::random_coefficients(dims, rng);
  const CutpointRaw rc{{0.1, 0.2}}, rf{{0.0, -0.3}};
  const double full = log_likelihood(d, lc, rc, rf);
  for (Outcome o : kOutcomes) {
    const auto eo = linear_predictor(lc, o, Component::occurrence, d.x_occurrence, d.n_times);
    const auto es = linear_predictor(lc, o, Component::severity, d.x_severity, d.n_times);
    const auto a = cutpoints((o == Outcome::caries ? rc : rf).values);
    for (std::size_t k = 0; k < d.responses(o).size(); ++k) {
      const int y = d.responses(o)[k];
      if (y == kMissing) continue;
      PairedDataset masked = d;
      masked.responses(o)[k] = kMissing;
      const double diff = log_likelihood(masked, lc, rc, rf) - full;
      CHECK(std::abs(diff + cell_log_prob(y, eo[k], es[k], a)) < 1e-12);
    }
  }
}

TEST_CASE("log likelihood does not depend on the order of subjects") {
  std::mt19937_64 rng(6);
  PairedDataset d = fixture::small_dataset(4, 1, 3);
  const ModelDims dims = d.dims(ModelRanks::uniform(2));
  auto lc = fixture::random_coefficients(dims, rng);
  const CutpointRaw r{{0.2, 0.1}};
  const double before = log_likelihood(d, lc, r, r);
  // Reverse subjects in data, design rows and subject factors together.
  PairedDataset p = d;
  auto lp = lc;
  const std::size_t n = d.n_subjects;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    for (Outcome o : kOutcomes) {
      for (std::size_t q = 0; q < d.n_locations(o); ++q) p.responses(o)[p.cell(j, q, 0, o)] = d.responses(o)[d.cell(i, q, 0, o)];
    }
    p.x_occurrence.row(static_cast<Eigen::Index>(j)) = d.x_occurrence.row(static_cast<Eigen::Index>(i));
    p.x_severity.row(static_cast<Eigen::Index>(j)) = d.x_severity.row(static_cast<Eigen::Index>(i));
    lp.subject_occurrence.row(static_cast<Eigen::Index>(j)) = lc.subject_occurrence.row(static_cast<Eigen::Index>(i));
    lp.subject_severity.row(static_cast<Eigen::Index>(j)) = lc.subject_severity.row(static_cast<Eigen::Index>(i));
  }
  CHECK(log_likelihood(p, lp, r, r) == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("sign contract") {
  const std::vector<double> a{-0.5, 0.7};
  double prev = 0.0;
  for (double eta = -3.0; eta <= 3.0; eta += 0.5) {
    const double p = occurrence_prob(eta);
    CHECK(p > prev);
    prev = p;
  }
  // Raising the severity predictor lowers every conditional cdf value.
  for (double eta = -3.0; eta < 3.0; eta += 0.5) {
    const auto lo = cell_pmf(0.3, eta, a), hi = cell_pmf(0.3, eta + 0.5, a);
    for (std::size_t u = 1; u + 1 < lo.pmf.size(); ++u) CHECK(hi.cdf(u) < lo.cdf(u));
  }
}

TEST_CASE("rank larger than the data dimension is a configuration error") {
  PairedDataset d = fixture::small_dataset(3, 1, 1);
  ModelRanks r = ModelRanks::uniform(2);
  r.blocks[0].spatial = 3;  // only two caries locations
  CHECK_THROWS_AS(d.dims(r).validate(), ConfigError);
}

}
