#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tucker_hurdle/errors.hpp"
#include "tucker_hurdle/tensor.hpp"

using namespace tucker_hurdle;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("dense tensor indexing is row-major") {
  DenseTensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.strides() == std::vector<std::size_t>{12, 4, 1});
  t.at({1, 2, 3}) = 5.0;
  CHECK(t.data()[23] == 5.0);
  CHECK(t.reshaped({6, 4}).at({5, 3}) == 5.0);
  CHECK_THROWS_AS(DenseTensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(DenseTensor({2, 2}, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("mode product by hand") {
  // T is 2x2 with T(i, j) = i + 2j; multiply mode 1 by [[1, 1]].
  DenseTensor t({2, 2}, {0, 2, 1, 3});
  Matrix m(1, 2);
  m << 1, 1;
  const DenseTensor r = mode_product(t, m, 1);
  CHECK(r.dims() == std::vector<std::size_t>{2, 1});
  CHECK(r.at({0, 0}) == 2.0);
  CHECK(r.at({1, 0}) == 4.0);
  const DenseTensor s = mode_product(t, m, 0);
  CHECK(s.at({0, 0}) == 1.0);
  CHECK(s.at({0, 1}) == 5.0);
  CHECK_THROWS_AS(mode_product(t, Matrix::Ones(2, 3), 0), ShapeError);
}

TEST_CASE("identity factors leave the core unchanged") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  DenseTensor core({2, 3, 2});
  for (double& x : core.data()) x = n(rng);
  TuckerFactor f{core, {Matrix::Identity(2, 2), Matrix::Identity(3, 3), Matrix::Identity(2, 2)}};
  CHECK(max_abs_diff(tucker_reconstruct(f).data(), core.data()) == 0.0);
}

TEST_CASE("rank-one Tucker with unit core is the outer product") {
  Matrix a(2, 1), b(3, 1);
  a << 1, 2;
  b << 3, 4, 5;
  TuckerFactor f{DenseTensor({1, 1}, {1.0}), {a, b}};
  const DenseTensor t = tucker_reconstruct(f);
  CHECK(t.at({1, 2}) == 10.0);
  CHECK(t.at({0, 0}) == 3.0);
}

TEST_CASE("Tucker and CP reconstruction agree with nested loops") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> order_dist(2, 4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t order = order_dist(rng);
    std::vector<std::size_t> dims, ranks;
    for (std::size_t j = 0; j < order; ++j) {
      dims.push_back(std::uniform_int_distribution<std::size_t>(1, 5)(rng));
      ranks.push_back(std::uniform_int_distribution<std::size_t>(1, dims.back())(rng));
    }
    DenseTensor core(ranks);
    std::normal_distribution<double> n;
    for (double& x : core.data()) x = n(rng);
    std::vector<Matrix> factors;
    for (std::size_t j = 0; j < order; ++j) factors.push_back(oracle::random_matrix(dims[j], ranks[j], rng));
    const auto t = tucker_reconstruct(TuckerFactor{core, factors});
    CHECK(max_abs_diff(t.data(), oracle::tucker(ranks, to_vec(core.data()), factors)) < 1e-10);

    // Tucker ranks may not exceed their mode sizes, so the CP rank is capped by the smallest mode.
    const std::size_t r = std::uniform_int_distribution<std::size_t>(1, *std::min_element(dims.begin(), dims.end()))(rng);
    std::vector<double> w(r);
    for (double& x : w) x = n(rng);
    std::vector<Matrix> cpf;
    for (std::size_t j = 0; j < order; ++j) cpf.push_back(oracle::random_matrix(dims[j], r, rng));
    const CpFactor cp{w, cpf};
    const auto c = cp_reconstruct(cp);
    CHECK(max_abs_diff(c.data(), oracle::cp(w, cpf)) < 1e-10);
    CHECK(max_abs_diff(tucker_reconstruct(cp_to_tucker(cp)).data(), c.data()) < 1e-12);
  }
}

TEST_CASE("cp_to_tucker has a diagonal core") {
  CpFactor cp{{2.0, -1.0}, {Matrix::Ones(3, 2), Matrix::Ones(2, 2), Matrix::Ones(4, 2)}};
  const TuckerFactor t = cp_to_tucker(cp);
  CHECK(t.core.dims() == std::vector<std::size_t>{2, 2, 2});
  CHECK(t.core.at({0, 0, 0}) == 2.0);
  CHECK(t.core.at({1, 1, 1}) == -1.0);
  CHECK(t.core.at({0, 1, 0}) == 0.0);
}

TEST_CASE("Tucker parameter count") {
  const std::vector<std::size_t> dims{10, 8, 6}, ranks{2, 2, 2};
  CHECK(tucker_param_count(dims, ranks) == 8 + 20 + 16 + 12);
  const std::vector<std::size_t> full{3, 3};
  CHECK(tucker_param_count(full, full) == 9 + 9 + 9);
  const std::vector<std::size_t> too_big{4, 2};
  CHECK_THROWS_AS(tucker_param_count(full, too_big), ShapeError);
  const std::vector<std::size_t> short_ranks{2};
  CHECK_THROWS_AS(tucker_param_count(dims, short_ranks), ShapeError);
}

TEST_CASE("invalid factorizations are rejected") {
  TuckerFactor bad{DenseTensor({2, 2}), {Matrix::Ones(3, 2), Matrix::Ones(3, 3)}};
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  TuckerFactor rank_too_big{DenseTensor({3}), {Matrix::Ones(2, 3)}};
  CHECK_THROWS_AS(rank_too_big.validate(), ShapeError);
}

}
