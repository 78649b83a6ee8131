// Straight-line reference implementations used to check the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/tensor.hpp"

namespace oracle {

using tucker_hurdle::Matrix;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Advances a mixed-radix counter; false once it wraps.
inline bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  for (std::size_t k = idx.size(); k-- > 0;) {
    if (++idx[k] < dims[k]) return true;
    idx[k] = 0;
  }
  return false;
}

inline std::vector<double> tucker(const std::vector<std::size_t>& core_dims,
                                  const std::vector<double>& core,
                                  const std::vector<Matrix>& factors) {
  std::vector<std::size_t> out_dims;
  for (const auto& f : factors) out_dims.push_back(static_cast<std::size_t>(f.rows()));
  std::size_t total = 1;
  for (auto d : out_dims) total *= d;
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> i(out_dims.size(), 0);
  std::size_t pos = 0;
  do {
    double sum = 0.0;
    std::vector<std::size_t> r(core_dims.size(), 0);
    std::size_t c = 0;
    do {
      double term = core[c++];
      for (std::size_t j = 0; j < factors.size(); ++j) {
        term *= factors[j](static_cast<Eigen::Index>(i[j]), static_cast<Eigen::Index>(r[j]));
      }
      sum += term;
    } while (next_index(r, core_dims));
    out[pos++] = sum;
  } while (next_index(i, out_dims));
  return out;
}

inline std::vector<double> cp(const std::vector<double>& weights, const std::vector<Matrix>& factors) {
  std::vector<std::size_t> out_dims;
  for (const auto& f : factors) out_dims.push_back(static_cast<std::size_t>(f.rows()));
  std::size_t total = 1;
  for (auto d : out_dims) total *= d;
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> i(out_dims.size(), 0);
  std::size_t pos = 0;
  do {
    double sum = 0.0;
    for (std::size_t z = 0; z < weights.size(); ++z) {
      double term = weights[z];
      for (std::size_t j = 0; j < factors.size(); ++j) {
        term *= factors[j](static_cast<Eigen::Index>(i[j]), static_cast<Eigen::Index>(z));
      }
      sum += term;
    }
    out[pos++] = sum;
  } while (next_index(i, out_dims));
  return out;
}

inline std::vector<double> cutpoints(const std::vector<double>& raw) {
  std::vector<double> a;
  double run = -raw[0];
  for (std::size_t u = 1; u < raw.size(); ++u) {
    run += std::exp(raw[u]);
    a.push_back(run);
  }
  return a;
}

// P(Y = y) from the cdf differences of the hurdle model.
inline double cell_prob(int y, double eta_occ, double eta_sev, const std::vector<double>& alpha) {
  const int k = static_cast<int>(alpha.size()) + 2;
  const double p_pos = sigmoid(eta_occ);
  if (y == 0) return 1.0 - p_pos;
  auto cond_cdf = [&](int u) {
    if (u <= 0) return 0.0;
    if (u >= k - 1) return 1.0;
    return sigmoid(alpha[static_cast<std::size_t>(u - 1)] - eta_sev);
  };
  return p_pos * (cond_cdf(y) - cond_cdf(y - 1));
}

// eta[i, q, t] from the assembled coefficient tensor (n x Q x p [x T]).
inline std::vector<double> linear_predictor(const tucker_hurdle::DenseTensor& coef, const Matrix& x,
                                            std::size_t n_times) {
  const auto& d = coef.dims();
  const std::size_t n = d[0], nq = d[1], p = d[2];
  std::vector<double> eta(n * nq * n_times, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t t = 0; t < n_times; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double c = d.size() == 4 ? coef.at({i, q, j, t}) : coef.at({i, q, j});
          s += c * x(static_cast<Eigen::Index>(i * n_times + t), static_cast<Eigen::Index>(j));
        }
        eta[(i * nq + q) * n_times + t] = s;
      }
    }
  }
  return eta;
}

inline double log_likelihood(const tucker_hurdle::PairedDataset& data,
                             const tucker_hurdle::LinkedCoefficients& lc,
                             const std::vector<double>& raw_c, const std::vector<double>& raw_f) {
  using namespace tucker_hurdle;
  double ll = 0.0;
  for (Outcome o : kOutcomes) {
    auto occ_tf = lc.tucker(o, Component::occurrence);
    auto sev_tf = lc.tucker(o, Component::severity);
    auto occ = tucker(occ_tf.core.dims(), {occ_tf.core.data().begin(), occ_tf.core.data().end()}, occ_tf.factors);
    auto sev = tucker(sev_tf.core.dims(), {sev_tf.core.data().begin(), sev_tf.core.data().end()}, sev_tf.factors);
    DenseTensor occ_t(occ_tf.output_dims(), occ);
    DenseTensor sev_t(sev_tf.output_dims(), sev);
    const auto eo = linear_predictor(occ_t, data.x_occurrence, data.n_times);
    const auto es = linear_predictor(sev_t, data.x_severity, data.n_times);
    const auto alpha = cutpoints(o == Outcome::caries ? raw_c : raw_f);
    const auto& y = data.responses(o);
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (y[k] == kMissing) continue;
      ll += std::log(cell_prob(y[k], eo[k], es[k], alpha));
    }
  }
  return ll;
}

inline double half_cauchy_log(double l) {
  const double s = std::exp(l);
  return std::log(2.0 / std::numbers::pi) - std::log1p(s * s) + l;
}

inline double normal_log(double x, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * x * x / (sd * sd);
}

// Log prior by slice name, written directly from the density definitions.
inline double log_prior(const std::vector<double>& v, const tucker_hurdle::ParamLayout& layout,
                        const tucker_hurdle::Hyperparameters& h) {
  using namespace tucker_hurdle;
  double lp = 0.0;
  const char* blocks[4] = {"caries.occurrence", "caries.severity", "fluorosis.occurrence", "fluorosis.severity"};
  for (const auto& s : layout.slices()) {
    for (std::size_t k = 0; k < s.size; ++k) {
      const double x = v[s.offset + k];
      if (s.kind == SliceKind::subject_factor) lp += normal_log(x, h.sigma_a);
      if (s.kind == SliceKind::spatial_factor || s.kind == SliceKind::predictor_factor ||
          s.kind == SliceKind::time_factor) {
        lp += normal_log(x, s.name.rfind("fluorosis", 0) == 0 ? h.sigma_b : h.sigma_a);
      }
      if (s.kind == SliceKind::cutpoint_raw) lp += normal_log(x, h.cutpoint_sd);
      if (s.kind == SliceKind::log_global_scale) lp += half_cauchy_log(x);
    }
  }
  for (const char* b : blocks) {
    const std::string name(b);
    const auto& core = layout.slice(name + ".core");
    const auto& local = layout.slice("log_local_scale." + name);
    const auto& global = layout.global_scale() == GlobalScaleMode::shared
                             ? layout.slice("log_global_scale.shared")
                             : layout.slice("log_global_scale." + name);
    const double tau = std::exp(v[global.offset]);
    for (std::size_t k = 0; k < core.size; ++k) {
      const double lam = std::exp(v[local.offset + k]);
      lp += normal_log(v[core.offset + k], tau * lam) + half_cauchy_log(v[local.offset + k]);
    }
  }
  return lp;
}

// Left inverse from the normal equations.
inline Matrix projection(const Matrix& x) {
  Matrix x1(x.rows(), x.cols() + 1);
  x1.col(0).setOnes();
  x1.rightCols(x.cols()) = x;
  const Matrix gram = x1.transpose() * x1;
  return gram.inverse() * x1.transpose();
}

// Type-7 sample quantile.
inline double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = n(rng);
  }
  return m;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_matrix(rows, cols, rng);
}

}  // namespace oracle
