#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tucker_hurdle/sampler.hpp"

namespace tucker_hurdle {

struct ChainDiagnostics {
  std::vector<double> split_rhat;    // 0 when undefined (zero variance)
  std::vector<double> ess_bulk;      // 0 when undefined
  std::vector<bool> zero_variance;
  std::size_t n_divergent = 0;
};

/// Split R-hat on raw draws. Returns 0 when the within-chain variance is zero.
double split_rhat(std::span<const std::vector<double>> chains);
/// Bulk effective sample size of rank-normalized split chains.
double ess_bulk(std::span<const std::vector<double>> chains);
/// Effective sample size of split chains (no rank normalization).
double ess_basic(std::span<const std::vector<double>> chains);

/// Per-coordinate diagnostics. Requires at least 2 chains and 4 draws per chain.
ChainDiagnostics diagnostics(const PosteriorDraws& draws);

}  // namespace tucker_hurdle
