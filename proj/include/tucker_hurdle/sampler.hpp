#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tucker_hurdle {

/// A differentiable log density. Implementations must be safe to call concurrently.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual std::size_t dimension() const = 0;
  /// Returns log p(x) and writes its gradient into `grad` (size dimension()).
  virtual double log_density_gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual std::string coordinate_name(std::size_t i) const { return "x[" + std::to_string(i) + "]"; }
  /// Maps a sampler position to the coordinates stored with each draw (identity by default).
  virtual void output_coordinates(std::span<const double> x, std::span<double> out) const {
    std::copy(x.begin(), x.end(), out.begin());
  }
};

enum class MassMatrix { identity, diagonal };

struct NutsConfig {
  std::size_t n_warmup = 5000;
  std::size_t n_samples = 5000;
  std::size_t n_chains = 4;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  MassMatrix mass_matrix = MassMatrix::diagonal;
  double max_delta_h = 1000.0;
  bool progress = true;
  /// Concurrent chains; 0 means TUCKER_HURDLE_THREADS or hardware concurrency.
  std::size_t threads = 0;

  static NutsConfig paper();
  static NutsConfig test();
  /// Throws ConfigError on invalid counts, target_accept or tree depth.
  void validate() const;
};

/// Nesterov dual-averaging state for step-size adaptation.
struct DualAveraging {
  double target = 0.8;
  double mu = 0.0;
  double s_bar = 0.0;
  double x_bar = 0.0;
  double counter = 0.0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double step_size = 1.0;

  /// Reset the accumulators and shrink toward log(10 * step).
  void restart(double step);
  /// Step size to freeze at the end of warmup.
  double final_step_size() const;
};

/// One dual-averaging update; the returned state carries the new step size.
DualAveraging adapt_step_size(DualAveraging acc, double accept_prob);

struct ChainState {
  std::vector<double> position;
  std::vector<double> gradient;
  double log_density = 0.0;
  std::mt19937_64 rng;
  double step_size = 1.0;
  std::vector<double> inv_mass;
  DualAveraging adaptation;
};

struct DrawStats {
  double accept_prob = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
  double energy = 0.0;
  double step_size = 0.0;
};

/// One velocity-Verlet step under H(q, p) = -log p(q) + p' M^{-1} p / 2.
/// `grad` and `log_density` must hold the values at `position` on entry and are updated.
/// Returns false if the new point has a non-finite log density or gradient.
bool leapfrog(std::span<double> position, std::span<double> momentum, std::span<double> grad,
              double& log_density, double step, std::span<const double> inv_mass,
              const LogDensity& target);

/// Multinomial NUTS transition; updates `state` in place.
DrawStats nuts_transition(ChainState& state, const LogDensity& target, const NutsConfig& cfg);

/// Retained draws, chain-major: value(chain, draw, coordinate).
struct PosteriorDraws {
  std::size_t n_chains = 0;
  std::size_t n_samples = 0;
  std::size_t dimension = 0;
  std::vector<double> values;
  std::vector<DrawStats> stats;  // n_chains * n_samples
  std::vector<std::string> names;

  double value(std::size_t chain, std::size_t draw, std::size_t i) const {
    return values[(chain * n_samples + draw) * dimension + i];
  }
  std::span<const double> draw(std::size_t chain, std::size_t d) const {
    return std::span<const double>(values).subspan((chain * n_samples + d) * dimension, dimension);
  }
  std::size_t total_draws() const { return n_chains * n_samples; }
  /// Per-chain traces of one coordinate.
  std::vector<std::vector<double>> chains(std::size_t i) const;
};

/// Runs cfg.n_chains independent chains (concurrently when threads allow).
/// Deterministic for a given seed, chain count and target.
PosteriorDraws run_chains(const NutsConfig& cfg, const LogDensity& target);

}  // namespace tucker_hurdle
