#include "tucker_hurdle/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> grad;
  double log_density = 0.0;
};

class Nuts {
 public:
  Nuts(const LogDensity& target, const NutsConfig& cfg, ChainState& state)
      : target_(target), cfg_(cfg), state_(state), dim_(state.position.size()) {}

  double kinetic(std::span<const double> p) const {
    double k = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) k += p[i] * p[i] * state_.inv_mass[i];
    return 0.5 * k;
  }

  double hamiltonian(const PhasePoint& z) const { return -z.log_density + kinetic(z.p); }

  std::vector<double> velocity(std::span<const double> p) const {
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = state_.inv_mass[i] * p[i];
    return v;
  }

  void sample_momentum(std::vector<double>& p) {
    std::normal_distribution<double> normal(0.0, 1.0);
    p.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) p[i] = normal(state_.rng) / std::sqrt(state_.inv_mass[i]);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(state_.rng); }

  // Advances z by one leapfrog step; returns the Hamiltonian (inf if non-finite).
  double step(PhasePoint& z, double eps) {
    const bool ok = leapfrog(z.q, z.p, z.grad, z.log_density, eps, state_.inv_mass, target_);
    if (!ok) return kInf;
    const double h = hamiltonian(z);
    return std::isnan(h) ? kInf : h;
  }

  static bool no_u_turn(std::span<const double> v_minus, std::span<const double> v_plus,
                        std::span<const double> rho) {
    return dot(v_plus, rho) > 0 && dot(v_minus, rho) > 0;
  }

  // Recursive tree construction (multinomial sampling with extra U-turn checks across
  // the merged subtrees). Vectors named *_beg / *_end are the momenta (p) and velocities (v)
  // at the two ends of the new subtree in integration order.
  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, std::vector<double>& v_beg,
                  std::vector<double>& v_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double h0, double sign, double& log_sum_weight) {
    if (depth == 0) {
      const double h = step(z, sign * state_.step_size);
      ++n_leapfrog_;
      if (h - h0 > cfg_.max_delta_h) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob_ += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      v_beg = velocity(z.p);
      v_end = v_beg;
      for (std::size_t i = 0; i < dim_; ++i) rho[i] += z.p[i];
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    std::vector<double> v_init_end(dim_), p_init_end(dim_), rho_init(dim_, 0.0);
    double lsw_init = -kInf;
    if (!build_tree(depth - 1, z, z_propose, v_beg, v_init_end, rho_init, p_beg, p_init_end, h0,
                    sign, lsw_init)) {
      return false;
    }

    PhasePoint z_propose_final = z;
    std::vector<double> v_final_beg(dim_), p_final_beg(dim_), rho_final(dim_, 0.0);
    double lsw_final = -kInf;
    if (!build_tree(depth - 1, z, z_propose_final, v_final_beg, v_end, rho_final, p_final_beg,
                    p_end, h0, sign, lsw_final)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree || uniform() < std::exp(lsw_final - lsw_subtree)) {
      z_propose = std::move(z_propose_final);
    }

    std::vector<double> rho_subtree(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = no_u_turn(v_beg, v_end, rho_subtree);
    std::vector<double> rho_ext(dim_);
    for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && no_u_turn(v_beg, v_final_beg, rho_ext);
    for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && no_u_turn(v_init_end, v_end, rho_ext);
    return persist;
  }

  DrawStats transition() {
    PhasePoint z{state_.position, {}, state_.gradient, state_.log_density};
    sample_momentum(z.p);

    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    std::vector<double> p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
    const auto v0 = velocity(z.p);
    std::vector<double> v_fwd_fwd = v0, v_fwd_bck = v0, v_bck_fwd = v0, v_bck_bck = v0;
    std::vector<double> rho = z.p;
    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z);

    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;
    int depth = 0;

    while (depth < cfg_.max_tree_depth) {
      std::vector<double> rho_fwd(dim_, 0.0), rho_bck(dim_, 0.0);
      bool valid = false;
      double lsw_subtree = -kInf;
      if (uniform() > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        v_bck_fwd = v_fwd_bck;
        valid = build_tree(depth, z_fwd, z_propose, v_fwd_bck, v_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, lsw_subtree);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        v_fwd_bck = v_bck_fwd;
        valid = build_tree(depth, z_bck, z_propose, v_bck_fwd, v_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, lsw_subtree);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight || uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < dim_; ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = no_u_turn(v_bck_bck, v_fwd_fwd, rho);
      std::vector<double> rho_ext(dim_);
      for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && no_u_turn(v_bck_bck, v_fwd_bck, rho_ext);
      for (std::size_t i = 0; i < dim_; ++i) rho_ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && no_u_turn(v_bck_fwd, v_fwd_fwd, rho_ext);
      if (!persist) break;
    }

    DrawStats stats;
    stats.n_leapfrog = n_leapfrog_;
    stats.tree_depth = depth;
    stats.divergent = divergent_;
    stats.accept_prob = n_leapfrog_ > 0 ? sum_metro_prob_ / n_leapfrog_ : 0.0;
    stats.step_size = state_.step_size;
    stats.energy = hamiltonian(z_sample);

    state_.position = std::move(z_sample.q);
    state_.gradient = std::move(z_sample.grad);
    state_.log_density = z_sample.log_density;
    return stats;
  }

  // Doubles or halves the step size until a single leapfrog step crosses 80% acceptance.
  void init_step_size() {
    PhasePoint z0{state_.position, {}, state_.gradient, state_.log_density};
    auto delta_h = [&]() {
      PhasePoint z = z0;
      sample_momentum(z.p);
      const double h0 = hamiltonian(z);
      const double h = step(z, state_.step_size);
      return h0 - h;
    };
    const double log_target = std::log(0.8);
    const double direction = delta_h() > log_target ? 1.0 : -1.0;
    for (int it = 0; it < 100; ++it) {
      const double dh = delta_h();
      if (direction > 0 && !(dh > log_target)) break;
      if (direction < 0 && !(dh < log_target)) break;
      state_.step_size = direction > 0 ? 2.0 * state_.step_size : 0.5 * state_.step_size;
      if (state_.step_size > 1e7) throw SamplerError("step size diverged to infinity; posterior is improper");
      if (state_.step_size < 1e-300) throw SamplerError("step size collapsed to zero");
    }
  }

 private:
  const LogDensity& target_;
  const NutsConfig& cfg_;
  ChainState& state_;
  std::size_t dim_;
  int n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

// Expanding-window schedule for diagonal mass-matrix adaptation.
class WarmupWindows {
 public:
  explicit WarmupWindows(std::size_t n_warmup) : n_(n_warmup) {
    if (n_ < 20) {
      init_ = n_;
      term_ = 0;
      base_ = 0;
      enabled_ = false;
    } else if (init_ + term_ + base_ > n_) {
      init_ = static_cast<std::size_t>(0.15 * static_cast<double>(n_));
      term_ = static_cast<std::size_t>(0.1 * static_cast<double>(n_));
      base_ = n_ - (init_ + term_);
    }
    size_ = base_;
    next_ = init_ + base_ - 1;
  }

  bool in_window(std::size_t it) const { return enabled_ && it >= init_ && it < n_ - term_; }
  bool window_ends(std::size_t it) const { return enabled_ && it == next_ && it != n_; }

  void advance(std::size_t it) {
    if (next_ == n_ - term_ - 1) return;
    size_ *= 2;
    next_ = it + size_;
    if (next_ != n_ - term_ - 1) {
      const std::size_t boundary = next_ + 2 * size_;
      if (boundary >= n_ - term_) next_ = n_ - term_ - 1;
    }
  }

 private:
  std::size_t n_;
  std::size_t init_ = 75;
  std::size_t term_ = 50;
  std::size_t base_ = 25;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  bool enabled_ = true;
};

// Welford running variance.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}
  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const { return n_; }
  // Regularized toward 1e-3 with weight 5 / (n + 5).
  std::vector<double> regularized_variance() const {
    const double n = static_cast<double>(n_);
    std::vector<double> v(mean_.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = n > 1 ? m2_[i] / (n - 1) : 1.0;
      v[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return v;
  }
  void restart() {
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::size_t n_ = 0;
};

std::size_t thread_budget(const NutsConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("TUCKER_HURDLE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::mutex& progress_mutex() {
  static std::mutex m;
  return m;
}

ChainState initialize_chain(const NutsConfig& cfg, const LogDensity& target, std::size_t chain) {
  ChainState state;
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  state.rng.seed(seq);
  const std::size_t dim = target.dimension();
  state.inv_mass.assign(dim, 1.0);
  state.position.resize(dim);
  state.gradient.resize(dim);
  std::uniform_real_distribution<double> jitter(-cfg.init_scale, cfg.init_scale);
  std::string last_problem = "log density is not finite";
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (auto& x : state.position) x = jitter(state.rng);
    double lp = -kInf;
    try {
      lp = target.log_density_gradient(state.position, state.gradient);
    } catch (const std::exception& e) {
      last_problem = e.what();
      continue;
    }
    if (!std::isfinite(lp)) {
      last_problem = "log density is not finite";
      continue;
    }
    bool ok = true;
    for (std::size_t i = 0; i < dim; ++i) {
      if (!std::isfinite(state.gradient[i])) {
        last_problem = "non-finite gradient at " + target.coordinate_name(i);
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    state.log_density = lp;
    return state;
  }
  throw SamplerError("chain " + std::to_string(chain + 1) +
                     " failed to initialize after 100 attempts: " + last_problem);
}

void run_one_chain(const NutsConfig& cfg, const LogDensity& target, std::size_t chain,
                   PosteriorDraws& out) {
  ChainState state = initialize_chain(cfg, target, chain);
  const std::size_t dim = state.position.size();
  Nuts nuts(target, cfg, state);
  state.step_size = 1.0;
  nuts.init_step_size();
  state.adaptation.target = cfg.target_accept;
  state.adaptation.restart(state.step_size);

  WarmupWindows windows(cfg.n_warmup);
  VarianceEstimator estimator(dim);
  const bool adapt_mass = cfg.mass_matrix == MassMatrix::diagonal;
  const std::size_t total = cfg.n_warmup + cfg.n_samples;

  auto report = [&](std::size_t it) {
    if (!cfg.progress || (it + 1) % 100 != 0) return;
    std::lock_guard lock(progress_mutex());
    std::cerr << "chain " << chain + 1 << ": iteration " << it + 1 << "/" << total
              << (it < cfg.n_warmup ? " (warmup)" : " (sampling)") << '\n';
  };

  for (std::size_t it = 0; it < cfg.n_warmup; ++it) {
    const DrawStats s = nuts.transition();
    state.adaptation = adapt_step_size(state.adaptation, s.accept_prob);
    state.step_size = state.adaptation.step_size;
    if (adapt_mass) {
      if (windows.in_window(it)) estimator.add(state.position);
      if (windows.window_ends(it)) {
        windows.advance(it);
        state.inv_mass = estimator.regularized_variance();
        estimator.restart();
        nuts.init_step_size();
        state.adaptation.restart(state.step_size);
      }
    }
    report(it);
  }
  if (cfg.n_warmup > 0) state.step_size = state.adaptation.final_step_size();

  for (std::size_t d = 0; d < cfg.n_samples; ++d) {
    const DrawStats s = nuts.transition();
    const std::size_t row = chain * cfg.n_samples + d;
    target.output_coordinates(state.position, std::span<double>(out.values).subspan(row * dim, dim));
    out.stats[row] = s;
    report(cfg.n_warmup + d);
  }
}

}  // namespace

NutsConfig NutsConfig::paper() {
  NutsConfig c;
  c.n_warmup = 5000;
  c.n_samples = 5000;
  c.n_chains = 4;
  return c;
}

NutsConfig NutsConfig::test() {
  NutsConfig c;
  c.n_warmup = 500;
  c.n_samples = 500;
  c.n_chains = 2;
  return c;
}

void NutsConfig::validate() const {
  if (n_samples == 0 || n_chains == 0) throw ConfigError("n_samples and n_chains must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("target_accept must lie strictly between 0 and 1");
  }
  if (max_tree_depth < 1 || max_tree_depth > 15) throw ConfigError("max_tree_depth must be in [1, 15]");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be positive");
  if (!(max_delta_h > 0.0)) throw ConfigError("max_delta_h must be positive");
}

void DualAveraging::restart(double step) {
  counter = 0.0;
  s_bar = 0.0;
  x_bar = 0.0;
  mu = std::log(10.0 * step);
  step_size = step;
}

double DualAveraging::final_step_size() const { return std::exp(x_bar); }

DualAveraging adapt_step_size(DualAveraging acc, double accept_prob) {
  acc.counter += 1.0;
  const double stat = std::min(1.0, accept_prob);
  const double eta = 1.0 / (acc.counter + acc.t0);
  acc.s_bar = (1.0 - eta) * acc.s_bar + eta * (acc.target - stat);
  const double x = acc.mu - acc.s_bar * std::sqrt(acc.counter) / acc.gamma;
  const double x_eta = std::pow(acc.counter, -acc.kappa);
  acc.x_bar = (1.0 - x_eta) * acc.x_bar + x_eta * x;
  acc.step_size = std::exp(x);
  return acc;
}

bool leapfrog(std::span<double> position, std::span<double> momentum, std::span<double> grad,
              double& log_density, double step, std::span<const double> inv_mass,
              const LogDensity& target) {
  const std::size_t n = position.size();
  for (std::size_t i = 0; i < n; ++i) momentum[i] += 0.5 * step * grad[i];
  for (std::size_t i = 0; i < n; ++i) position[i] += step * inv_mass[i] * momentum[i];
  double lp = -kInf;
  try {
    lp = target.log_density_gradient(position, grad);
  } catch (const std::exception&) {
    log_density = -kInf;
    return false;
  }
  log_density = lp;
  if (!std::isfinite(lp) || !all_finite(grad)) return false;
  for (std::size_t i = 0; i < n; ++i) momentum[i] += 0.5 * step * grad[i];
  return true;
}

DrawStats nuts_transition(ChainState& state, const LogDensity& target, const NutsConfig& cfg) {
  Nuts nuts(target, cfg, state);
  return nuts.transition();
}

std::vector<std::vector<double>> PosteriorDraws::chains(std::size_t i) const {
  std::vector<std::vector<double>> out(n_chains, std::vector<double>(n_samples));
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (std::size_t d = 0; d < n_samples; ++d) out[c][d] = value(c, d, i);
  }
  return out;
}

PosteriorDraws run_chains(const NutsConfig& cfg, const LogDensity& target) {
  cfg.validate();
  PosteriorDraws out;
  out.n_chains = cfg.n_chains;
  out.n_samples = cfg.n_samples;
  out.dimension = target.dimension();
  out.values.assign(out.n_chains * out.n_samples * out.dimension, 0.0);
  out.stats.assign(out.n_chains * out.n_samples, DrawStats{});
  out.names.reserve(out.dimension);
  for (std::size_t i = 0; i < out.dimension; ++i) out.names.push_back(target.coordinate_name(i));

  const std::size_t workers = std::min(thread_budget(cfg), cfg.n_chains);
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  if (workers <= 1) {
    for (std::size_t c = 0; c < cfg.n_chains; ++c) run_one_chain(cfg, target, c, out);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < cfg.n_chains; c = next++) {
        try {
          run_one_chain(cfg, target, c, out);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace tucker_hurdle
