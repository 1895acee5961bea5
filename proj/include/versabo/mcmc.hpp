#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "versabo/core.hpp"

namespace versabo {

struct MhConfig {
  std::size_t steps = 5000;
  double burn_in = 0.5;               // fraction of steps
  std::size_t thin = 5;
  std::vector<double> initial_scales;  // per parameter; empty means 0.1 each
  double target_acceptance = 0.23;
  std::size_t pool_cap = 500;

  std::size_t burn_in_steps() const { return static_cast<std::size_t>(burn_in * static_cast<double>(steps)); }

  void validate() const {
    if (steps == 0) throw Error("MH needs steps > 0");
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw Error("MH burn-in fraction must be in [0, 1)");
    if (thin == 0) throw Error("MH thinning must be >= 1");
    if (pool_cap == 0) throw Error("MH pool cap must be >= 1");
    if (steps <= burn_in_steps()) throw Error("MH configuration leaves no post-burn-in states");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw Error("MH target acceptance must be in (0, 1)");
  }
};

using LogTarget = std::function<double(std::span<const double>)>;

/// Random-walk Metropolis with independent Gaussian proposals per parameter.
/// During burn-in a global scale follows the target acceptance rate. In the
/// third quarter of burn-in the per-parameter scales also follow the chain's
/// marginal standard deviations; the last quarter tunes the global scale
/// alone. After burn-in the kernel is frozen.
class AdaptiveMetropolis {
 public:
  static constexpr std::size_t kBatch = 50;

  AdaptiveMetropolis(std::vector<double> init, double init_log_target, std::vector<double> scales,
                     double target_acceptance, bool marginal_scaling = true)
      : marginal_scaling_(marginal_scaling),
        state_(std::move(init)),
        log_target_(init_log_target),
        base_(std::move(scales)),
        target_(target_acceptance),
        mean_(state_.size(), 0.0),
        m2_(state_.size(), 0.0),
        proposal_(state_.size()) {
    if (base_.empty()) base_.assign(state_.size(), 0.1);
    if (base_.size() != state_.size()) throw Error("MH: one initial scale per parameter required");
  }

  const std::vector<double>& state() const { return state_; }
  double log_target() const { return log_target_; }

  /// Replaces the current state (used when another block of a Gibbs sweep
  /// changed the target).
  void set_state(std::vector<double> s, double lp) {
    state_ = std::move(s);
    log_target_ = lp;
  }

  bool step(const LogTarget& target, Rng& rng) {
    const double lambda = std::exp(log_lambda_);
    for (std::size_t j = 0; j < state_.size(); ++j) proposal_[j] = state_[j] + lambda * base_[j] * rng.normal();
    const double lp = target(proposal_);
    const double u = rng.uniform();
    const bool accept = std::isfinite(lp) && std::log(u) < lp - log_target_;
    if (accept) {
      state_.swap(proposal_);
      log_target_ = lp;
    }
    return accept;
  }

  /// Called once per burn-in step with the step index and the burn-in length.
  void adapt(bool accepted, std::size_t t, std::size_t burn_in) {
    batch_accepted_ += accepted ? 1 : 0;
    if (t >= burn_in / 4) observe_state();
    if ((t + 1) % kBatch != 0) return;
    ++batches_;
    const double rate = static_cast<double>(batch_accepted_) / static_cast<double>(kBatch);
    batch_accepted_ = 0;
    log_lambda_ += (rate - target_) * std::min(1.0, 3.0 / std::sqrt(static_cast<double>(batches_)));
    if (marginal_scaling_ && t >= burn_in / 2 && t < 3 * burn_in / 4 && count_ >= 100) {
      const double d = static_cast<double>(state_.size());
      for (std::size_t j = 0; j < state_.size(); ++j) {
        const double sd = std::sqrt(m2_[j] / static_cast<double>(count_ - 1));
        if (sd > 1e-12) base_[j] = 2.38 / std::sqrt(d) * sd;
      }
      // the multiplier was tuned for the old scales; restart it around 1
      if (!rescaled_) {
        rescaled_ = true;
        log_lambda_ = 0.0;
        batches_ = 0;
      }
    }
  }

 private:
  bool marginal_scaling_;
  bool rescaled_ = false;

  void observe_state() {
    ++count_;
    for (std::size_t j = 0; j < state_.size(); ++j) {
      const double delta = state_[j] - mean_[j];
      mean_[j] += delta / static_cast<double>(count_);
      m2_[j] += delta * (state_[j] - mean_[j]);
    }
  }

  std::vector<double> state_;
  double log_target_;
  std::vector<double> base_;
  double target_;
  double log_lambda_ = 0.0;
  std::size_t batch_accepted_ = 0;
  std::size_t batches_ = 0;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::vector<double> proposal_;
};

struct MhChain {
  std::vector<std::vector<double>> pool;  // thinned post-burn-in states, chain order
  double acceptance_rate = 0.0;           // post-burn-in
  std::size_t accepted = 0;               // over the whole run
};

/// Keeps `cap` of the states, chosen uniformly without replacement, in order.
inline void subsample_pool(std::vector<std::vector<double>>& pool, std::size_t cap, Rng& rng) {
  if (pool.size() <= cap) return;
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<std::vector<double>> kept;
  kept.reserve(cap);
  for (std::size_t i : idx) kept.push_back(std::move(pool[i]));
  pool = std::move(kept);
}

inline MhChain mh_sample(const LogTarget& log_target, std::vector<double> init, const MhConfig& config, Seed seed) {
  config.validate();
  const double lp0 = log_target(init);
  if (!std::isfinite(lp0)) throw InferenceError("MH: log target is not finite at the initial state");

  AdaptiveMetropolis kernel(std::move(init), lp0, config.initial_scales, config.target_acceptance);
  Rng rng(seed);
  const std::size_t burn = config.burn_in_steps();
  MhChain out;
  std::size_t post_accepted = 0;
  for (std::size_t t = 0; t < config.steps; ++t) {
    const bool acc = kernel.step(log_target, rng);
    out.accepted += acc ? 1 : 0;
    if (t < burn) {
      kernel.adapt(acc, t, burn);
    } else {
      post_accepted += acc ? 1 : 0;
      if ((t - burn) % config.thin == 0) out.pool.push_back(kernel.state());
    }
  }
  if (out.accepted == 0) throw InferenceError("MH: no proposal was accepted (degenerate target)");
  out.acceptance_rate = static_cast<double>(post_accepted) / static_cast<double>(config.steps - burn);
  subsample_pool(out.pool, config.pool_cap, rng);
  return out;
}

/// Wraps chain states as latent samples. Repeated consecutive states (from
/// rejections) share one LatentSample, so derived quantities are built once.
template <class ToLatent>
PosteriorHandle pool_handle(const std::vector<std::vector<double>>& states, double acceptance_rate,
                            ToLatent&& to_latent) {
  SamplePool pool;
  pool.acceptance_rate = acceptance_rate;
  pool.samples.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i > 0 && states[i] == states[i - 1]) {
      pool.samples.push_back(pool.samples.back());
    } else {
      pool.samples.push_back(to_latent(std::span<const double>(states[i])));
    }
  }
  return PosteriorHandle(std::move(pool));
}

/// MH inference: runs the chain and returns its pool as a posterior handle.
template <class ToLatent>
PosteriorHandle mh_infer(const LogTarget& log_target, std::vector<double> init, const MhConfig& config, Seed seed,
                         ToLatent&& to_latent) {
  const MhChain chain = mh_sample(log_target, std::move(init), config, seed);
  return pool_handle(chain.pool, chain.acceptance_rate, std::forward<ToLatent>(to_latent));
}

/// One elliptical slice sampling move for a N(0, I)-whitened state. The
/// caller supplies the log likelihood at angle t of the ellipse
/// x cos t + nu sin t; returns the accepted angle and sets new_log_lik.
template <class LogLikAtAngle>
double elliptical_slice_angle(double current_log_lik, LogLikAtAngle&& log_lik_at, Rng& rng, double& new_log_lik) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double threshold = current_log_lik + std::log(rng.uniform());
  double angle = rng.uniform(0.0, two_pi);
  double lo = angle - two_pi;
  double hi = angle;
  for (int shrink = 0; shrink < 100; ++shrink) {
    const double ll = log_lik_at(angle);
    if (std::isfinite(ll) && ll > threshold) {
      new_log_lik = ll;
      return angle;
    }
    if (angle < 0.0) {
      lo = angle;
    } else {
      hi = angle;
    }
    angle = rng.uniform(lo, hi);
  }
  new_log_lik = current_log_lik;
  return 0.0;
}

}  // namespace versabo
