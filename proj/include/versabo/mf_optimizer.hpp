#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "versabo/acquisition.hpp"
#include "versabo/core.hpp"

namespace versabo {

class AcquisitionFailure : public Error {
 public:
  using Error::Error;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

class SearchBox {
 public:
  SearchBox() = default;

  explicit SearchBox(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    if (bounds_.empty()) throw DimensionMismatch("search box needs at least one dimension");
    for (const auto& b : bounds_) {
      if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
        throw Error("search box bounds must be finite with lo < hi");
      }
    }
  }

  static SearchBox cube(std::size_t dim, double lo, double hi) {
    return SearchBox(std::vector<Interval>(dim, Interval{lo, hi}));
  }

  std::size_t dim() const { return bounds_.size(); }
  const Interval& operator[](std::size_t i) const { return bounds_[i]; }
  const std::vector<Interval>& bounds() const { return bounds_; }

  bool contains(const Input& x) const {
    if (x.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (x[i] < bounds_[i].lo || x[i] > bounds_[i].hi) return false;
    }
    return true;
  }

  Input sample(Rng& rng) const {
    std::vector<double> c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = rng.uniform(bounds_[i].lo, bounds_[i].hi);
    return Input(std::move(c));
  }

  Input clip(std::vector<double> c) const {
    for (std::size_t i = 0; i < dim(); ++i) c[i] = std::clamp(c[i], bounds_[i].lo, bounds_[i].hi);
    return Input(std::move(c));
  }

  /// Maps x into [0,1]^d.
  std::vector<double> normalize(std::span<const double> x) const {
    std::vector<double> u(dim());
    for (std::size_t i = 0; i < dim(); ++i) u[i] = (x[i] - bounds_[i].lo) / bounds_[i].width();
    return u;
  }

  friend bool operator==(const SearchBox&, const SearchBox&) = default;

 private:
  std::vector<Interval> bounds_;
};

struct FidelitySchedule {
  std::vector<std::size_t> fidelities{10, 100, 1000};
  std::size_t bootstrap_reps = 50;
  double lcb_quantile = 0.1;

  std::size_t top() const { return fidelities.back(); }

  void validate() const {
    if (fidelities.empty()) throw Error("fidelity schedule needs at least one level");
    if (fidelities.front() < 1) throw Error("fidelities must be positive");
    for (std::size_t i = 1; i < fidelities.size(); ++i) {
      if (fidelities[i] <= fidelities[i - 1]) throw Error("fidelities must be strictly increasing");
    }
    if (bootstrap_reps < 1) throw Error("bootstrap needs B >= 1");
    if (!(lcb_quantile > 0.0 && lcb_quantile < 0.5)) throw Error("bootstrap LCB quantile must be in (0, 0.5)");
  }
};

/// Running minimum of acquisition values within one optimizer run.
class AcqMinState {
 public:
  double value() const { return a_min_.load(std::memory_order_acquire); }

  /// Lowers the minimum to v if v is smaller.
  void offer(double v) {
    double cur = a_min_.load(std::memory_order_acquire);
    while (v < cur && !a_min_.compare_exchange_weak(cur, v, std::memory_order_acq_rel)) {
    }
  }

  void reset(double v = std::numeric_limits<double>::infinity()) { a_min_.store(v); }

 private:
  std::atomic<double> a_min_{std::numeric_limits<double>::infinity()};
};

/// Linear-interpolation sample quantile (R type 7).
inline double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Rescales an empirical-quantile tradeoff b, given relative to m_ref draws,
/// to m draws; other acquisitions are returned with only M replaced.
inline Acquisition at_fidelity(Acquisition acq, std::size_t m, std::size_t m_ref) {
  if (acq.type == AcqType::ucb) {
    if (auto* q = std::get_if<EmpiricalQuantile>(&acq.lcb)) {
      q->b *= static_cast<double>(m + 1) / static_cast<double>(m_ref + 1);
    }
  }
  acq.fidelity = m;
  return acq;
}

/// Bootstrap lower bound of the sampling distribution of the (signed)
/// acquisition value computed from these draws.
inline double bootstrap_lcb(std::span<const double> objectives, const Acquisition& acq, std::size_t reps,
                            double quantile, double f_min, Seed seed) {
  if (objectives.empty()) throw Error("bootstrap of an empty draw list");
  std::vector<double> replicate(objectives.size());
  std::vector<double> a(reps);
  for (std::size_t j = 0; j < reps; ++j) {
    Rng rng(derive_seed(seed, {j + 1}));
    for (auto& v : replicate) v = objectives[rng.index(objectives.size())];
    a[j] = minimized_reduce(acq, replicate, f_min);
  }
  return empirical_quantile(std::move(a), quantile);
}

/// Draws y_{1:M_f} once via post/gen and bootstraps the acquisition estimate.
template <class PostFn, class GenFn>
double lcb_bootstrap(const Input& x, PostFn&& post, GenFn&& gen, const Acquisition& acq, std::size_t m_draws,
                     std::size_t reps, double quantile, double f_min, Seed seed_base,
                     const ObjectiveFn& f = objective_of) {
  const auto d = draw_predictive(x, post, gen, m_draws, seed_base, f);
  return bootstrap_lcb(d.objectives, at_fidelity(acq, m_draws, m_draws), reps, quantile, f_min,
                       derive_seed(seed_base, Stream::bootstrap));
}

/// Sampler signature: (x, M, seed) -> DrawBatch.
using Sampler = std::function<DrawBatch(const Input&, std::size_t, Seed)>;

/// Multi-fidelity acquisition. Escalates through the schedule while the
/// bootstrap LCB at the current level is <= a_min and returns the estimate
/// from the first level whose LCB exceeds a_min (or the top level), reusing
/// that level's draws. Values are per-draw (sums divided by M) so that levels
/// are comparable; they are signed for minimization.
template <class SamplerFn>
AcqEvalRecord acq_mf(const Input& x, SamplerFn&& sampler, const Acquisition& acq,
                     const FidelitySchedule& schedule, AcqMinState& state, double f_min, Seed seed_base) {
  const double a_min = state.value();
  const std::size_t levels = schedule.fidelities.size();
  CallCounts total;
  for (std::size_t f = 0; f < levels; ++f) {
    const std::size_t m = schedule.fidelities[f];
    const Acquisition level_acq = at_fidelity(acq, m, schedule.top());
    const DrawBatch d =
        sampler(x, m, derive_seed(seed_base, {static_cast<std::uint64_t>(Stream::fidelity), f}));
    total += d.calls;
    const double scale = reduction_scale(acq.type, m);
    if (f + 1 < levels) {
      const double lcb =
          bootstrap_lcb(d.objectives, level_acq, schedule.bootstrap_reps, schedule.lcb_quantile, f_min,
                        derive_seed(seed_base, {static_cast<std::uint64_t>(Stream::bootstrap), f})) /
          scale;
      if (lcb <= a_min) continue;
    }
    const double value = minimized_reduce(level_acq, d.objectives, f_min) / scale;
    state.offer(value);
    return AcqEvalRecord{value, total.post, total.gen, m};
  }
  throw Error("unreachable: empty fidelity schedule");
}

// ---------------------------------------------------------------------------
// Zeroth-order acquisition optimizer

struct OptimizerConfig {
  std::size_t budget = 256;        // uniform candidates
  std::size_t refine_rounds = 20;  // Gaussian perturbations of the incumbent
  double step_fraction = 0.05;     // initial perturbation scale, fraction of box width
  std::size_t halve_every = 5;

  void validate() const {
    if (budget < 1) throw Error("optimizer budget must be >= 1");
    if (!(step_fraction > 0.0)) throw Error("optimizer step fraction must be positive");
    if (halve_every < 1) throw Error("halve_every must be >= 1");
  }
};

struct OptimizeResult {
  Input best;
  double value = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  CallCounts calls;
};

/// acq(x, candidate_index) -> record whose value is minimized.
using AcqFn = std::function<AcqEvalRecord(const Input&, std::size_t)>;

/// Random search over the box followed by a shrinking Gaussian local search
/// around the incumbent. Only strict improvements replace the incumbent, so
/// ties go to the earliest candidate. Candidates whose evaluation throws a
/// versabo::Error are skipped; if every candidate fails, AcquisitionFailure.
inline OptimizeResult optimize_acq(const AcqFn& acq, const SearchBox& box, const OptimizerConfig& config,
                                   Seed seed) {
  config.validate();
  OptimizeResult out;
  std::size_t index = 0;
  bool have_best = false;

  auto consider = [&](Input x) {
    const std::size_t my_index = index++;
    ++out.evaluations;
    AcqEvalRecord rec;
    try {
      rec = acq(x, my_index);
    } catch (const Error&) {
      ++out.failures;
      return;
    }
    out.calls.post += rec.post_calls;
    out.calls.gen += rec.gen_calls;
    if (!std::isfinite(rec.value)) {
      ++out.failures;
      return;
    }
    if (!have_best || rec.value < out.value) {
      have_best = true;
      out.value = rec.value;
      out.best = std::move(x);
      out.best_index = my_index;
    }
  };

  Rng candidates(derive_seed(seed, {1}));
  for (std::size_t i = 0; i < config.budget; ++i) consider(box.sample(candidates));
  if (!have_best) throw AcquisitionFailure("every acquisition candidate failed");

  Rng steps(derive_seed(seed, {2}));
  for (std::size_t r = 0; r < config.refine_rounds; ++r) {
    const double factor = config.step_fraction * std::ldexp(1.0, -static_cast<int>(r / config.halve_every));
    std::vector<double> c = out.best.vector();
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += factor * box[j].width() * steps.normal();
    consider(box.clip(std::move(c)));
  }
  return out;
}

}  // namespace versabo
