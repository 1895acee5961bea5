#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "versabo/core.hpp"

namespace versabo {

enum class AcqType { ei, pi, ucb, ts };

inline std::string to_string(AcqType t) {
  switch (t) {
    case AcqType::ei: return "ei";
    case AcqType::pi: return "pi";
    case AcqType::ucb: return "ucb";
    case AcqType::ts: return "ts";
  }
  return "?";
}

/// LCB by order statistics: f_(b), or the midpoint of the two neighbours when
/// b is fractional.
struct EmpiricalQuantile {
  double b = 1.0;
};

/// LCB under a Gaussian read of the draws: mean - beta * variance, or
/// mean - beta * std when use_std is set.
struct ParametricLcb {
  double beta = 1.0;
  bool use_std = false;
};

using LcbEstimator = std::variant<EmpiricalQuantile, ParametricLcb>;

struct Acquisition {
  AcqType type = AcqType::ei;
  LcbEstimator lcb = ParametricLcb{};  // only read for UCB
  std::size_t fidelity = 100;          // M

  void validate() const {
    if (fidelity < 1) throw Error("acquisition fidelity M must be >= 1");
    if (type != AcqType::ucb) return;
    if (const auto* q = std::get_if<EmpiricalQuantile>(&lcb)) {
      if (!(q->b >= 0.0 && q->b <= static_cast<double>(fidelity) + 1.0)) {
        throw Error("empirical-quantile tradeoff b must lie in [0, M+1]");
      }
    } else {
      const auto& p = std::get<ParametricLcb>(lcb);
      if (!(p.beta > 0.0)) throw Error("parametric LCB needs beta > 0");
      if (fidelity < 2) throw Error("parametric LCB needs M >= 2");
    }
  }
};

struct AcqEvalRecord {
  double value = 0.0;
  std::size_t post_calls = 0;
  std::size_t gen_calls = 0;
  std::size_t fidelity_used = 0;
};

// ---------------------------------------------------------------------------
// LCB estimators

inline double lcb_empirical_quantile(std::span<const double> values, double b) {
  if (values.empty()) throw Error("empirical-quantile LCB of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  // f_(0) and f_(M+1) are undefined; clamp to the extreme order statistics.
  b = std::clamp(b, 1.0, m);
  const double lower = std::floor(b);
  const auto k = static_cast<std::size_t>(lower);  // 1-based
  if (b == lower) return sorted[k - 1];
  return 0.5 * (sorted[k - 1] + sorted[k]);
}

inline double lcb_parametric(std::span<const double> values, double beta, bool use_std = false) {
  if (values.size() < 2) throw Error("parametric LCB needs at least two draws");
  const double m = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (m - 1.0);
  return mean - beta * (use_std ? std::sqrt(var) : var);
}

inline double lcb_estimate(const LcbEstimator& est, std::span<const double> values) {
  if (const auto* q = std::get_if<EmpiricalQuantile>(&est)) return lcb_empirical_quantile(values, q->b);
  const auto& p = std::get<ParametricLcb>(est);
  return lcb_parametric(values, p.beta, p.use_std);
}

// ---------------------------------------------------------------------------
// Final reductions lambda(y_{1:M})

inline double improvement_sum(std::span<const double> objectives, double f_min) {
  double s = 0.0;
  for (double v : objectives) {
    if (v <= f_min) s += f_min - v;
  }
  return s;
}

inline double improvement_count(std::span<const double> objectives, double f_min) {
  double s = 0.0;
  for (double v : objectives) {
    if (v <= f_min) s += 1.0;
  }
  return s;
}

/// The last line of the EI/PI/UCB/TS algorithms applied to pre-drawn values.
/// EI and PI are larger-is-better; UCB and TS are smaller-is-better.
inline double lambda_reduce(const Acquisition& acq, std::span<const double> objectives, double f_min) {
  if (objectives.empty()) throw Error("lambda reduce of an empty draw list");
  switch (acq.type) {
    case AcqType::ei: return improvement_sum(objectives, f_min);
    case AcqType::pi: return improvement_count(objectives, f_min);
    case AcqType::ucb: return lcb_estimate(acq.lcb, objectives);
    case AcqType::ts: return std::accumulate(objectives.begin(), objectives.end(), 0.0);
  }
  return 0.0;
}

/// Sign that turns lambda into a quantity to minimize.
inline double minimization_sign(AcqType t) {
  return (t == AcqType::ei || t == AcqType::pi) ? -1.0 : 1.0;
}

/// lambda signed for minimization (EI and PI negated).
inline double minimized_reduce(const Acquisition& acq, std::span<const double> objectives, double f_min) {
  return minimization_sign(acq.type) * lambda_reduce(acq, objectives, f_min);
}

/// Divisor that turns lambda over M draws into a per-draw quantity; sums
/// (EI, PI, TS) scale with M, LCB estimates do not.
inline double reduction_scale(AcqType t, std::size_t m_draws) {
  return t == AcqType::ucb ? 1.0 : static_cast<double>(m_draws);
}

// ---------------------------------------------------------------------------
// Monte Carlo acquisition functions over post and gen

namespace detail {

inline AcqEvalRecord make_record(double value, const DrawBatch& d, std::size_t m) {
  return AcqEvalRecord{value, d.calls.post, d.calls.gen, m};
}

}  // namespace detail

template <class PostFn, class GenFn>
AcqEvalRecord acq_ei(const Input& x, PostFn&& post, GenFn&& gen, double f_min, std::size_t m_draws,
                     Seed seed_base, const ObjectiveFn& f = objective_of) {
  if (!std::isfinite(f_min)) throw Error("EI needs a finite f_min");
  auto d = draw_predictive(x, post, gen, m_draws, seed_base, f);
  return detail::make_record(improvement_sum(d.objectives, f_min), d, m_draws);
}

template <class PostFn, class GenFn>
AcqEvalRecord acq_pi(const Input& x, PostFn&& post, GenFn&& gen, double f_min, std::size_t m_draws,
                     Seed seed_base, const ObjectiveFn& f = objective_of) {
  if (!std::isfinite(f_min)) throw Error("PI needs a finite f_min");
  auto d = draw_predictive(x, post, gen, m_draws, seed_base, f);
  return detail::make_record(improvement_count(d.objectives, f_min), d, m_draws);
}

template <class PostFn, class GenFn>
AcqEvalRecord acq_ucb(const Input& x, PostFn&& post, GenFn&& gen, const LcbEstimator& estimator,
                      std::size_t m_draws, Seed seed_base, const ObjectiveFn& f = objective_of) {
  auto d = draw_predictive(x, post, gen, m_draws, seed_base, f);
  return detail::make_record(lcb_estimate(estimator, d.objectives), d, m_draws);
}

/// One posterior draw fixed by the iteration seed, then M generative draws.
template <class PostFn, class GenFn>
AcqEvalRecord acq_ts(const Input& x, PostFn&& post, GenFn&& gen, std::size_t m_draws, Seed seed_base,
                     Seed iteration_seed, const ObjectiveFn& f = objective_of) {
  const auto z = post(iteration_seed);
  auto d = draw_conditional(x, z, gen, m_draws, seed_base, f);
  d.calls.post += 1;
  const double total = std::accumulate(d.objectives.begin(), d.objectives.end(), 0.0);
  return detail::make_record(total, d, m_draws);
}

// ---------------------------------------------------------------------------
// Model-level evaluation used by the BO loop

/// Where the M draws come from for one evaluation at x.
struct DrawSource {
  const Model* model = nullptr;
  PosteriorHandle handle;
  ObjectiveFn objective = objective_of;
  Seed iteration_seed{};  // TS: fixes the posterior draw for a whole BO iteration

  DrawBatch draws(const Acquisition& acq, const Input& x, std::size_t m_draws, Seed seed_base) const {
    if (acq.type == AcqType::ts) {
      const auto z = model->post(handle, iteration_seed);
      auto d = model->conditional_draws(z, x, m_draws, seed_base, objective);
      d.calls.post += 1;
      return d;
    }
    return model->predictive_draws(handle, x, m_draws, seed_base, objective);
  }
};

/// Single-fidelity evaluation, value signed for minimization (unnormalized).
inline AcqEvalRecord evaluate_acquisition(const DrawSource& source, const Acquisition& acq, const Input& x,
                                          double f_min, Seed seed_base) {
  const auto d = source.draws(acq, x, acq.fidelity, seed_base);
  return detail::make_record(minimized_reduce(acq, d.objectives, f_min), d, acq.fidelity);
}

}  // namespace versabo
