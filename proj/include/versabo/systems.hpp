#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "versabo/models/basin.hpp"
#include "versabo/models/phaseshift.hpp"
#include "versabo/probo.hpp"

namespace versabo {

// ---------------------------------------------------------------------------
// Surrogate constants. Every number that defines a shipped system lives here.

namespace constants {

inline constexpr double kContaminatedLo = -5.0;
inline constexpr double kContaminatedHi = 5.0;
inline constexpr std::size_t kGridPointsPerDim = 101;
inline constexpr std::size_t kGridMaxDim = 3;
inline constexpr std::size_t kRandomSearchSamples = 100000;

inline constexpr std::size_t kStateDim = 4;
inline constexpr double kStateBase = 0.45;
inline constexpr std::array<double, 4> kStateBump1Center{0.62, 0.52, 0.35, 0.60};
inline constexpr double kStateBump1Height = 0.45;
inline constexpr double kStateBump1Width = 0.30;
inline constexpr std::array<double, 4> kStateBump2Center{0.15, 0.20, 0.85, 0.20};
inline constexpr double kStateBump2Height = 0.25;
inline constexpr double kStateBump2Width = 0.20;
inline constexpr double kStateFailX0 = 0.72;  // fail region: x0 >= 0.72 and x1 >= 0.60
inline constexpr double kStateFailX1 = 0.60;
inline constexpr double kStateSentinel = 0.30;
inline constexpr double kStateNoiseSd = 0.01;

inline constexpr std::array<double, 2> kTaskAlpha{0.2, -0.1};
inline constexpr std::array<double, 2> kTaskBeta{1.0, 1.5};
inline constexpr double kMultitaskNoiseSd = 0.01;

inline constexpr std::array<double, 2> kBasinMu{0.63, 0.38};
inline constexpr std::array<double, 2> kBasinA{4.0, 3.0};
inline constexpr std::array<double, 2> kBasinB{3.0, 5.0};
inline constexpr double kBasinC = 0.2;
inline constexpr double kBasinNoiseSd = 0.01;

inline constexpr double kPhaseLo = -5.0;
inline constexpr double kPhaseHi = 5.0;
inline constexpr std::array<double, 2> kPhaseM{-1.0, 1.5};
inline constexpr std::array<double, 2> kPhaseS{4.0, 3.0};
inline constexpr std::array<double, 2> kPhaseMu{-1.5, 2.0};
inline constexpr double kPhaseNoiseSd = 0.05;

}  // namespace constants

// ---------------------------------------------------------------------------
// Box maximization used for the contamination interval and known optima

/// Coordinate pattern search from x, maximizing f inside the box.
template <class F>
std::vector<double> pattern_refine(F&& f, const SearchBox& box, std::vector<double> x, double step_fraction) {
  double best = f(x);
  double step = step_fraction;
  while (step > 1e-10) {
    bool improved = false;
    for (std::size_t j = 0; j < box.dim(); ++j) {
      for (double dir : {1.0, -1.0}) {
        std::vector<double> y = x;
        y[j] = std::clamp(y[j] + dir * step * box[j].width(), box[j].lo, box[j].hi);
        const double v = f(y);
        if (v > best) {
          best = v;
          x = std::move(y);
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return x;
}

/// Maximum of f over the box: a dense grid (d <= 3) or uniform random
/// samples, then pattern-search refinement of the best point.
template <class F>
double box_maximum(F&& f, const SearchBox& box, Seed seed = Seed{7}) {
  using namespace constants;
  const std::size_t d = box.dim();
  std::vector<double> best_x(d);
  double best = -std::numeric_limits<double>::infinity();
  double step = 0.0;
  if (d <= kGridMaxDim) {
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) total *= kGridPointsPerDim;
    std::vector<double> x(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t r = idx;
      for (std::size_t j = 0; j < d; ++j) {
        const auto k = r % kGridPointsPerDim;
        r /= kGridPointsPerDim;
        x[j] = box[j].lo + box[j].width() * static_cast<double>(k) / static_cast<double>(kGridPointsPerDim - 1);
      }
      const double v = f(x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    step = 1.0 / static_cast<double>(kGridPointsPerDim - 1);
  } else {
    Rng rng(seed);
    for (std::size_t i = 0; i < kRandomSearchSamples; ++i) {
      const Input x = box.sample(rng);
      const double v = f(x.vector());
      if (v > best) {
        best = v;
        best_x = x.vector();
      }
    }
    step = 0.05;
  }
  return f(pattern_refine(f, box, std::move(best_x), step));
}

// ---------------------------------------------------------------------------
// Systems

/// f(x) = ||x||_2 - (1/d) sum cos(x_i).
inline double contaminated_clean_f(std::span<const double> x) {
  double ss = 0.0, c = 0.0;
  for (double v : x) {
    ss += v * v;
    c += std::cos(v);
  }
  return std::sqrt(ss) - c / static_cast<double>(x.size());
}

/// With probability 1 - p returns f(x); otherwise a Uniform draw on
/// [f_max / 10, f_max]. aux.contaminated flags which happened.
class ContaminatedSystem : public System {
 public:
  ContaminatedSystem(std::size_t dim, double p, std::optional<SearchBox> box = std::nullopt)
      : box_(box ? *box : SearchBox::cube(dim, constants::kContaminatedLo, constants::kContaminatedHi)), p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("contamination probability must be in [0, 1]");
    if (box_.dim() != dim) throw DimensionMismatch("contaminated system: box dimension disagrees");
    f_max_ = box_maximum([](const std::vector<double>& x) { return contaminated_clean_f(x); }, box_);
  }

  std::string id() const override { return "contaminated"; }
  const SearchBox& box() const override { return box_; }
  double p() const { return p_; }
  double f_max() const { return f_max_; }

  Observation evaluate(const Input& x, Seed s) const override {
    Rng rng(s);
    Observation y;
    if (rng.uniform() < p_) {
      y.objective = rng.uniform(f_max_ / 10.0, f_max_);
      y.aux["contaminated"] = 1.0;
    } else {
      y.objective = contaminated_clean_f(x.coords());
      y.aux["contaminated"] = 0.0;
    }
    return y;
  }

  std::optional<double> clean_objective(const Input& x) const override { return contaminated_clean_f(x.coords()); }

 private:
  SearchBox box_;
  double p_;
  double f_max_ = 0.0;
};

inline double state_score(std::span<const double> x) {
  using namespace constants;
  double r1 = 0.0, r2 = 0.0;
  for (std::size_t j = 0; j < kStateDim; ++j) {
    r1 += (x[j] - kStateBump1Center[j]) * (x[j] - kStateBump1Center[j]);
    r2 += (x[j] - kStateBump2Center[j]) * (x[j] - kStateBump2Center[j]);
  }
  return kStateBase + kStateBump1Height * std::exp(-r1 / (2.0 * kStateBump1Width * kStateBump1Width)) +
         kStateBump2Height * std::exp(-r2 / (2.0 * kStateBump2Width * kStateBump2Width));
}

inline bool state_fails(std::span<const double> x) {
  return x[0] >= constants::kStateFailX0 && x[1] >= constants::kStateFailX1;
}

/// Score to maximize on [0,1]^4 with a fail sub-box returning a sentinel.
class StateSystem : public System {
 public:
  StateSystem() : box_(SearchBox::cube(constants::kStateDim, 0.0, 1.0)) {
    max_score_ = box_maximum([](const std::vector<double>& x) { return clean(x); }, box_);
  }

  std::string id() const override { return "state"; }
  const SearchBox& box() const override { return box_; }
  /// Largest noise-free score over the box.
  double max_score() const { return max_score_; }

  static double clean(std::span<const double> x) {
    return state_fails(x) ? constants::kStateSentinel : state_score(x);
  }

  Observation evaluate(const Input& x, Seed s) const override {
    check(x);
    Observation y;
    if (state_fails(x.coords())) {
      y.objective = constants::kStateSentinel;
      y.aux["state"] = 0.0;
    } else {
      Rng rng(s);
      y.objective = state_score(x.coords()) + constants::kStateNoiseSd * rng.normal();
      y.aux["state"] = 1.0;
    }
    return y;
  }

  std::optional<double> clean_objective(const Input& x) const override { return clean(x.coords()); }

 private:
  void check(const Input& x) const {
    if (x.dim() != constants::kStateDim) throw DimensionMismatch("state system is 4-dimensional");
  }
  SearchBox box_;
  double max_score_ = 0.0;
};

/// Minimization view of a system to be maximized: objective -> -objective.
class NegatedSystem : public System {
 public:
  explicit NegatedSystem(std::shared_ptr<const System> inner) : inner_(std::move(inner)) {}

  std::string id() const override { return inner_->id(); }
  const SearchBox& box() const override { return inner_->box(); }
  const System& inner() const { return *inner_; }

  Observation evaluate(const Input& x, Seed s) const override {
    Observation y = inner_->evaluate(x, s);
    y.objective = -y.objective;
    return y;
  }

  std::optional<double> clean_objective(const Input& x) const override {
    auto v = inner_->clean_objective(x);
    if (v) *v = -*v;
    return v;
  }

 private:
  std::shared_ptr<const System> inner_;
};

/// Shared latent of the multi-task system, on [0,1]^2.
inline double multitask_latent(std::span<const double> x) {
  return std::sin(3.0 * x[0]) + std::cos(3.0 * x[1]) - 1.0;
}

/// Task t observes alpha_t + beta_t h(x) + noise; the last input
/// coordinate (in [0.5, 2.5]) selects the task.
class MultitaskSystem : public System {
 public:
  MultitaskSystem() : box_({{0.0, 1.0}, {0.0, 1.0}, {0.5, 2.5}}) {}

  std::string id() const override { return "multitask"; }
  const SearchBox& box() const override { return box_; }

  static std::size_t task_of(const Input& x) {
    const double t = std::round(x[x.dim() - 1]);
    if (t != 1.0 && t != 2.0) throw Error("unknown task " + std::to_string(t));
    return static_cast<std::size_t>(t);
  }

  static double clean(std::size_t task, std::span<const double> x) {
    return constants::kTaskAlpha[task - 1] + constants::kTaskBeta[task - 1] * multitask_latent(x);
  }

  Observation evaluate(const Input& x, Seed s) const override {
    const std::size_t t = task_of(x);
    Rng rng(s);
    Observation y;
    y.objective = clean(t, x.coords()) + constants::kMultitaskNoiseSd * rng.normal();
    y.aux["task"] = static_cast<double>(t);
    return y;
  }

  std::optional<double> clean_objective(const Input& x) const override { return clean(task_of(x), x.coords()); }

 private:
  SearchBox box_;
};

/// Steep V-shaped objective on [0,1]^2 from fixed basin parameters.
class BasinSystem : public System {
 public:
  BasinSystem() : box_(SearchBox::cube(2, 0.0, 1.0)) {
    using namespace constants;
    params_.mu.assign(kBasinMu.begin(), kBasinMu.end());
    params_.a.assign(kBasinA.begin(), kBasinA.end());
    params_.b.assign(kBasinB.begin(), kBasinB.end());
    params_.c = kBasinC;
    params_.sigma2 = kBasinNoiseSd * kBasinNoiseSd;
  }

  std::string id() const override { return "basin"; }
  const SearchBox& box() const override { return box_; }
  const BasinParams& params() const { return params_; }
  double minimum() const { return params_.c; }

  Observation evaluate(const Input& x, Seed s) const override {
    Rng rng(s);
    return Observation{params_.mean_at(x.coords()) + std::sqrt(params_.sigma2) * rng.normal(), {}};
  }

  std::optional<double> clean_objective(const Input& x) const override { return params_.mean_at(x.coords()); }

 private:
  SearchBox box_;
  BasinParams params_;
};

/// 1-d system with two logistic phase shifts.
class PhaseShiftSystem : public System {
 public:
  PhaseShiftSystem() : box_(SearchBox::cube(1, constants::kPhaseLo, constants::kPhaseHi)) {}

  std::string id() const override { return "phaseshift"; }
  const SearchBox& box() const override { return box_; }

  static double clean(double x) {
    using namespace constants;
    double y = 0.0;
    for (std::size_t k = 0; k < kPhaseM.size(); ++k) y += phase_logistic(x, kPhaseM[k], kPhaseS[k], kPhaseMu[k]);
    return y;
  }

  Observation evaluate(const Input& x, Seed s) const override {
    Rng rng(s);
    return Observation{clean(x[0]) + constants::kPhaseNoiseSd * rng.normal(), {}};
  }

  std::optional<double> clean_objective(const Input& x) const override { return clean(x[0]); }

 private:
  SearchBox box_;
};

// ---------------------------------------------------------------------------
// Registry

struct SystemSpec {
  std::string id;
  std::map<std::string, double, std::less<>> params;

  double param(std::string_view key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

inline std::vector<std::string> system_ids() { return {"basin", "contaminated", "multitask", "phaseshift", "state"}; }

/// Parameters each system accepts.
inline std::vector<std::string> system_params(std::string_view id) {
  if (id == "contaminated") return {"dim", "p"};
  return {};
}

inline std::shared_ptr<const System> make_system(const SystemSpec& spec) {
  for (const auto& [k, v] : spec.params) {
    const auto allowed = system_params(spec.id);
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error("system '" + spec.id + "' has no parameter '" + k + "'");
    }
  }
  if (spec.id == "contaminated") {
    const double dim = spec.param("dim", 2.0);
    if (!(dim >= 1.0) || dim != std::floor(dim)) throw Error("contaminated system: dim must be a positive integer");
    return std::make_shared<ContaminatedSystem>(static_cast<std::size_t>(dim), spec.param("p", 0.0));
  }
  if (spec.id == "state") return std::make_shared<NegatedSystem>(std::make_shared<StateSystem>());
  if (spec.id == "multitask") return std::make_shared<MultitaskSystem>();
  if (spec.id == "basin") return std::make_shared<BasinSystem>();
  if (spec.id == "phaseshift") return std::make_shared<PhaseShiftSystem>();
  throw Error("unknown system '" + spec.id + "'");
}

}  // namespace versabo
