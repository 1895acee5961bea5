#pragma once

#include <chrono>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "versabo/acquisition.hpp"
#include "versabo/core.hpp"
#include "versabo/mf_optimizer.hpp"

namespace versabo {

/// The black-box system being optimized.
class System {
 public:
  virtual ~System() = default;
  virtual std::string id() const = 0;
  virtual const SearchBox& box() const = 0;
  virtual Observation evaluate(const Input& x, Seed s) const = 0;
  /// Uncorrupted objective at x, for reporting only; models never see it.
  virtual std::optional<double> clean_objective(const Input&) const { return std::nullopt; }
};

struct RunConfig {
  std::size_t iterations = 10;  // N
  std::size_t n_init = 3;
  Acquisition acquisition;
  std::optional<FidelitySchedule> schedule;  // set: multi-fidelity evaluation
  OptimizerConfig optimizer;
  Seed seed{};
  ObjectiveFn objective = objective_of;
  bool record_wall_time = true;

  void validate() const {
    if (n_init < 1) throw Error("n_init must be >= 1");
    acquisition.validate();
    optimizer.validate();
    if (schedule) {
      schedule->validate();
      at_fidelity(acquisition, schedule->fidelities.front(), schedule->top()).validate();
    }
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  Input x;
  Observation y;
  double observed_f = 0.0;
  double clean_f = 0.0;
  double best_f = 0.0;        // min clean_f over iterations <= this one
  CallCounts cumulative;      // infer/post/gen calls so far
  double acq_value = 0.0;
  double wall_ms = 0.0;
  bool fallback = false;      // acquisition optimization failed; x was drawn uniformly
};

struct RunTrace {
  std::vector<IterationRecord> iterations;
};

struct RunResult {
  Dataset data;
  RunTrace trace;
};

class RunError : public Error {
 public:
  RunError(const std::string& what, RunTrace partial) : Error(what), partial_(std::move(partial)) {}
  const RunTrace& partial() const { return partial_; }

 private:
  RunTrace partial_;
};

/// Minimal clean objective over iterations 1..n.
inline double best_so_far(const RunTrace& trace, std::size_t n) {
  if (n < 1 || n > trace.iterations.size()) throw Error("best_so_far: iteration out of range");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) best = std::min(best, trace.iterations[i].clean_f);
  return best;
}

namespace detail {

inline constexpr std::uint64_t label(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace detail

/// Infer once, optimize the acquisition with post/gen only, observe, append.
inline RunResult probo_run(const RunConfig& config, const System& system, const Model& model) {
  config.validate();
  using detail::label;
  const SearchBox& box = system.box();
  const Seed master = config.seed;

  Dataset data;
  for (std::size_t i = 0; i < config.n_init; ++i) {
    Rng rng(derive_seed(master, {label(Stream::init), i}));
    Input x = box.sample(rng);
    Observation y = system.evaluate(x, derive_seed(master, {label(Stream::observe), 0, i}));
    data = data.appended(std::move(x), std::move(y));
  }

  RunTrace trace;
  CallCounts counts;
  double best = std::numeric_limits<double>::infinity();
  const Acquisition& acq = config.acquisition;

  for (std::size_t n = 1; n <= config.iterations; ++n) {
    const auto t0 = std::chrono::steady_clock::now();

    PosteriorHandle handle;
    try {
      handle = model.infer(data, derive_seed(master, {label(Stream::infer), n}));
    } catch (const Error& e) {
      throw RunError("inference failed at iteration " + std::to_string(n) + ": " + e.what(), trace);
    }
    ++counts.infer;

    const double fmin = f_min(data, config.objective);
    const DrawSource source{&model, handle, config.objective, derive_seed(master, {n})};
    AcqMinState state;

    const AcqFn acq_fn = [&](const Input& x, std::size_t candidate) -> AcqEvalRecord {
      // TS shares one generative stream across candidates so a_TS is a fixed function of x.
      const Seed base = acq.type == AcqType::ts ? derive_seed(source.iteration_seed, Stream::gen)
                                                : derive_seed(master, {n, candidate});
      if (config.schedule) {
        auto sampler = [&](const Input& xx, std::size_t m, Seed s) { return source.draws(acq, xx, m, s); };
        return acq_mf(x, sampler, acq, *config.schedule, state, fmin, base);
      }
      return evaluate_acquisition(source, acq, x, fmin, base);
    };

    IterationRecord rec;
    rec.iteration = n;
    try {
      OptimizeResult opt = optimize_acq(acq_fn, box, config.optimizer,
                                        derive_seed(master, {label(Stream::optimizer), n}));
      counts.post += opt.calls.post;
      counts.gen += opt.calls.gen;
      rec.x = std::move(opt.best);
      rec.acq_value = opt.value;
    } catch (const AcquisitionFailure&) {
      Rng rng(derive_seed(master, {label(Stream::optimizer), n, 1}));
      rec.x = box.sample(rng);
      rec.acq_value = std::numeric_limits<double>::quiet_NaN();
      rec.fallback = true;
      std::clog << "versabo: acquisition optimization failed at iteration " << n
                << "; querying a uniform random point\n";
    }

    rec.y = system.evaluate(rec.x, derive_seed(master, {label(Stream::observe), 1, n}));
    rec.observed_f = config.objective(rec.y);
    rec.clean_f = system.clean_objective(rec.x).value_or(rec.observed_f);
    best = std::min(best, rec.clean_f);
    rec.best_f = best;
    rec.cumulative = counts;
    if (config.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    data = data.appended(rec.x, rec.y);
    trace.iterations.push_back(std::move(rec));
  }
  return RunResult{std::move(data), std::move(trace)};
}

}  // namespace versabo
