#pragma once

#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "versabo/models/registry.hpp"
#include "versabo/probo.hpp"
#include "versabo/systems.hpp"

namespace versabo {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CellSpec {
  std::string id;
  SystemSpec system;
  std::string model;
  Acquisition acquisition;
  std::optional<FidelitySchedule> schedule;  // set: multi-fidelity
  std::map<std::string, double, std::less<>> model_options;
  std::optional<MhConfig> mh;
  std::optional<std::size_t> iterations;

  std::string fidelity_mode() const { return schedule ? "mf" : "fixed"; }
};

struct BenchmarkConfig {
  std::string name = "benchmark";
  std::size_t trials = 1;
  std::size_t iterations = 10;
  std::size_t n_init = 3;
  Seed seed{1};
  OptimizerConfig optimizer;
  MhConfig mh;
  bool record_wall_time = false;
  CombineRule combine_rule = CombineRule::standard;
  std::vector<CellSpec> cells;

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    if (cells.empty()) throw ConfigError("config needs at least one cell");
    std::vector<std::string> ids;
    for (const auto& c : cells) {
      if (std::find(ids.begin(), ids.end(), c.id) != ids.end()) throw ConfigError("duplicate cell id '" + c.id + "'");
      ids.push_back(c.id);
    }
  }
};

// ---------------------------------------------------------------------------
// JSON parsing (strict: unknown keys are errors)

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

inline std::size_t get_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("'" + std::string(key) + "' in " + where + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline MhConfig parse_mh(const json& j, MhConfig base, const std::string& where) {
  check_keys(j, {"steps", "burn_in", "thin", "initial_scales", "target_acceptance", "pool_cap"}, where);
  base.steps = get_count(j, "steps", base.steps, where);
  base.burn_in = get_or<double>(j, "burn_in", base.burn_in, where);
  base.thin = get_count(j, "thin", base.thin, where);
  base.initial_scales = get_or<std::vector<double>>(j, "initial_scales", base.initial_scales, where);
  base.target_acceptance = get_or<double>(j, "target_acceptance", base.target_acceptance, where);
  base.pool_cap = get_count(j, "pool_cap", base.pool_cap, where);
  try {
    base.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return base;
}

inline AcqType parse_acq_type(const std::string& s) {
  if (s == "ei") return AcqType::ei;
  if (s == "pi") return AcqType::pi;
  if (s == "ucb") return AcqType::ucb;
  if (s == "ts") return AcqType::ts;
  throw ConfigError("unknown acquisition '" + s + "'");
}

inline Acquisition parse_acquisition(const json& j, const std::string& where) {
  check_keys(j, {"type", "fidelity", "lcb"}, where);
  if (!j.contains("type")) throw ConfigError(where + " needs a type");
  Acquisition a;
  a.type = parse_acq_type(get_or<std::string>(j, "type", "", where));
  a.fidelity = get_count(j, "fidelity", a.fidelity, where);
  if (j.contains("lcb")) {
    const auto& l = j.at("lcb");
    const std::string lw = where + ".lcb";
    check_keys(l, {"kind", "b", "beta", "use_std"}, lw);
    const auto kind = get_or<std::string>(l, "kind", "parametric", lw);
    if (kind == "quantile") {
      if (l.contains("beta") || l.contains("use_std")) throw ConfigError(lw + ": quantile LCB takes only b");
      a.lcb = EmpiricalQuantile{get_or<double>(l, "b", 1.0, lw)};
    } else if (kind == "parametric") {
      if (l.contains("b")) throw ConfigError(lw + ": parametric LCB takes beta and use_std");
      a.lcb = ParametricLcb{get_or<double>(l, "beta", 1.0, lw), get_or<bool>(l, "use_std", false, lw)};
    } else {
      throw ConfigError(lw + ": unknown kind '" + kind + "'");
    }
  }
  return a;
}

inline std::optional<FidelitySchedule> parse_fidelity(const json& j, const std::string& where) {
  check_keys(j, {"mode", "levels", "bootstrap_reps", "lcb_quantile"}, where);
  const auto mode = get_or<std::string>(j, "mode", "fixed", where);
  if (mode == "fixed") {
    if (j.size() > 1) throw ConfigError(where + ": fixed mode takes no other keys");
    return std::nullopt;
  }
  if (mode != "mf") throw ConfigError(where + ": unknown mode '" + mode + "'");
  FidelitySchedule s;
  s.fidelities = get_or<std::vector<std::size_t>>(j, "levels", s.fidelities, where);
  s.bootstrap_reps = get_count(j, "bootstrap_reps", s.bootstrap_reps, where);
  s.lcb_quantile = get_or<double>(j, "lcb_quantile", s.lcb_quantile, where);
  return s;
}

}  // namespace detail

inline BenchmarkConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  check_keys(j, {"name", "trials", "iterations", "n_init", "seed", "optimizer", "mh", "record_wall_time", "combine_rule",
                 "cells"},
             "config");
  BenchmarkConfig c;
  c.name = get_or<std::string>(j, "name", c.name, "config");
  c.trials = get_count(j, "trials", c.trials, "config");
  c.iterations = get_count(j, "iterations", c.iterations, "config");
  c.n_init = get_count(j, "n_init", c.n_init, "config");
  c.seed = Seed{get_or<std::uint64_t>(j, "seed", c.seed.value, "config")};
  c.record_wall_time = get_or<bool>(j, "record_wall_time", c.record_wall_time, "config");
  try {
    c.combine_rule = parse_combine_rule(get_or<std::string>(j, "combine_rule", "standard", "config"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, {"budget", "refine_rounds", "step_fraction", "halve_every"}, "optimizer");
    c.optimizer.budget = get_count(o, "budget", c.optimizer.budget, "optimizer");
    c.optimizer.refine_rounds = get_count(o, "refine_rounds", c.optimizer.refine_rounds, "optimizer");
    c.optimizer.step_fraction = get_or<double>(o, "step_fraction", c.optimizer.step_fraction, "optimizer");
    c.optimizer.halve_every = get_count(o, "halve_every", c.optimizer.halve_every, "optimizer");
  }
  if (j.contains("mh")) c.mh = parse_mh(j.at("mh"), c.mh, "mh");
  if (!j.contains("cells") || !j.at("cells").is_array()) throw ConfigError("config needs a cells array");
  std::size_t index = 0;
  for (const auto& cj : j.at("cells")) {
    const std::string where = "cells[" + std::to_string(index++) + "]";
    check_keys(cj, {"id", "system", "model", "acquisition", "fidelity", "model_options", "mh", "iterations"}, where);
    CellSpec cell;
    cell.id = get_or<std::string>(cj, "id", "cell" + std::to_string(index), where);
    if (!cj.contains("system") || !cj.contains("model") || !cj.contains("acquisition")) {
      throw ConfigError(where + " needs system, model and acquisition");
    }
    const auto& sj = cj.at("system");
    if (sj.is_string()) {
      cell.system.id = sj.get<std::string>();
    } else {
      if (!sj.is_object() || !sj.contains("id")) throw ConfigError(where + ".system needs an id");
      for (const auto& [k, v] : sj.items()) {
        if (k == "id") {
          cell.system.id = get_or<std::string>(sj, "id", "", where + ".system");
        } else if (v.is_number()) {
          cell.system.params[k] = v.get<double>();
        } else {
          throw ConfigError(where + ".system: parameter '" + k + "' must be a number");
        }
      }
    }
    const auto known = system_ids();
    if (std::find(known.begin(), known.end(), cell.system.id) == known.end()) {
      throw ConfigError(where + ": unknown system '" + cell.system.id + "'");
    }
    for (const auto& [k, v] : cell.system.params) {
      const auto allowed = system_params(cell.system.id);
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        throw ConfigError(where + ": system '" + cell.system.id + "' has no parameter '" + k + "'");
      }
    }
    cell.model = get_or<std::string>(cj, "model", "", where);
    if (!is_model_id(cell.model)) throw ConfigError(where + ": unknown model '" + cell.model + "'");
    cell.acquisition = parse_acquisition(cj.at("acquisition"), where + ".acquisition");
    if (cj.contains("fidelity")) cell.schedule = parse_fidelity(cj.at("fidelity"), where + ".fidelity");
    if (cell.schedule) cell.acquisition.fidelity = cell.schedule->top();
    if (cj.contains("model_options")) {
      const auto& mo = cj.at("model_options");
      check_keys(mo, {"components", "x_dependent_weights"}, where + ".model_options");
      for (const auto& [k, v] : mo.items()) {
        if (!v.is_number()) throw ConfigError(where + ".model_options: '" + k + "' must be a number");
        cell.model_options[k] = v.get<double>();
      }
    }
    if (cj.contains("mh")) cell.mh = parse_mh(cj.at("mh"), c.mh, where + ".mh");
    if (cj.contains("iterations")) cell.iterations = get_count(cj, "iterations", 0, where);
    try {
      cell.acquisition.validate();
      if (cell.schedule) {
        cell.schedule->validate();
        at_fidelity(cell.acquisition, cell.schedule->fidelities.front(), cell.schedule->top()).validate();
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    c.cells.push_back(std::move(cell));
  }
  c.validate();
  return c;
}

inline BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Running

/// Master seed of trial k; the same for every cell so that cells are paired.
inline Seed trial_seed(Seed master, std::size_t trial) { return derive_seed(master, {trial}); }

inline RunConfig cell_run_config(const BenchmarkConfig& cfg, const CellSpec& cell, std::size_t trial) {
  RunConfig rc;
  rc.iterations = cell.iterations.value_or(cfg.iterations);
  rc.n_init = cfg.n_init;
  rc.acquisition = cell.acquisition;
  rc.schedule = cell.schedule;
  rc.optimizer = cfg.optimizer;
  rc.seed = trial_seed(cfg.seed, trial);
  rc.record_wall_time = cfg.record_wall_time;
  return rc;
}

/// Builds a cell's system and model and runs one trial.
inline RunTrace run_cell_trial(const BenchmarkConfig& cfg, const CellSpec& cell, std::size_t trial) {
  const auto system = make_system(cell.system);
  ModelContext ctx{system->box(), cell.mh.value_or(cfg.mh), cell.model_options};
  const auto model = make_model(cell.model, ctx, cfg.combine_rule);
  return probo_run(cell_run_config(cfg, cell, trial), *system, *model).trace;
}

struct TrialOutcome {
  RunTrace trace;
  std::string error;  // empty on success
};

struct BenchResult {
  std::vector<std::vector<TrialOutcome>> cells;  // [cell][trial]

  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& c : cells) {
      for (const auto& t : c) n += t.error.empty() ? 0 : 1;
    }
    return n;
  }
};

struct BenchOptions {
  bool serial = false;
  std::size_t threads = 0;  // 0: VERSABO_THREADS or the hardware concurrency
};

inline std::size_t default_threads() {
  if (const char* env = std::getenv("VERSABO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::size_t max_dim(const BenchmarkConfig& cfg) {
  std::size_t d = 0;
  for (const auto& c : cfg.cells) d = std::max(d, make_system(c.system)->box().dim());
  return d;
}

inline std::string trace_header(std::size_t d) {
  std::string h = "cell_id,system,model,acq,fidelity_mode,trial,iter,best_f,observed_f";
  for (std::size_t j = 0; j < d; ++j) h += ",x" + std::to_string(j);
  h += ",post_calls,gen_calls,inf_calls,wall_ms";
  return h;
}

inline std::string trace_rows(const CellSpec& cell, std::size_t trial, const RunTrace& trace, std::size_t d) {
  std::string out;
  for (const auto& r : trace.iterations) {
    out += cell.id + "," + cell.system.id + "," + cell.model + "," + to_string(cell.acquisition.type) + "," +
           cell.fidelity_mode() + "," + std::to_string(trial) + "," + std::to_string(r.iteration) + "," +
           format_number(r.best_f) + "," + format_number(r.observed_f);
    for (std::size_t j = 0; j < d; ++j) out += "," + (j < r.x.dim() ? format_number(r.x[j]) : std::string());
    out += "," + std::to_string(r.cumulative.post) + "," + std::to_string(r.cumulative.gen) + "," +
           std::to_string(r.cumulative.infer) + "," + format_number(r.wall_ms) + "\n";
  }
  return out;
}

/// Per-cell, per-iteration mean and standard error (std / sqrt(trials)) of best_f.
inline std::string summary_csv(const BenchmarkConfig& cfg, const BenchResult& res) {
  std::string out = "cell_id,iter,trials,mean_best_f,se_best_f\n";
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    std::size_t iters = 0;
    for (const auto& t : res.cells[c]) iters = std::max(iters, t.trace.iterations.size());
    for (std::size_t i = 0; i < iters; ++i) {
      std::vector<double> v;
      for (const auto& t : res.cells[c]) {
        if (i < t.trace.iterations.size()) v.push_back(t.trace.iterations[i].best_f);
      }
      const double n = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
      out += cfg.cells[c].id + "," + std::to_string(i + 1) + "," + std::to_string(v.size()) + "," +
             format_number(mean) + "," + format_number(se) + "\n";
    }
  }
  return out;
}

/// Runs every (cell, trial) and writes trace.csv and summary.csv into out_dir.
/// Trials may run concurrently; rows are written in (cell, trial, iter)
/// order, each trial flushed as soon as all earlier ones are done. Trials
/// that fail keep their partial trace; the caller sees failures() > 0.
inline BenchResult run_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& out_dir,
                                 BenchOptions opts = {}) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const std::size_t d = max_dim(cfg);
  std::ofstream trace_out(out_dir / "trace.csv", std::ios::binary);
  if (!trace_out) throw Error("cannot write " + (out_dir / "trace.csv").string());
  trace_out << trace_header(d) << "\n";

  const std::size_t total = cfg.cells.size() * cfg.trials;
  BenchResult res;
  res.cells.assign(cfg.cells.size(), std::vector<TrialOutcome>(cfg.trials));
  std::vector<char> done(total, 0);
  std::mutex mu;
  std::condition_variable cv;

  const auto run_one = [&](std::size_t task) {
    const std::size_t c = task / cfg.trials, t = task % cfg.trials;
    TrialOutcome o;
    try {
      o.trace = run_cell_trial(cfg, cfg.cells[c], t);
    } catch (const RunError& e) {
      o.trace = e.partial();
      o.error = e.what();
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    std::lock_guard lock(mu);
    res.cells[c][t] = std::move(o);
    done[task] = 1;
    cv.notify_all();
  };
  const auto write_one = [&](std::size_t task) {
    const std::size_t c = task / cfg.trials, t = task % cfg.trials;
    trace_out << trace_rows(cfg.cells[c], t, res.cells[c][t].trace, d);
    trace_out.flush();
  };

  const std::size_t threads = opts.serial ? 1 : std::min(total, opts.threads ? opts.threads : default_threads());
  if (threads <= 1) {
    for (std::size_t task = 0; task < total; ++task) {
      run_one(task);
      write_one(task);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t task = next++; task < total; task = next++) run_one(task);
      });
    }
    for (std::size_t task = 0; task < total; ++task) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[task] != 0; });
      lock.unlock();
      write_one(task);
    }
  }
  if (!trace_out) throw Error("error writing trace.csv");

  std::ofstream summary(out_dir / "summary.csv", std::ios::binary);
  if (!summary) throw Error("cannot write " + (out_dir / "summary.csv").string());
  summary << summary_csv(cfg, res);
  if (!summary) throw Error("error writing summary.csv");
  return res;
}

}  // namespace versabo
