#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace versabo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  EmptyDataset()
      : Error("dataset is empty; seed the BO loop with initial observations") {}
};

class NonFiniteDraw : public Error {
 public:
  using Error::Error;
};

class InferenceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeds and random streams

struct Seed {
  std::uint64_t value = 0;
  friend constexpr auto operator<=>(const Seed&, const Seed&) = default;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Mixes a master seed with an ordered list of stream labels. Pure: equal
/// inputs give equal seeds, and the label count participates in the hash so
/// that [] , [0] and [0, 0] are distinct streams.
inline constexpr Seed derive_seed(Seed master, std::span<const std::uint64_t> labels) {
  std::uint64_t h = detail::mix64(master.value + detail::kGolden);
  std::uint64_t position = 1;
  for (std::uint64_t label : labels) {
    h = detail::mix64(h ^ detail::mix64(label + position * detail::kGolden));
    ++position;
  }
  return Seed{detail::mix64(h + position)};
}

inline constexpr Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> labels) {
  return derive_seed(master, std::span<const std::uint64_t>(labels.begin(), labels.size()));
}

/// Labels that separate the internal random streams of post and gen when both
/// receive the same seed (Algs. EI/PI/UCB pass s_m to both).
enum class Stream : std::uint64_t {
  post = 0x706f7374ULL,
  gen = 0x67656eULL,
  infer = 0x696e666572ULL,
  init = 0x696e6974ULL,
  observe = 0x6f6273ULL,
  optimizer = 0x6f7074ULL,
  bootstrap = 0x626f6f74ULL,
  fidelity = 0x666964ULL,
};

inline constexpr Seed derive_seed(Seed master, Stream stream) {
  return derive_seed(master, {static_cast<std::uint64_t>(stream)});
}

/// Counter-based 64-bit generator; cheap to construct per seed, which is what
/// post and gen do on every call.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(Seed seed) : state_(seed.value) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    std::normal_distribution<double> dist;
    return dist(*this);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(*this);
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Inputs, observations, datasets

class Input {
 public:
  Input() = default;

  explicit Input(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw DimensionMismatch("input must have at least one coordinate");
    for (double c : coords_) {
      if (!std::isfinite(c)) throw Error("input coordinates must be finite");
    }
  }

  Input(std::initializer_list<double> coords) : Input(std::vector<double>(coords)) {}

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& vector() const { return coords_; }

  friend bool operator==(const Input&, const Input&) = default;

 private:
  std::vector<double> coords_;
};

struct Observation {
  double objective = 0.0;
  // Extra named outputs of a system (state label, task index, audit flags).
  std::map<std::string, double, std::less<>> aux;

  double aux_or(std::string_view key, double fallback) const {
    auto it = aux.find(key);
    return it == aux.end() ? fallback : it->second;
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// f(y) for every shipped system.
inline double objective_of(const Observation& y) { return y.objective; }

using ObjectiveFn = std::function<double(const Observation&)>;

class Dataset {
 public:
  struct Entry {
    Input x;
    Observation y;
  };

  Dataset() = default;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// 0 until the first pair is appended.
  std::size_t dim() const { return entries_.empty() ? 0 : entries_.front().x.dim(); }

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  Dataset appended(Input x, Observation y) const {
    if (!entries_.empty() && x.dim() != dim()) {
      throw DimensionMismatch("input dimension " + std::to_string(x.dim()) +
                              " does not match dataset dimension " + std::to_string(dim()));
    }
    Dataset out = *this;
    out.entries_.push_back({std::move(x), std::move(y)});
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

inline Dataset dataset_append(const Dataset& data, Input x, Observation y) {
  return data.appended(std::move(x), std::move(y));
}

inline double f_min(const Dataset& data, const ObjectiveFn& f = objective_of) {
  if (data.empty()) throw EmptyDataset();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : data) best = std::min(best, f(e.y));
  return best;
}

// ---------------------------------------------------------------------------
// Latent samples and posterior handles

using NamedValues = std::map<std::string, std::vector<double>, std::less<>>;

/// Model-specific latent state z. Implementations may carry derived,
/// precomputed quantities (e.g. a GP factorization) next to the latent values.
class LatentState {
 public:
  virtual ~LatentState() = default;
  virtual NamedValues values() const = 0;
};

struct NamedLatent final : LatentState {
  explicit NamedLatent(NamedValues v) : named(std::move(v)) {}
  NamedValues values() const override { return named; }
  double scalar(std::string_view key) const { return named.find(key)->second.at(0); }
  NamedValues named;
};

class LatentSample {
 public:
  LatentSample() = default;
  explicit LatentSample(std::shared_ptr<const LatentState> state) : state_(std::move(state)) {}

  static LatentSample from_values(NamedValues v) {
    return LatentSample(std::make_shared<const NamedLatent>(std::move(v)));
  }

  template <class T>
  const T& as() const {
    const auto* p = dynamic_cast<const T*>(state_.get());
    if (p == nullptr) throw Error("latent sample does not belong to this model");
    return *p;
  }

  NamedValues values() const { return state_ ? state_->values() : NamedValues{}; }
  bool empty() const { return state_ == nullptr; }
  const LatentState* get() const { return state_.get(); }

 private:
  std::shared_ptr<const LatentState> state_;
};

struct ProductLatent final : LatentState {
  explicit ProductLatent(std::vector<LatentSample> p) : parts(std::move(p)) {}
  NamedValues values() const override {
    NamedValues out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      for (auto& [name, v] : parts[k].values()) out["expert" + std::to_string(k + 1) + "." + name] = v;
    }
    return out;
  }
  std::vector<LatentSample> parts;
};

class PosteriorHandle;

/// MCMC representation: post(s) draws uniformly from the pool.
struct SamplePool {
  std::vector<LatentSample> samples;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
};

/// VI / exact representation: post(s) draws from a parametric distribution.
struct ParametricPosterior {
  NamedValues parameters;
  std::function<LatentSample(Seed)> draw;
};

/// Independent posteriors of the experts of an ensemble.
struct ProductPosterior {
  std::vector<PosteriorHandle> factors;
};

class PosteriorHandle {
 public:
  using Representation = std::variant<SamplePool, ParametricPosterior, ProductPosterior>;

  PosteriorHandle() = default;

  explicit PosteriorHandle(SamplePool pool) {
    if (pool.samples.empty()) throw InferenceError("sample pool must be non-empty");
    rep_ = std::make_shared<const Representation>(std::move(pool));
  }
  explicit PosteriorHandle(ParametricPosterior p) {
    if (!p.draw) throw InferenceError("parametric posterior needs a sampler");
    rep_ = std::make_shared<const Representation>(std::move(p));
  }
  explicit PosteriorHandle(ProductPosterior p) {
    rep_ = std::make_shared<const Representation>(std::move(p));
  }

  bool valid() const { return rep_ != nullptr; }
  const Representation& representation() const { return *rep_; }

  const SamplePool* pool() const { return rep_ ? std::get_if<SamplePool>(rep_.get()) : nullptr; }
  const ParametricPosterior* parametric() const {
    return rep_ ? std::get_if<ParametricPosterior>(rep_.get()) : nullptr;
  }
  const ProductPosterior* product() const {
    return rep_ ? std::get_if<ProductPosterior>(rep_.get()) : nullptr;
  }

 private:
  std::shared_ptr<const Representation> rep_;
};

/// The generic post operation.
inline LatentSample sample_posterior(const PosteriorHandle& handle, Seed s) {
  if (!handle.valid()) throw Error("post called on an empty posterior handle");
  const Seed stream = derive_seed(s, Stream::post);
  return std::visit(
      [&](const auto& rep) -> LatentSample {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, SamplePool>) {
          Rng rng(stream);
          return rep.samples[rng.index(rep.samples.size())];
        } else if constexpr (std::is_same_v<T, ParametricPosterior>) {
          return rep.draw(stream);
        } else {
          std::vector<LatentSample> parts;
          parts.reserve(rep.factors.size());
          for (std::size_t k = 0; k < rep.factors.size(); ++k) {
            parts.push_back(sample_posterior(rep.factors[k], derive_seed(s, {k + 1})));
          }
          return LatentSample(std::make_shared<const ProductLatent>(std::move(parts)));
        }
      },
      handle.representation());
}

// ---------------------------------------------------------------------------
// Draw batches: the post/gen loops shared by every acquisition

struct CallCounts {
  std::size_t infer = 0;
  std::size_t post = 0;
  std::size_t gen = 0;

  CallCounts& operator+=(const CallCounts& o) {
    infer += o.infer;
    post += o.post;
    gen += o.gen;
    return *this;
  }
  friend CallCounts operator+(CallCounts a, const CallCounts& b) { return a += b; }
  friend bool operator==(const CallCounts&, const CallCounts&) = default;
};

/// M objective values f(y_m) and the calls spent producing them.
struct DrawBatch {
  std::vector<double> objectives;
  CallCounts calls;
};

inline double checked_objective(const ObjectiveFn& f, const Observation& y) {
  const double v = f(y);
  if (!std::isfinite(v)) throw NonFiniteDraw("non-finite objective in a predictive draw");
  return v;
}

/// z_m = post(s_m), y_m = gen(x, z_m, s_m), s_m = derive_seed(seed_base, [m]).
template <class PostFn, class GenFn>
DrawBatch draw_predictive(const Input& x, PostFn&& post, GenFn&& gen, std::size_t m_draws,
                          Seed seed_base, const ObjectiveFn& f = objective_of) {
  DrawBatch out;
  out.objectives.reserve(m_draws);
  for (std::size_t m = 1; m <= m_draws; ++m) {
    const Seed s = derive_seed(seed_base, {m});
    auto z = post(s);
    out.objectives.push_back(checked_objective(f, gen(x, z, s)));
  }
  out.calls.post = m_draws;
  out.calls.gen = m_draws;
  return out;
}

/// y_m = gen(x, z, s_m) for a fixed latent z (the Thompson-sampling loop).
template <class Latent, class GenFn>
DrawBatch draw_conditional(const Input& x, const Latent& z, GenFn&& gen, std::size_t m_draws,
                           Seed seed_base, const ObjectiveFn& f = objective_of) {
  DrawBatch out;
  out.objectives.reserve(m_draws);
  for (std::size_t m = 1; m <= m_draws; ++m) {
    out.objectives.push_back(checked_objective(f, gen(x, z, derive_seed(seed_base, {m}))));
  }
  out.calls.gen = m_draws;
  return out;
}

// ---------------------------------------------------------------------------
// The three-operation model contract

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string id() const = 0;

  /// Runs inference on the data. The seed makes stochastic back-ends (MCMC)
  /// reproducible.
  virtual PosteriorHandle infer(const Dataset& data, Seed seed) const = 0;

  virtual LatentSample post(const PosteriorHandle& handle, Seed s) const {
    return sample_posterior(handle, s);
  }

  virtual Observation gen(const Input& x, const LatentSample& z, Seed s) const = 0;

  /// M draws from the posterior predictive at x. Ensembles override this to
  /// swap in their combination step.
  virtual DrawBatch predictive_draws(const PosteriorHandle& handle, const Input& x,
                                     std::size_t m_draws, Seed seed_base,
                                     const ObjectiveFn& f = objective_of) const {
    return draw_predictive(
        x, [&](Seed s) { return post(handle, s); },
        [&](const Input& xx, const LatentSample& z, Seed s) { return gen(xx, z, s); }, m_draws,
        seed_base, f);
  }

  /// M draws from p(y | z; x) for one fixed latent sample.
  virtual DrawBatch conditional_draws(const LatentSample& z, const Input& x, std::size_t m_draws,
                                      Seed seed_base, const ObjectiveFn& f = objective_of) const {
    return draw_conditional(
        x, z, [&](const Input& xx, const LatentSample& zz, Seed s) { return gen(xx, zz, s); },
        m_draws, seed_base, f);
  }
};

}  // namespace versabo
