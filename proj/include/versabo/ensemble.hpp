#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/core.hpp"
#include "versabo/gp.hpp"

namespace versabo {

/// Acceptance test of the index chain in combine. `standard` accepts a
/// proposal when u < w_c / w_t (Metropolis); `as_printed` accepts when
/// u > w_c / w_t.
enum class CombineRule { standard, as_printed };

inline std::string to_string(CombineRule r) { return r == CombineRule::standard ? "standard" : "as-printed"; }

inline CombineRule parse_combine_rule(std::string_view s) {
  if (s == "standard") return CombineRule::standard;
  if (s == "as-printed" || s == "as_printed") return CombineRule::as_printed;
  throw Error("unknown combine rule '" + std::string(s) + "'");
}

inline double pair_mean(double y1, double y2) { return 0.5 * (y1 + y2); }

/// Standard deviation of the pair kernels at step i: their variance is i^{-1/2}.
inline double pair_bandwidth(std::size_t i) {
  if (i < 1) throw Error("pair weights need i >= 1");
  return std::pow(static_cast<double>(i), -0.25);
}

/// Standard deviation of the i-th emitted draw, i^{-1/2} / 2.
inline double emission_sd(std::size_t i) { return 0.5 / std::sqrt(static_cast<double>(i)); }

inline double log_pair_weight(double y1, double y2, std::size_t i) {
  const double h = pair_bandwidth(i);
  const double m = pair_mean(y1, y2);
  return normal_log_pdf(y1, m, h) + normal_log_pdf(y2, m, h);
}

/// w = N(y1 | ybar, i^{-1/2}) N(y2 | ybar, i^{-1/2}), second argument a variance.
inline double pair_weight(double y1, double y2, std::size_t i) { return std::exp(log_pair_weight(y1, y2, i)); }

namespace detail {

enum class CombineRole : std::uint64_t { init = 0, propose1 = 1, propose2 = 2, accept = 3, emit = 4 };

inline Rng combine_rng(Seed seed, std::size_t i, CombineRole role) {
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(role)}));
}

}  // namespace detail

/// Combines two sample sets into M draws from (approximately) the
/// normalized product of their densities, via an index chain over pairs.
inline std::vector<double> combine(std::span<const double> y1, std::span<const double> y2, Seed seed,
                                   CombineRule rule = CombineRule::standard) {
  using detail::CombineRole;
  using detail::combine_rng;
  if (y1.size() != y2.size()) throw DimensionMismatch("combine needs equal-length sample sets");
  if (y1.empty()) throw Error("combine needs M >= 1");
  const std::size_t m = y1.size();
  Rng init = combine_rng(seed, 0, CombineRole::init);
  std::size_t t1 = init.index(m), t2 = init.index(m);
  std::vector<double> out;
  out.reserve(m);
  for (std::size_t i = 1; i <= m; ++i) {
    Rng p1 = combine_rng(seed, i, CombineRole::propose1);
    Rng p2 = combine_rng(seed, i, CombineRole::propose2);
    Rng acc = combine_rng(seed, i, CombineRole::accept);
    const std::size_t c1 = p1.index(m), c2 = p2.index(m);
    const double u = acc.uniform();
    const double lw_c = log_pair_weight(y1[c1], y2[c2], i);
    const double lw_t = log_pair_weight(y1[t1], y2[t2], i);
    bool accept;
    if (lw_c == -std::numeric_limits<double>::infinity() && lw_t == -std::numeric_limits<double>::infinity()) {
      accept = true;  // 0/0
    } else {
      const double ratio = std::exp(lw_c - lw_t);
      accept = rule == CombineRule::standard ? u < ratio : u > ratio;
    }
    if (accept) {
      t1 = c1;
      t2 = c2;
    }
    Rng emit = combine_rng(seed, i, CombineRole::emit);
    out.push_back(pair_mean(y1[t1], y2[t2]) + emission_sd(i) * emit.normal());
  }
  return out;
}

/// Ensemble step: M draws from each constituent's predictive through its own
/// gen, using pre-drawn latent samples, then combine. gen_k is called as
/// gen_k(x, z_k[s], seed_k(m)) with s uniform over the M latent samples.
template <class Gen1, class Gen2>
std::vector<double> ensemble_gen(const Input& x, Gen1&& gen1, Gen2&& gen2, const std::vector<LatentSample>& z1,
                                 const std::vector<LatentSample>& z2, std::size_t m_draws, Seed seed,
                                 CombineRule rule = CombineRule::standard) {
  if (z1.empty() || z2.empty()) throw Error("ensemble needs non-empty latent sample sets");
  std::vector<double> y1(m_draws), y2(m_draws);
  for (std::size_t m = 1; m <= m_draws; ++m) {
    Rng pick(derive_seed(seed, {0, m}));
    const std::size_t s1 = pick.index(z1.size()), s2 = pick.index(z2.size());
    y1[m - 1] = gen1(x, z1[s1], derive_seed(seed, {1, m}));
    y2[m - 1] = gen2(x, z2[s2], derive_seed(seed, {2, m}));
    if (!std::isfinite(y1[m - 1]) || !std::isfinite(y2[m - 1])) throw NonFiniteDraw("non-finite draw in ensemble");
  }
  return combine(y1, y2, derive_seed(seed, {3}), rule);
}

namespace detail {

inline auto objective_gen(const Model& model, const ObjectiveFn& f) {
  return [&model, &f](const Input& x, const LatentSample& z, Seed s) { return f(model.gen(x, z, s)); };
}

}  // namespace detail

/// Bayesian product of experts over two models. Only the objective channel
/// is combined; the draws feed acquisitions like ordinary gen output.
class BpoeModel : public Model {
 public:
  BpoeModel(std::shared_ptr<const Model> a, std::shared_ptr<const Model> b, CombineRule rule = CombineRule::standard)
      : a_(std::move(a)), b_(std::move(b)), rule_(rule) {
    if (!a_ || !b_) throw Error("BPoE needs two constituent models");
  }

  std::string id() const override { return "bpoe:" + a_->id() + "+" + b_->id(); }
  CombineRule rule() const { return rule_; }
  const Model& first() const { return *a_; }
  const Model& second() const { return *b_; }

  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    ProductPosterior p;
    p.factors.push_back(a_->infer(data, derive_seed(seed, {1})));
    p.factors.push_back(b_->infer(data, derive_seed(seed, {2})));
    return PosteriorHandle(std::move(p));
  }

  LatentSample post(const PosteriorHandle& handle, Seed s) const override {
    const auto& f = factors(handle);
    std::vector<LatentSample> parts{a_->post(f[0], derive_seed(s, {1})), b_->post(f[1], derive_seed(s, {2}))};
    return LatentSample(std::make_shared<const ProductLatent>(std::move(parts)));
  }

  /// One combined draw (combine at M = 1).
  Observation gen(const Input& x, const LatentSample& z, Seed s) const override {
    const auto& parts = z.as<ProductLatent>().parts;
    const ObjectiveFn f = objective_of;
    const auto y = ensemble_gen(x, detail::objective_gen(*a_, f), detail::objective_gen(*b_, f), {parts.at(0)},
                                {parts.at(1)}, 1, derive_seed(s, Stream::gen), rule_);
    return Observation{y[0], {}};
  }

  DrawBatch predictive_draws(const PosteriorHandle& handle, const Input& x, std::size_t m_draws, Seed seed_base,
                             const ObjectiveFn& f = objective_of) const override {
    const auto& fac = factors(handle);
    std::vector<LatentSample> z1, z2;
    z1.reserve(m_draws);
    z2.reserve(m_draws);
    for (std::size_t m = 1; m <= m_draws; ++m) {
      z1.push_back(a_->post(fac[0], derive_seed(seed_base, {1, m})));
      z2.push_back(b_->post(fac[1], derive_seed(seed_base, {2, m})));
    }
    DrawBatch out;
    out.objectives = ensemble_gen(x, detail::objective_gen(*a_, f), detail::objective_gen(*b_, f), z1, z2, m_draws,
                                  derive_seed(seed_base, {3}), rule_);
    out.calls.post = 2 * m_draws;
    out.calls.gen = 2 * m_draws;
    return out;
  }

  DrawBatch conditional_draws(const LatentSample& z, const Input& x, std::size_t m_draws, Seed seed_base,
                              const ObjectiveFn& f = objective_of) const override {
    const auto& parts = z.as<ProductLatent>().parts;
    DrawBatch out;
    out.objectives = ensemble_gen(x, detail::objective_gen(*a_, f), detail::objective_gen(*b_, f), {parts.at(0)},
                                  {parts.at(1)}, m_draws, derive_seed(seed_base, {3}), rule_);
    out.calls.gen = 2 * m_draws;
    return out;
  }

 private:
  static const std::vector<PosteriorHandle>& factors(const PosteriorHandle& handle) {
    const auto* p = handle.product();
    if (p == nullptr || p->factors.size() != 2) throw Error("BPoE needs a two-factor product posterior");
    return p->factors;
  }

  std::shared_ptr<const Model> a_;
  std::shared_ptr<const Model> b_;
  CombineRule rule_;
};

}  // namespace versabo
