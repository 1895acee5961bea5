#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/gp.hpp"
#include "versabo/models/zoo_model.hpp"

namespace versabo {

/// logistic(x; m, s, mu) = m / (1 + exp(-s (x - mu))).
inline double phase_logistic(double x, double m, double s, double mu) { return m * logistic(s * (x - mu)); }

struct PhaseComponent {
  double m = 0.0;
  double s = 1.0;
  double mu = 0.0;
  double b = 0.0;
};

struct PhaseShiftParams {
  std::vector<PhaseComponent> components;
  double sigma2 = 1.0;

  double mean_at(double x) const {
    double y = 0.0;
    for (const auto& c : components) y += phase_logistic(x, c.m, c.s, c.mu) + c.b;
    return y;
  }
};

struct PhaseShiftPriors {
  double m_sd = 2.0;
  double b_sd = 2.0;
  double log_s_center = 1.0;
  double log_s_sd = 0.5;
  double log_var_center = -2.0;
  double log_var_sd = 1.0;
};

/// Parameters in raw x units and standardized y units.
struct PhaseShiftLatent final : LatentState {
  PhaseShiftParams params;
  Standardizer standardizer;

  NamedValues values() const override {
    NamedValues v{{"sigma2", {params.sigma2}}};
    for (std::size_t k = 0; k < params.components.size(); ++k) {
      const auto& c = params.components[k];
      v["component" + std::to_string(k + 1)] = {c.m, c.s, c.mu, c.b};
    }
    return v;
  }
};

/// Sum of K logistic steps with offsets, plus Gaussian noise; 1-d inputs.
class PhaseShiftModel : public ZooModel {
 public:
  explicit PhaseShiftModel(ModelContext ctx, std::size_t components = 2, PhaseShiftPriors priors = {})
      : ctx_(std::move(ctx)), k_(components), priors_(priors) {
    if (ctx_.box.dim() != 1) throw DimensionMismatch("phase-shift model is one-dimensional");
    if (k_ < 1) throw Error("phase-shift model needs K >= 1");
  }

  std::string id() const override { return "phaseshift"; }

  // packed: per component (m, log s, mu, b), then log sigma2
  PhaseShiftParams unpack(std::span<const double> v) const {
    PhaseShiftParams p;
    for (std::size_t k = 0; k < k_; ++k) p.components.push_back({v[4 * k], std::exp(v[4 * k + 1]), v[4 * k + 2], v[4 * k + 3]});
    p.sigma2 = std::exp(v[4 * k_]);
    return p;
  }

  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    const Interval box = ctx_.box[0];
    std::vector<double> xs, y;
    for (const auto& e : data) {
      if (e.x.dim() != 1) throw DimensionMismatch("phase-shift model is one-dimensional");
      xs.push_back(e.x[0]);
      y.push_back(e.y.objective);
    }
    const Standardizer st = Standardizer::fit(y);
    const LogTarget target = [&](std::span<const double> v) {
      double lp = 0.0;
      for (std::size_t k = 0; k < k_; ++k) {
        if (v[4 * k + 2] < box.lo || v[4 * k + 2] > box.hi) return -std::numeric_limits<double>::infinity();
        lp += normal_log_pdf(v[4 * k], 0.0, priors_.m_sd) + normal_log_pdf(v[4 * k + 1], priors_.log_s_center, priors_.log_s_sd) +
              normal_log_pdf(v[4 * k + 3], 0.0, priors_.b_sd);
      }
      lp += normal_log_pdf(v[4 * k_], priors_.log_var_center, priors_.log_var_sd);
      const PhaseShiftParams p = unpack(v);
      const double sd = std::sqrt(p.sigma2);
      for (std::size_t i = 0; i < xs.size(); ++i) lp += normal_log_pdf(st.to(y[i]), p.mean_at(xs[i]), sd);
      return lp;
    };
    std::vector<double> init(4 * k_ + 1, 0.0);
    for (std::size_t k = 0; k < k_; ++k) {
      init[4 * k + 1] = priors_.log_s_center;
      init[4 * k + 2] = box.lo + box.width() * static_cast<double>(k + 1) / static_cast<double>(k_ + 1);
    }
    init[4 * k_] = priors_.log_var_center;
    MhConfig cfg = ctx_.mh;
    if (cfg.initial_scales.empty()) {
      cfg.initial_scales.assign(4 * k_ + 1, 0.2);
      for (std::size_t k = 0; k < k_; ++k) cfg.initial_scales[4 * k + 2] = 0.05 * box.width();
    }
    return mh_infer(target, std::move(init), cfg, seed, [&](std::span<const double> v) {
      auto z = std::make_shared<PhaseShiftLatent>();
      z->params = unpack(v);
      z->standardizer = st;
      return LatentSample(std::move(z));
    });
  }

  Observation gen(const Input& x, const LatentSample& zs, Seed s) const override {
    const auto& z = zs.as<PhaseShiftLatent>();
    Rng rng(derive_seed(s, Stream::gen));
    return Observation{z.standardizer.from(z.params.mean_at(x[0]) + std::sqrt(z.params.sigma2) * rng.normal()), {}};
  }

  Law conditional_law(const Input& x, const LatentSample& zs) const override {
    const auto& z = zs.as<PhaseShiftLatent>();
    return {LawComponent::normal(z.standardizer.from(z.params.mean_at(x[0])),
                                 z.standardizer.scale * std::sqrt(z.params.sigma2))};
  }

 private:
  ModelContext ctx_;
  std::size_t k_;
  PhaseShiftPriors priors_;
};

}  // namespace versabo
