#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/models/gp_model.hpp"

namespace versabo {

struct SwitchPriors {
  double weight_sd = 2.0;
  double mean2_sd = 3.0;
  double log_var2_center = -4.0;
  double log_var2_sd = 2.0;
};

/// Polynomial classifier features (1, u_j, u_j^2) with u in [-1, 1]^d.
inline std::vector<double> switch_features(const SearchBox& box, std::span<const double> x) {
  std::vector<double> phi{1.0};
  for (std::size_t j = 0; j < box.dim(); ++j) {
    const double u = 2.0 * (x[j] - box[j].lo) / box[j].width() - 1.0;
    phi.push_back(u);
    phi.push_back(u * u);
  }
  return phi;
}

inline std::size_t switch_feature_count(std::size_t d) { return 1 + 2 * d; }

struct SwitchLatent final : LatentState {
  std::vector<double> weights;       // classifier coefficients
  std::shared_ptr<const GpLatent> gp;  // component 1
  double mean2 = 0.0;                // component 2, objective units
  double sd2 = 1.0;

  NamedValues values() const override {
    NamedValues v = gp->values();
    v["classifier"] = weights;
    v["mean2"] = {mean2};
    v["sd2"] = {sd2};
    return v;
  }

  double p1(const SearchBox& box, std::span<const double> x) const {
    const auto phi = switch_features(box, x);
    double t = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) t += weights[k] * phi[k];
    return logistic(t);
  }
};

/// Input-dependent mixture: a logistic classifier picks between a GP
/// component (state 1) and a Gaussian component (state 0).
class SwitchingModel : public ZooModel {
 public:
  explicit SwitchingModel(ModelContext ctx, GpPriors gp_priors = {}, SwitchPriors priors = {})
      : ctx_(std::move(ctx)), gp_priors_(gp_priors), priors_(priors) {}

  std::string id() const override { return "switching"; }

  /// Observations without a state label count as state 1. Given the labels
  /// the posterior factorizes over classifier, GP and Gaussian component,
  /// so three independent chains run and their pools are zipped.
  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    const std::size_t d = ctx_.box.dim();
    std::vector<std::vector<double>> phi;
    std::vector<int> state;
    std::vector<std::vector<double>> u1;
    std::vector<double> y1, y2;
    for (const auto& e : data) {
      if (e.x.dim() != d) throw DimensionMismatch("dataset input dimension does not match the model box");
      const int c = e.y.aux_or("state", 1.0) != 0.0 ? 1 : 0;
      phi.push_back(switch_features(ctx_.box, e.x.coords()));
      state.push_back(c);
      if (c == 1) {
        u1.push_back(ctx_.box.normalize(e.x.coords()));
        y1.push_back(e.y.objective);
      } else {
        y2.push_back(e.y.objective);
      }
    }
    std::vector<double> all_y = y1;
    all_y.insert(all_y.end(), y2.begin(), y2.end());
    const Standardizer st = Standardizer::fit(y1.size() >= 2 ? y1 : all_y);

    const std::size_t nw = switch_feature_count(d);
    MhConfig cls_cfg = ctx_.mh;
    if (cls_cfg.initial_scales.empty()) cls_cfg.initial_scales.assign(nw, 0.3);
    const LogTarget cls_target = [&](std::span<const double> w) {
      double lp = 0.0;
      for (double v : w) lp += normal_log_pdf(v, 0.0, priors_.weight_sd);
      for (std::size_t i = 0; i < phi.size(); ++i) {
        double t = 0.0;
        for (std::size_t k = 0; k < nw; ++k) t += w[k] * phi[i][k];
        lp += state[i] == 1 ? log_logistic(t) : log_logistic(-t);
      }
      return lp;
    };
    const MhChain cls = mh_sample(cls_target, std::vector<double>(nw, 0.0), cls_cfg, derive_seed(seed, {1}));

    const Eigen::VectorXd ys1 = standardized(y1, st);
    const MhChain gp = gp_hyper_chain(u1, ys1, gp_priors_, ctx_.mh, derive_seed(seed, {2}), d);

    std::vector<double> ys2;
    for (double v : y2) ys2.push_back(st.to(v));
    MhConfig g_cfg = ctx_.mh;
    if (g_cfg.initial_scales.empty()) g_cfg.initial_scales.assign(2, 0.3);
    const LogTarget g_target = [&](std::span<const double> p) {
      double lp = normal_log_pdf(p[0], 0.0, priors_.mean2_sd) +
                  normal_log_pdf(p[1], priors_.log_var2_center, priors_.log_var2_sd);
      const double sd = std::exp(0.5 * p[1]);
      for (double v : ys2) lp += normal_log_pdf(v, p[0], sd);
      return lp;
    };
    const MhChain g2 = mh_sample(g_target, {0.0, priors_.log_var2_center}, g_cfg, derive_seed(seed, {3}));

    const std::size_t n = std::min({cls.pool.size(), gp.pool.size(), g2.pool.size()});
    SamplePool pool;
    pool.acceptance_rate = (cls.acceptance_rate + gp.acceptance_rate + g2.acceptance_rate) / 3.0;
    std::shared_ptr<const GpLatent> last_gp;
    for (std::size_t i = 0; i < n; ++i) {
      if (!last_gp || gp.pool[i] != gp.pool[i - 1]) {
        last_gp = std::make_shared<const GpLatent>(
            std::make_shared<const GpPredictor>(u1, ys1, GpHyper::unpack(gp.pool[i], d)), st);
      }
      auto z = std::make_shared<SwitchLatent>();
      z->weights = cls.pool[i];
      z->gp = last_gp;
      z->mean2 = st.from(g2.pool[i][0]);
      z->sd2 = st.scale * std::exp(0.5 * g2.pool[i][1]);
      pool.samples.emplace_back(std::move(z));
    }
    return PosteriorHandle(std::move(pool));
  }

  Observation gen(const Input& x, const LatentSample& zs, Seed s) const override {
    const auto& z = zs.as<SwitchLatent>();
    Rng rng(derive_seed(s, Stream::gen));
    const bool c1 = rng.uniform() < z.p1(ctx_.box, x.coords());
    Observation y;
    if (c1) {
      const auto p = z.gp->predictive(ctx_.box.normalize(x.coords()));
      y.objective = p.mean + p.sd() * rng.normal();
    } else {
      y.objective = z.mean2 + z.sd2 * rng.normal();
    }
    y.aux["state"] = c1 ? 1.0 : 0.0;
    return y;
  }

  Law conditional_law(const Input& x, const LatentSample& zs) const override {
    const auto& z = zs.as<SwitchLatent>();
    const double p1 = z.p1(ctx_.box, x.coords());
    const auto p = z.gp->predictive(ctx_.box.normalize(x.coords()));
    return {LawComponent::normal(p.mean, p.sd(), p1), LawComponent::normal(z.mean2, z.sd2, 1.0 - p1)};
  }

  const SearchBox& box() const { return ctx_.box; }

 private:
  ModelContext ctx_;
  GpPriors gp_priors_;
  SwitchPriors priors_;
};

}  // namespace versabo
