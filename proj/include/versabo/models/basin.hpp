#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "versabo/gp.hpp"
#include "versabo/models/zoo_model.hpp"

namespace versabo {

/// R(x; a, b) = a'ReLU(x) + b'ReLU(-x).
inline double basin_R(std::span<const double> x, std::span<const double> a, std::span<const double> b) {
  if (x.size() != a.size() || x.size() != b.size()) throw DimensionMismatch("basin_R: dimensions disagree");
  double r = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) r += a[j] * std::max(x[j], 0.0) + b[j] * std::max(-x[j], 0.0);
  return r;
}

struct BasinParams {
  std::vector<double> mu;
  std::vector<double> a;
  std::vector<double> b;
  double c = 0.0;
  double sigma2 = 1.0;

  double mean_at(std::span<const double> x) const {
    std::vector<double> dx(x.begin(), x.end());
    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] -= mu[j];
    return basin_R(dx, a, b) + c;
  }
};

struct BasinPriors {
  double log_slope_sd = 1.0;
  double offset_sd = 1.0;
  double var_shape = 2.0;  // inverse-gamma prior on sigma^2
  double var_scale = 0.1;
};

/// Latent parameters in normalized units (x in [0,1]^d, standardized y).
struct BasinLatent final : LatentState {
  BasinParams params;
  Standardizer standardizer;

  NamedValues values() const override {
    return {{"mu", params.mu}, {"a", params.a}, {"b", params.b}, {"c", {params.c}}, {"sigma2", {params.sigma2}}};
  }
};

/// V-shaped parametric regression y ~ N(R(x - mu; a, b) + c, sigma^2).
class BasinModel : public ZooModel {
 public:
  explicit BasinModel(ModelContext ctx, BasinPriors priors = {}) : ctx_(std::move(ctx)), priors_(priors) {}

  std::string id() const override { return "basin"; }

  // packed: mu (d), log a (d), log b (d), c, log sigma2
  static BasinParams unpack(std::span<const double> p, std::size_t d) {
    BasinParams bp;
    for (std::size_t j = 0; j < d; ++j) {
      bp.mu.push_back(p[j]);
      bp.a.push_back(std::exp(p[d + j]));
      bp.b.push_back(std::exp(p[2 * d + j]));
    }
    bp.c = p[3 * d];
    bp.sigma2 = std::exp(p[3 * d + 1]);
    return bp;
  }

  /// Gibbs sweep: random-walk Metropolis on (mu, log a, log b, c) given
  /// sigma^2, then an exact inverse-gamma draw of sigma^2 given the rest.
  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    const std::size_t d = ctx_.box.dim();
    const std::size_t nb = 3 * d + 1;
    const DesignData dd = design_data(data, ctx_.box);
    const Standardizer st = Standardizer::fit(dd.y);
    const Eigen::VectorXd ys = standardized(dd.y, st);
    const MhConfig& cfg = ctx_.mh;
    cfg.validate();

    std::vector<double> full(nb + 1, 0.0);
    const auto ssr = [&](std::span<const double> q) {
      std::copy(q.begin(), q.end(), full.begin());
      const BasinParams bp = unpack(full, d);
      double s = 0.0;
      for (std::size_t i = 0; i < dd.u.size(); ++i) {
        const double r = ys[static_cast<Eigen::Index>(i)] - bp.mean_at(dd.u[i]);
        s += r * r;
      }
      return s;
    };
    double sigma2 = priors_.var_scale / (priors_.var_shape + 1.0);
    const double n = static_cast<double>(dd.u.size());
    const LogTarget target = [&](std::span<const double> q) {
      double lp = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (q[j] < 0.0 || q[j] > 1.0) return -std::numeric_limits<double>::infinity();
        lp += normal_log_pdf(q[d + j], 0.0, priors_.log_slope_sd) +
              normal_log_pdf(q[2 * d + j], 0.0, priors_.log_slope_sd);
      }
      lp += normal_log_pdf(q[3 * d], 0.0, priors_.offset_sd);
      return lp - 0.5 * ssr(q) / sigma2 - 0.5 * n * std::log(sigma2);
    };

    std::vector<double> init(nb, 0.0);
    for (std::size_t j = 0; j < d; ++j) init[j] = 0.5;
    if (!dd.u.empty()) {
      Eigen::Index best;
      ys.minCoeff(&best);
      for (std::size_t j = 0; j < d; ++j) init[j] = dd.u[static_cast<std::size_t>(best)][j];
      init[3 * d] = ys[best];
    }
    const double lp0 = target(init);
    if (!std::isfinite(lp0)) throw InferenceError("basin: log target is not finite at the initial state");

    std::vector<double> scales = cfg.initial_scales;
    if (scales.empty()) {
      scales.assign(nb, 0.2);
      for (std::size_t j = 0; j < d; ++j) scales[j] = 0.05;
    }
    AdaptiveMetropolis kernel(init, lp0, scales, cfg.target_acceptance);
    Rng rng(seed);
    const std::size_t burn = cfg.burn_in_steps();
    std::vector<std::vector<double>> states;
    std::size_t accepted = 0, post_accepted = 0;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      const bool acc = kernel.step(target, rng);
      accepted += acc ? 1 : 0;
      const std::vector<double> q = kernel.state();
      std::gamma_distribution<double> g(priors_.var_shape + 0.5 * n, 1.0 / (priors_.var_scale + 0.5 * ssr(q)));
      sigma2 = 1.0 / g(rng);
      kernel.set_state(q, target(q));
      if (t < burn) {
        kernel.adapt(acc, t, burn);
      } else {
        post_accepted += acc ? 1 : 0;
        if ((t - burn) % cfg.thin == 0) {
          std::vector<double> s = q;
          s.push_back(std::log(sigma2));
          states.push_back(std::move(s));
        }
      }
    }
    if (accepted == 0) throw InferenceError("basin: no proposal was accepted (degenerate target)");
    subsample_pool(states, cfg.pool_cap, rng);
    const double rate = static_cast<double>(post_accepted) / static_cast<double>(cfg.steps - burn);
    return pool_handle(states, rate, [&](std::span<const double> p) {
      auto z = std::make_shared<BasinLatent>();
      z->params = unpack(p, d);
      z->standardizer = st;
      return LatentSample(std::move(z));
    });
  }

  Observation gen(const Input& x, const LatentSample& zs, Seed s) const override {
    const auto& z = zs.as<BasinLatent>();
    Rng rng(derive_seed(s, Stream::gen));
    const double v = z.params.mean_at(ctx_.box.normalize(x.coords())) + std::sqrt(z.params.sigma2) * rng.normal();
    return Observation{z.standardizer.from(v), {}};
  }

  Law conditional_law(const Input& x, const LatentSample& zs) const override {
    const auto& z = zs.as<BasinLatent>();
    const double m = z.standardizer.from(z.params.mean_at(ctx_.box.normalize(x.coords())));
    return {LawComponent::normal(m, z.standardizer.scale * std::sqrt(z.params.sigma2))};
  }

 private:
  ModelContext ctx_;
  BasinPriors priors_;
};

}  // namespace versabo
