#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/gp.hpp"
#include "versabo/models/zoo_model.hpp"

namespace versabo {

struct GpLatent final : LatentState {
  GpLatent(std::shared_ptr<const GpPredictor> p, Standardizer s) : predictor(std::move(p)), standardizer(s) {}
  NamedValues values() const override { return predictor->hyper().named(); }

  /// Latent mean, latent variance and noise variance at u, in objective units.
  struct Predictive {
    double mean = 0.0;
    double latent_var = 0.0;
    double noise_var = 0.0;
    double sd() const { return std::sqrt(latent_var + noise_var); }
  };

  Predictive predictive(std::span<const double> u) const {
    const auto m = predictor->latent(u);
    const double s2 = standardizer.scale * standardizer.scale;
    return {standardizer.from(m.mean), s2 * m.var, s2 * predictor->noise_var()};
  }

  std::shared_ptr<const GpPredictor> predictor;
  Standardizer standardizer;
};

/// Runs the hyperparameter chain of a GP on (u, standardized y).
inline MhChain gp_hyper_chain(const std::vector<std::vector<double>>& u, const Eigen::VectorXd& y,
                              const GpPriors& priors, MhConfig cfg, Seed seed, std::size_t d) {
  if (cfg.initial_scales.empty()) cfg.initial_scales.assign(GpHyper::packed_size(d), 0.2);
  const LogTarget target = [&](std::span<const double> p) {
    const GpHyper h = GpHyper::unpack(p, d);
    const double lp = priors.log_density(h);
    try {
      return lp + GpPredictor(u, y, h).log_marginal_likelihood();
    } catch (const FactorizationError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  return mh_sample(target, priors.center(d).pack(), cfg, seed);
}

/// Exact-inference GP with squared-exponential kernel and constant mean;
/// hyperparameters are sampled by MH on the marginal likelihood.
class GpModel : public ZooModel {
 public:
  explicit GpModel(ModelContext ctx, GpPriors priors = {}) : ctx_(std::move(ctx)), priors_(priors) {}

  std::string id() const override { return "gp"; }
  const SearchBox& box() const { return ctx_.box; }
  const GpPriors& priors() const { return priors_; }

  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    const DesignData dd = design_data(data, ctx_.box);
    const Standardizer st = Standardizer::fit(dd.y);
    const Eigen::VectorXd y = standardized(dd.y, st);
    const std::size_t d = ctx_.box.dim();
    const MhChain chain = gp_hyper_chain(dd.u, y, priors_, ctx_.mh, seed, d);
    return pool_handle(chain.pool, chain.acceptance_rate, [&](std::span<const double> p) {
      return LatentSample(
          std::make_shared<const GpLatent>(std::make_shared<const GpPredictor>(dd.u, y, GpHyper::unpack(p, d)), st));
    });
  }

  /// A latent sample for fixed hyperparameters (hyper in standardized units).
  LatentSample latent_for(const Dataset& data, const GpHyper& hyper, bool standardize = true) const {
    const DesignData dd = design_data(data, ctx_.box);
    const Standardizer st = standardize ? Standardizer::fit(dd.y) : Standardizer{};
    return LatentSample(
        std::make_shared<const GpLatent>(std::make_shared<const GpPredictor>(dd.u, standardized(dd.y, st), hyper), st));
  }

  Observation gen(const Input& x, const LatentSample& z, Seed s) const override {
    const auto p = z.as<GpLatent>().predictive(ctx_.box.normalize(x.coords()));
    Rng rng(derive_seed(s, Stream::gen));
    return Observation{p.mean + p.sd() * rng.normal(), {}};
  }

  Law conditional_law(const Input& x, const LatentSample& z) const override {
    const auto p = z.as<GpLatent>().predictive(ctx_.box.normalize(x.coords()));
    return {LawComponent::normal(p.mean, p.sd())};
  }

  /// Posterior mean of the latent function at x, averaged over the pool.
  double posterior_mean(const PosteriorHandle& handle, const Input& x) const {
    const auto* pool = handle.pool();
    if (pool == nullptr) throw Error("GP posterior mean needs a sample pool");
    const auto u = ctx_.box.normalize(x.coords());
    double sum = 0.0;
    for (const auto& z : pool->samples) sum += z.as<GpLatent>().predictive(u).mean;
    return sum / static_cast<double>(pool->samples.size());
  }

 private:
  ModelContext ctx_;
  GpPriors priors_;
};

}  // namespace versabo
