#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/models/gp_model.hpp"

namespace versabo {

struct DenoisePriors {
  double wc_alpha = 1.0;  // Beta prior on the contamination weight
  double wc_beta = 4.0;
  double wc_init = 0.2;
  double slope_sd = 1.0;  // x-dependent variant: logit-weight slopes
  double nugget = 1e-6;   // latent-function kernel diagonal, relative to the signal variance
};

/// logit w_c(u) = t0 + sum_j t_j (u_j - 1/2); a single coefficient means a
/// constant weight.
inline double contamination_weight(std::span<const double> coef, std::span<const double> u) {
  double t = coef[0];
  for (std::size_t j = 1; j < coef.size(); ++j) t += coef[j] * (u[j - 1] - 0.5);
  return logistic(t);
}

struct DenoiseLatent final : LatentState {
  std::shared_ptr<const GpLatent> system;  // GP conditioned on sampled latent function values
  std::vector<double> weight_coef{0.0};
  double lo = 0.0;  // contamination interval, objective units
  double hi = 1.0;

  double w_c(std::span<const double> u) const { return contamination_weight(weight_coef, u); }

  NamedValues values() const override {
    NamedValues v = system->values();
    v["w_c_logit"] = weight_coef;
    v["contamination_interval"] = {lo, hi};
    return v;
  }
};

/// GP system model mixed with a Uniform contamination model over the
/// observed data range: y ~ w_s GP(x) + w_c U(lo, hi). Inference alternates
/// MH on (GP hyperparameters, logit w_c) with elliptical slice sampling on
/// the whitened latent function values at the data. With the option
/// "x_dependent_weights" set, w_c is logistic-linear in the input.
class DenoisingGpModel : public ZooModel {
 public:
  explicit DenoisingGpModel(ModelContext ctx, GpPriors gp_priors = {}, DenoisePriors priors = {})
      : ctx_(std::move(ctx)), gp_priors_(gp_priors), priors_(priors),
        x_dependent_(ctx_.option("x_dependent_weights", 0.0) != 0.0) {}

  std::string id() const override { return "denoising_gp"; }
  bool x_dependent_weights() const { return x_dependent_; }

  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    const MhConfig& cfg = ctx_.mh;
    cfg.validate();
    const std::size_t d = ctx_.box.dim();
    const std::size_t nh = GpHyper::packed_size(d);
    const std::size_t nw = x_dependent_ ? d + 1 : 1;
    const std::size_t nb = nh + nw;
    const DesignData dd = design_data(data, ctx_.box);
    const Standardizer st = Standardizer::fit_robust(dd.y);
    const Eigen::VectorXd ys = standardized(dd.y, st);
    const auto n = ys.size();

    double lo_s = -1.0, hi_s = 1.0;
    if (n > 0) {
      lo_s = ys.minCoeff();
      hi_s = ys.maxCoeff();
      if (hi_s - lo_s < 1e-9) {
        lo_s -= 0.5;
        hi_s += 0.5;
      }
    }
    const double log_uc = -std::log(hi_s - lo_s);

    const auto chol_for = [&](const GpHyper& h) {
      const double sf2 = std::exp(h.log_signal_var);
      Eigen::MatrixXd K = se_gram(scale_points(dd.u, h), sf2);
      K.diagonal().array() += priors_.nugget * sf2;
      return cholesky_with_jitter(std::move(K));
    };
    std::vector<double> log_wc(static_cast<std::size_t>(n)), log_ws(static_cast<std::size_t>(n));
    const auto set_weights = [&](std::span<const double> coef) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double wc = contamination_weight(coef, dd.u[static_cast<std::size_t>(i)]);
        log_wc[static_cast<std::size_t>(i)] = std::log(wc);
        log_ws[static_cast<std::size_t>(i)] = std::log1p(-wc);
      }
    };
    const auto log_lik = [&](const Eigen::VectorXd& f, double sn) {
      const double log_norm = -std::log(sn) - 0.5 * kLog2Pi;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = (ys[i] - f[i]) / sn;
        const double a = log_ws[static_cast<std::size_t>(i)] + log_norm - 0.5 * z * z;
        const double b = (ys[i] >= lo_s && ys[i] <= hi_s) ? log_wc[static_cast<std::size_t>(i)] + log_uc
                                                         : -std::numeric_limits<double>::infinity();
        const double m = std::max(a, b);
        ll += m + std::log(std::exp(a - m) + std::exp(b - m));
      }
      return ll;
    };
    const auto log_prior = [&](std::span<const double> p) {
      const double t = p[nh];
      double lp = gp_priors_.log_density(GpHyper::unpack(p, d)) + priors_.wc_alpha * log_logistic(t) +
                  priors_.wc_beta * log_logistic(-t);
      for (std::size_t j = nh + 1; j < nb; ++j) lp += normal_log_pdf(p[j], 0.0, priors_.slope_sd);
      return lp;
    };
    const auto coef_of = [&](std::span<const double> p) { return p.subspan(nh, nw); };
    const auto latent_f = [&](const Eigen::MatrixXd& L, double mean, const Eigen::VectorXd& eta) {
      Eigen::VectorXd f = L * eta;
      f.array() += mean;
      return f;
    };

    std::vector<double> init = gp_priors_.center(d).pack();
    init.push_back(std::log(priors_.wc_init / (1.0 - priors_.wc_init)));
    init.resize(nb, 0.0);
    GpHyper h0 = GpHyper::unpack(init, d);
    Eigen::MatrixXd L = chol_for(h0);
    Eigen::VectorXd eta = (ys.array() - h0.mean).matrix();
    if (n > 0) L.triangularView<Eigen::Lower>().solveInPlace(eta);
    set_weights(coef_of(init));
    double cur_ll = log_lik(latent_f(L, h0.mean, eta), std::exp(0.5 * h0.log_noise_var));
    const double lp0 = log_prior(init) + cur_ll;
    if (!std::isfinite(lp0)) throw InferenceError("denoising GP: log target is not finite at the initial state");

    std::vector<double> scales = cfg.initial_scales;
    if (scales.empty()) scales.assign(nb, 0.2);
    AdaptiveMetropolis kernel(init, lp0, scales, cfg.target_acceptance, false);
    Eigen::MatrixXd prop_L;
    const LogTarget target = [&](std::span<const double> p) {
      const double lp = log_prior(p);
      if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
      const GpHyper h = GpHyper::unpack(p, d);
      try {
        prop_L = chol_for(h);
      } catch (const FactorizationError&) {
        return -std::numeric_limits<double>::infinity();
      }
      set_weights(coef_of(p));
      return lp + log_lik(latent_f(prop_L, h.mean, eta), std::exp(0.5 * h.log_noise_var));
    };

    Rng rng(seed);
    const std::size_t burn = cfg.burn_in_steps();
    std::vector<std::vector<double>> states;
    std::size_t accepted = 0, post_accepted = 0;
    Eigen::VectorXd nu(n), trial(n);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      const bool acc = kernel.step(target, rng);
      if (acc) L.swap(prop_L);
      accepted += acc ? 1 : 0;

      const std::vector<double>& p = kernel.state();
      const GpHyper h = GpHyper::unpack(p, d);
      const double prior_part = log_prior(p);
      cur_ll = kernel.log_target() - prior_part;
      if (n > 0) {
        const double sn = std::exp(0.5 * h.log_noise_var);
        set_weights(coef_of(p));
        for (Eigen::Index i = 0; i < n; ++i) nu[i] = rng.normal();
        const auto at_angle = [&](double a) {
          trial = eta * std::cos(a) + nu * std::sin(a);
          return log_lik(latent_f(L, h.mean, trial), sn);
        };
        double new_ll = cur_ll;
        const double a = elliptical_slice_angle(cur_ll, at_angle, rng, new_ll);
        eta = eta * std::cos(a) + nu * std::sin(a);
        kernel.set_state(p, prior_part + new_ll);
      }

      if (t < burn) {
        kernel.adapt(acc, t, burn);
      } else {
        post_accepted += acc ? 1 : 0;
        if ((t - burn) % cfg.thin == 0) {
          std::vector<double> s = kernel.state();
          s.insert(s.end(), eta.data(), eta.data() + n);
          states.push_back(std::move(s));
        }
      }
    }
    if (accepted == 0) throw InferenceError("denoising GP: no proposal was accepted (degenerate target)");
    subsample_pool(states, cfg.pool_cap, rng);
    const double rate = static_cast<double>(post_accepted) / static_cast<double>(cfg.steps - burn);

    const double lo = st.from(lo_s), hi = st.from(hi_s);
    return pool_handle(states, rate, [&](std::span<const double> s) {
      const GpHyper h = GpHyper::unpack(s, d);
      const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(s.data() + nb, n);
      const Eigen::VectorXd f = latent_f(chol_for(h), h.mean, e);
      auto z = std::make_shared<DenoiseLatent>();
      z->system = std::make_shared<const GpLatent>(
          std::make_shared<const GpPredictor>(dd.u, f, h, false, priors_.nugget), st);
      z->weight_coef.assign(s.begin() + static_cast<std::ptrdiff_t>(nh), s.begin() + static_cast<std::ptrdiff_t>(nb));
      z->lo = lo;
      z->hi = hi;
      return LatentSample(std::move(z));
    });
  }

  /// The system draw uses the same stream as GpModel::gen, so w_c = 0
  /// reproduces the system model's output exactly.
  Observation gen(const Input& x, const LatentSample& zs, Seed s) const override {
    const auto& z = zs.as<DenoiseLatent>();
    const Seed stream = derive_seed(s, Stream::gen);
    const auto u = ctx_.box.normalize(x.coords());
    Rng pick(derive_seed(stream, {1}));
    Observation y;
    if (pick.uniform() < z.w_c(u)) {
      y.objective = pick.uniform(z.lo, z.hi);
      y.aux["contaminated"] = 1.0;
    } else {
      const auto p = z.system->predictive(u);
      Rng rng(stream);
      y.objective = p.mean + p.sd() * rng.normal();
      y.aux["contaminated"] = 0.0;
    }
    return y;
  }

  Law conditional_law(const Input& x, const LatentSample& zs) const override {
    const auto& z = zs.as<DenoiseLatent>();
    const auto u = ctx_.box.normalize(x.coords());
    const auto p = z.system->predictive(u);
    const double wc = z.w_c(u);
    return {LawComponent::normal(p.mean, p.sd(), 1.0 - wc), LawComponent::uniform(z.lo, z.hi, wc)};
  }

  /// Posterior mean of the system model's latent function at x.
  double posterior_mean(const PosteriorHandle& handle, const Input& x) const {
    const auto* pool = handle.pool();
    if (pool == nullptr) throw Error("denoising posterior mean needs a sample pool");
    const auto u = ctx_.box.normalize(x.coords());
    double sum = 0.0;
    for (const auto& z : pool->samples) sum += z.as<DenoiseLatent>().system->predictive(u).mean;
    return sum / static_cast<double>(pool->samples.size());
  }

 private:
  ModelContext ctx_;
  GpPriors gp_priors_;
  DenoisePriors priors_;
  bool x_dependent_;
};

}  // namespace versabo
