#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "versabo/gp.hpp"
#include "versabo/models/zoo_model.hpp"

namespace versabo {

/// Linear warp y = w0 + w1'u + w2 z of a latent value z at input u.
struct WarpTask {
  double w0 = 0.0;
  std::vector<double> w1;
  double w2 = 1.0;

  double apply(std::span<const double> u, double z) const {
    double y = w0 + w2 * z;
    for (std::size_t j = 0; j < u.size(); ++j) y += w1[j] * u[j];
    return y;
  }
};

/// Warp whose offset and latent scale move linearly with a context vector.
struct ContextualWarp {
  WarpTask base;
  std::vector<double> gamma0;
  std::vector<double> gamma2;

  WarpTask at(std::span<const double> context) const {
    if (context.size() != gamma0.size() || context.size() != gamma2.size()) {
      throw DimensionMismatch("contextual warp: context dimension disagrees");
    }
    WarpTask w = base;
    for (std::size_t k = 0; k < context.size(); ++k) {
      w.w0 += gamma0[k] * context[k];
      w.w2 += gamma2[k] * context[k];
    }
    return w;
  }
};

struct WarpParams {
  std::vector<WarpTask> tasks;
  std::vector<double> log_lengthscale;  // latent GP; unit signal variance, zero mean
  double sigma2 = 0.01;
};

struct WarpPriors {
  double w0_sd = 2.0;
  double w1_sd = 1.0;
  double w2_center = 1.0;
  double w2_sd = 0.5;
  double log_var_center = -2.0;
  double log_var_sd = 1.0;
  double log_lengthscale_center = std::log(0.3);
  double log_lengthscale_sd = 1.0;
};

/// The last input coordinate selects the task: box [0.5, T + 0.5], rounded.
inline std::size_t warp_task_count(const SearchBox& box) {
  if (box.dim() < 2) throw DimensionMismatch("warp model needs at least one input coordinate plus a task coordinate");
  return static_cast<std::size_t>(std::lround(box[box.dim() - 1].hi - 0.5));
}

inline std::size_t warp_task_of(const SearchBox& box, const Input& x) {
  const double t = std::round(x[x.dim() - 1]);
  const auto tasks = warp_task_count(box);
  if (!(t >= 1.0 && t <= static_cast<double>(tasks))) throw Error("unknown task " + std::to_string(t));
  return static_cast<std::size_t>(t);
}

struct WarpLatent final : LatentState {
  WarpParams params;
  Eigen::MatrixXd points;  // data inputs divided by lengthscales, as columns
  std::vector<std::size_t> task_of;  // 0-based
  GaussianConditioner cond;          // of the data residuals

  NamedValues values() const override {
    NamedValues v{{"log_lengthscale", params.log_lengthscale}, {"sigma2", {params.sigma2}}};
    for (std::size_t t = 0; t < params.tasks.size(); ++t) {
      const auto key = "task" + std::to_string(t + 1) + ".";
      v[key + "w0"] = {params.tasks[t].w0};
      v[key + "w1"] = params.tasks[t].w1;
      v[key + "w2"] = {params.tasks[t].w2};
    }
    return v;
  }

  /// Predictive of the shared latent value at u given the data.
  GpPredictor::Moments latent(std::span<const double> u) const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j) p[static_cast<Eigen::Index>(j)] = u[j] * std::exp(-params.log_lengthscale[j]);
    Eigen::VectorXd k = se_cross(points, p, 1.0);
    for (Eigen::Index i = 0; i < k.size(); ++i) k[i] *= params.tasks[task_of[static_cast<std::size_t>(i)]].w2;
    return {cond.mean_shift(k), std::max(0.0, 1.0 - cond.variance_reduction(k))};
  }
};

/// Multi-task model: every task is a linear warp of one latent GP. Latent
/// values, offsets and linear terms are marginalized, so MH runs over
/// lengthscales, noise and the latent scales w2.
class WarpModel : public ZooModel {
 public:
  explicit WarpModel(ModelContext ctx, WarpPriors priors = {})
      : ctx_(std::move(ctx)), priors_(priors), tasks_(warp_task_count(ctx_.box)) {}

  std::string id() const override { return "warp"; }
  std::size_t tasks() const { return tasks_; }
  std::size_t input_dim() const { return ctx_.box.dim() - 1; }

  // packed: log l (p), log sigma2, then per task (w0, w1 (p), w2)
  WarpParams unpack(std::span<const double> v) const {
    const std::size_t p = input_dim();
    WarpParams w;
    w.log_lengthscale.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(p));
    w.sigma2 = std::exp(v[p]);
    for (std::size_t t = 0; t < tasks_; ++t) {
      const std::size_t o = p + 1 + t * (p + 2);
      WarpTask task;
      task.w0 = v[o];
      task.w1.assign(v.begin() + static_cast<std::ptrdiff_t>(o + 1), v.begin() + static_cast<std::ptrdiff_t>(o + 1 + p));
      task.w2 = v[o + 1 + p];
      w.tasks.push_back(std::move(task));
    }
    return w;
  }

  std::size_t packed_size() const { return input_dim() + 1 + tasks_ * (input_dim() + 2); }

  /// Conditions the latent GP on the data under fixed parameters.
  std::shared_ptr<WarpLatent> condition(const Dataset& data, WarpParams params) const {
    const std::size_t p = input_dim();
    auto z = std::make_shared<WarpLatent>();
    std::vector<std::vector<double>> u;
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& e = data[i];
      if (e.x.dim() != ctx_.box.dim()) throw DimensionMismatch("dataset input dimension does not match the model box");
      const std::size_t t = warp_task_of(ctx_.box, e.x) - 1;
      auto ui = ctx_.box.normalize(e.x.coords());
      ui.resize(p);
      r[static_cast<Eigen::Index>(i)] = e.y.objective - params.tasks[t].apply(ui, 0.0);
      z->task_of.push_back(t);
      u.push_back(std::move(ui));
    }
    GpHyper h;
    h.log_lengthscale = params.log_lengthscale;
    z->points = scale_points(u, h);
    Eigen::MatrixXd K = se_gram(z->points, 1.0);
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      for (Eigen::Index j = 0; j < K.cols(); ++j) {
        K(i, j) *= params.tasks[z->task_of[static_cast<std::size_t>(i)]].w2 *
                   params.tasks[z->task_of[static_cast<std::size_t>(j)]].w2;
      }
      K(i, i) += params.sigma2;
    }
    z->cond = GaussianConditioner(std::move(K), r);
    z->params = std::move(params);
    return z;
  }

  PosteriorHandle infer(const Dataset& data, Seed seed) const override {
    // Offsets and linear terms enter linearly with Gaussian priors, so they
    // are integrated out of the MH target: y ~ N(0, C + H B H'). Each kept
    // state then gets an exact draw of them from their Gaussian conditional.
    const std::size_t p = input_dim();
    const std::size_t nbeta = tasks_ * (p + 1);
    const auto n = static_cast<Eigen::Index>(data.size());
    std::vector<std::vector<double>> u;
    std::vector<std::size_t> task;
    Eigen::VectorXd y(n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(nbeta));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& e = data[static_cast<std::size_t>(i)];
      if (e.x.dim() != ctx_.box.dim()) throw DimensionMismatch("dataset input dimension does not match the model box");
      const std::size_t t = warp_task_of(ctx_.box, e.x) - 1;
      auto ui = ctx_.box.normalize(e.x.coords());
      ui.resize(p);
      const auto col = static_cast<Eigen::Index>(t * (p + 1));
      H(i, col) = 1.0;
      for (std::size_t j = 0; j < p; ++j) H(i, col + 1 + static_cast<Eigen::Index>(j)) = ui[j];
      y[i] = e.y.objective;
      task.push_back(t);
      u.push_back(std::move(ui));
    }
    Eigen::VectorXd bvar(static_cast<Eigen::Index>(nbeta));
    for (std::size_t t = 0; t < tasks_; ++t) {
      const auto col = static_cast<Eigen::Index>(t * (p + 1));
      bvar[col] = priors_.w0_sd * priors_.w0_sd;
      for (std::size_t j = 0; j < p; ++j) bvar[col + 1 + static_cast<Eigen::Index>(j)] = priors_.w1_sd * priors_.w1_sd;
    }

    // theta: log l (p), log sigma2, w2 per task
    const auto latent_cov = [&](std::span<const double> th) {
      GpHyper h;
      h.log_lengthscale.assign(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(p));
      Eigen::MatrixXd C = se_gram(scale_points(u, h), 1.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          C(i, j) *= th[p + 1 + task[static_cast<std::size_t>(i)]] * th[p + 1 + task[static_cast<std::size_t>(j)]];
        }
        C(i, i) += std::exp(th[p]);
      }
      return C;
    };
    const LogTarget target = [&](std::span<const double> th) {
      double lp = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        lp += normal_log_pdf(th[j], priors_.log_lengthscale_center, priors_.log_lengthscale_sd);
      }
      lp += normal_log_pdf(th[p], priors_.log_var_center, priors_.log_var_sd);
      for (std::size_t t = 0; t < tasks_; ++t) lp += normal_log_pdf(th[p + 1 + t], priors_.w2_center, priors_.w2_sd);
      try {
        Eigen::MatrixXd M = latent_cov(th) + H * bvar.asDiagonal() * H.transpose();
        return lp + GaussianConditioner(std::move(M), y).log_likelihood();
      } catch (const FactorizationError&) {
        return -std::numeric_limits<double>::infinity();
      }
    };

    std::vector<double> init(p + 1 + tasks_, priors_.w2_center);
    for (std::size_t j = 0; j < p; ++j) init[j] = priors_.log_lengthscale_center;
    init[p] = priors_.log_var_center;
    MhConfig cfg = ctx_.mh;
    if (cfg.initial_scales.empty()) cfg.initial_scales.assign(init.size(), 0.1);
    const MhChain chain = mh_sample(target, std::move(init), cfg, seed);

    std::vector<std::vector<double>> states;
    for (std::size_t k = 0; k < chain.pool.size(); ++k) {
      const auto& th = chain.pool[k];
      // beta | theta, y: precision B^-1 + A'A with A = L^-1 H, mean P^-1 A' L^-1 y
      const Eigen::MatrixXd L = cholesky_with_jitter(latent_cov(th));
      Eigen::MatrixXd A = H;
      Eigen::VectorXd b = y;
      if (n > 0) {
        L.triangularView<Eigen::Lower>().solveInPlace(A);
        L.triangularView<Eigen::Lower>().solveInPlace(b);
      }
      Eigen::MatrixXd P = A.transpose() * A;
      P.diagonal() += bvar.cwiseInverse();
      const Eigen::MatrixXd LP = cholesky_with_jitter(P);
      Eigen::VectorXd beta = A.transpose() * b;
      LP.triangularView<Eigen::Lower>().solveInPlace(beta);
      Rng rng(derive_seed(seed, {1, k}));
      for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] += rng.normal();
      LP.triangularView<Eigen::Lower>().transpose().solveInPlace(beta);

      std::vector<double> v(packed_size());
      std::copy(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(p + 1), v.begin());
      for (std::size_t t = 0; t < tasks_; ++t) {
        const std::size_t o = p + 1 + t * (p + 2);
        for (std::size_t j = 0; j <= p; ++j) v[o + j] = beta[static_cast<Eigen::Index>(t * (p + 1) + j)];
        v[o + 1 + p] = th[p + 1 + t];
      }
      states.push_back(std::move(v));
    }
    return pool_handle(states, chain.acceptance_rate,
                       [&](std::span<const double> v) { return LatentSample(condition(data, unpack(v))); });
  }

  /// Draw of the shared latent value at x (used by gen before warping).
  double latent_draw(const Input& x, const LatentSample& zs, Rng& rng) const {
    const auto& z = zs.as<WarpLatent>();
    auto u = ctx_.box.normalize(x.coords());
    u.resize(input_dim());
    const auto m = z.latent(u);
    return m.mean + std::sqrt(m.var) * rng.normal();
  }

  Observation gen(const Input& x, const LatentSample& zs, Seed s) const override {
    const auto& z = zs.as<WarpLatent>();
    const std::size_t t = warp_task_of(ctx_.box, x);
    Rng rng(derive_seed(s, Stream::gen));
    const double latent = latent_draw(x, zs, rng);
    auto u = ctx_.box.normalize(x.coords());
    u.resize(input_dim());
    Observation y;
    y.objective = z.params.tasks[t - 1].apply(u, latent) + std::sqrt(z.params.sigma2) * rng.normal();
    y.aux["task"] = static_cast<double>(t);
    return y;
  }

  Law conditional_law(const Input& x, const LatentSample& zs) const override {
    const auto& z = zs.as<WarpLatent>();
    const auto& w = z.params.tasks[warp_task_of(ctx_.box, x) - 1];
    auto u = ctx_.box.normalize(x.coords());
    u.resize(input_dim());
    const auto m = z.latent(u);
    return {LawComponent::normal(w.apply(u, m.mean), std::sqrt(w.w2 * w.w2 * m.var + z.params.sigma2))};
  }

 private:
  ModelContext ctx_;
  WarpPriors priors_;
  std::size_t tasks_;
};

}  // namespace versabo
