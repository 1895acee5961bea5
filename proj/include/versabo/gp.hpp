#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "versabo/core.hpp"
#include "versabo/mcmc.hpp"
#include "versabo/mf_optimizer.hpp"

namespace versabo {

class FactorizationError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

inline constexpr double kLog2Pi = 1.8378770664093453;

inline double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

/// Lower Cholesky factor of K, adding diagonal jitter when needed. Jitter
/// starts at 1e-10 times the mean diagonal and grows by 10x up to 1e-4 times it.
inline Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd K) {
  const auto n = K.rows();
  if (n == 0) return K;
  const double scale = std::max(K.diagonal().mean(), 1e-300);
  if (!std::isfinite(scale)) throw FactorizationError("covariance matrix has non-finite entries");
  {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  double jitter = 1e-10 * scale;
  K.diagonal().array() += jitter;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (jitter >= 1e-4 * scale * (1.0 - 1e-9)) break;
    K.diagonal().array() += 9.0 * jitter;
    jitter *= 10.0;
  }
  throw FactorizationError("covariance factorization failed after maximal jitter");
}

/// Conditioning of a zero-mean Gaussian vector r ~ N(0, K) on its observed
/// value: mean shift k'K^{-1}r and variance reduction k'K^{-1}k for a new
/// coordinate with cross-covariance k.
class GaussianConditioner {
 public:
  GaussianConditioner() = default;

  GaussianConditioner(Eigen::MatrixXd cov, const Eigen::VectorXd& residual)
      : L_(cholesky_with_jitter(std::move(cov))) {
    if (L_.rows() != residual.size()) throw DimensionMismatch("conditioner: covariance and residual disagree");
    alpha_ = residual;
    if (alpha_.size() > 0) {
      L_.triangularView<Eigen::Lower>().solveInPlace(alpha_);
      quad_ = alpha_.squaredNorm();
      L_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
    }
  }

  Eigen::Index size() const { return L_.rows(); }
  const Eigen::MatrixXd& chol() const { return L_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  double mean_shift(const Eigen::VectorXd& cross) const { return size() == 0 ? 0.0 : cross.dot(alpha_); }

  double variance_reduction(const Eigen::VectorXd& cross) const {
    if (size() == 0) return 0.0;
    return L_.triangularView<Eigen::Lower>().solve(cross).squaredNorm();
  }

  /// log N(residual | 0, cov).
  double log_likelihood() const {
    const auto n = static_cast<double>(size());
    return -0.5 * quad_ - L_.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
  }

 private:
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  double quad_ = 0.0;
};

/// Affine map y -> (y - shift) / scale.
struct Standardizer {
  double shift = 0.0;
  double scale = 1.0;

  double to(double y) const { return (y - shift) / scale; }
  double from(double v) const { return shift + scale * v; }

  static Standardizer fit(std::span<const double> y) {
    Standardizer s;
    if (y.empty()) return s;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = y.size() > 1 ? std::sqrt(ss / static_cast<double>(y.size() - 1)) : 0.0;
    s.shift = mean;
    s.scale = sd > 1e-12 ? sd : 1.0;
    return s;
  }

  /// Median / MAD version, insensitive to a minority of gross outliers.
  static Standardizer fit_robust(std::span<const double> y) {
    Standardizer s;
    if (y.empty()) return s;
    std::vector<double> v(y.begin(), y.end());
    const double med = empirical_quantile(v, 0.5);
    for (auto& e : v) e = std::abs(e - med);
    const double mad = 1.4826 * empirical_quantile(v, 0.5);
    s.shift = med;
    s.scale = mad > 1e-12 ? mad : Standardizer::fit(y).scale;
    return s;
  }
};

struct GpHyper {
  std::vector<double> log_lengthscale;
  double log_signal_var = 0.0;
  double log_noise_var = std::log(1e-2);
  double mean = 0.0;

  std::size_t dim() const { return log_lengthscale.size(); }
  static std::size_t packed_size(std::size_t d) { return d + 3; }

  std::vector<double> pack() const {
    std::vector<double> p(log_lengthscale);
    p.push_back(log_signal_var);
    p.push_back(log_noise_var);
    p.push_back(mean);
    return p;
  }

  static GpHyper unpack(std::span<const double> p, std::size_t d) {
    if (p.size() < d + 3) throw DimensionMismatch("GP hyperparameter vector too short");
    GpHyper h;
    h.log_lengthscale.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d));
    h.log_signal_var = p[d];
    h.log_noise_var = p[d + 1];
    h.mean = p[d + 2];
    return h;
  }

  NamedValues named() const {
    return {{"log_lengthscale", log_lengthscale},
            {"log_signal_var", {log_signal_var}},
            {"log_noise_var", {log_noise_var}},
            {"mean", {mean}}};
  }
};

/// Normal priors on the GP hyperparameters, in standardized-output and
/// box-normalized-input units.
struct GpPriors {
  double log_lengthscale_center = std::log(0.3);
  double log_lengthscale_sd = 1.0;
  double log_signal_center = 0.0;
  double log_signal_sd = 1.0;
  double log_noise_center = std::log(1e-2);
  double log_noise_sd = 1.0;
  double mean_center = 0.0;
  double mean_sd = 1.0;

  double log_density(const GpHyper& h) const {
    double lp = 0.0;
    for (double l : h.log_lengthscale) lp += normal_log_pdf(l, log_lengthscale_center, log_lengthscale_sd);
    lp += normal_log_pdf(h.log_signal_var, log_signal_center, log_signal_sd);
    lp += normal_log_pdf(h.log_noise_var, log_noise_center, log_noise_sd);
    lp += normal_log_pdf(h.mean, mean_center, mean_sd);
    return lp;
  }

  GpHyper center(std::size_t d) const {
    GpHyper h;
    h.log_lengthscale.assign(d, log_lengthscale_center);
    h.log_signal_var = log_signal_center;
    h.log_noise_var = log_noise_center;
    h.mean = mean_center;
    return h;
  }
};

/// Squared-exponential kernel on inputs pre-divided by the lengthscales.
/// Points are the columns of `scaled`.
inline Eigen::MatrixXd se_gram(const Eigen::MatrixXd& scaled, double signal_var) {
  const auto n = scaled.cols();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = signal_var;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = (scaled.col(i) - scaled.col(j)).squaredNorm();
      K(i, j) = K(j, i) = signal_var * std::exp(-0.5 * r2);
    }
  }
  return K;
}

inline Eigen::VectorXd se_cross(const Eigen::MatrixXd& scaled, const Eigen::VectorXd& point, double signal_var) {
  Eigen::VectorXd k(scaled.cols());
  for (Eigen::Index i = 0; i < scaled.cols(); ++i) {
    k[i] = signal_var * std::exp(-0.5 * (scaled.col(i) - point).squaredNorm());
  }
  return k;
}

/// Points (box-normalized) as columns, divided by the lengthscales.
inline Eigen::MatrixXd scale_points(const std::vector<std::vector<double>>& u, const GpHyper& h) {
  Eigen::MatrixXd P(static_cast<Eigen::Index>(h.dim()), static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i].size() != h.dim()) throw DimensionMismatch("GP input dimension does not match lengthscales");
    for (std::size_t j = 0; j < h.dim(); ++j) {
      P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = u[i][j] * std::exp(-h.log_lengthscale[j]);
    }
  }
  return P;
}

/// Exact GP predictive under fixed hyperparameters.
class GpPredictor {
 public:
  struct Moments {
    double mean = 0.0;
    double var = 0.0;  // latent f, without observation noise
  };

  /// u: box-normalized inputs, y: (standardized) targets. With noisy=false
  /// the targets are noise-free latent function values and only `nugget`
  /// (relative to the signal variance) is added to the diagonal.
  GpPredictor(const std::vector<std::vector<double>>& u, const Eigen::VectorXd& y, GpHyper h, bool noisy = true,
              double nugget = 0.0)
      : hyper_(std::move(h)), points_(scale_points(u, hyper_)) {
    if (static_cast<Eigen::Index>(u.size()) != y.size()) throw DimensionMismatch("GP inputs and targets disagree");
    Eigen::MatrixXd K = se_gram(points_, signal_var());
    K.diagonal().array() += noisy ? noise_var() : nugget * signal_var();
    cond_ = GaussianConditioner(std::move(K), (y.array() - hyper_.mean).matrix());
  }

  const GpHyper& hyper() const { return hyper_; }
  double signal_var() const { return std::exp(hyper_.log_signal_var); }
  double noise_var() const { return std::exp(hyper_.log_noise_var); }
  Eigen::Index size() const { return points_.cols(); }
  double log_marginal_likelihood() const { return cond_.log_likelihood(); }

  Moments latent(std::span<const double> u) const {
    if (u.size() != hyper_.dim()) throw DimensionMismatch("GP query dimension does not match");
    Eigen::VectorXd p(static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j) p[static_cast<Eigen::Index>(j)] = u[j] * std::exp(-hyper_.log_lengthscale[j]);
    const Eigen::VectorXd k = se_cross(points_, p, signal_var());
    Moments m;
    m.mean = hyper_.mean + cond_.mean_shift(k);
    m.var = std::max(0.0, signal_var() - cond_.variance_reduction(k));
    return m;
  }

 private:
  GpHyper hyper_;
  Eigen::MatrixXd points_;
  GaussianConditioner cond_;
};

/// Box-normalized inputs and raw objectives of a dataset.
struct DesignData {
  std::vector<std::vector<double>> u;
  std::vector<double> y;
};

inline DesignData design_data(const Dataset& data, const SearchBox& box, const ObjectiveFn& f = objective_of) {
  DesignData out;
  for (const auto& e : data) {
    if (e.x.dim() != box.dim()) throw DimensionMismatch("dataset input dimension does not match the model box");
    out.u.push_back(box.normalize(e.x.coords()));
    out.y.push_back(f(e.y));
  }
  return out;
}

inline Eigen::VectorXd standardized(const std::vector<double>& y, const Standardizer& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = s.to(y[i]);
  return v;
}

}  // namespace versabo
