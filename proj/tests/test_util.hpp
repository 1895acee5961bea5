#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "versabo/versabo.hpp"

namespace versabo::testing {

inline double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Asymptotic two-sample Kolmogorov-Smirnov p-value (Kolmogorov series with
/// the Stephens small-sample correction).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  if (lambda < 1e-3) return 1.0;
  double p = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * p, 0.0, 1.0);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Closed-form Gaussian predictive: post returns a fixed latent and gen draws
/// N(mu + slope * x0, sigma^2).
class GaussianToyModel : public Model {
 public:
  GaussianToyModel(double mu, double sigma, double slope = 0.0) : mu_(mu), sigma_(sigma), slope_(slope) {}

  std::string id() const override { return "gaussian_toy"; }

  PosteriorHandle infer(const Dataset&, Seed) const override {
    SamplePool pool;
    pool.samples.push_back(LatentSample::from_values({{"mu", {mu_}}, {"sigma", {sigma_}}}));
    return PosteriorHandle(std::move(pool));
  }

  Observation gen(const Input& x, const LatentSample& z, Seed s) const override {
    const auto& v = z.as<NamedLatent>();
    Rng rng(derive_seed(s, Stream::gen));
    return Observation{v.scalar("mu") + slope_ * x[0] + v.scalar("sigma") * rng.normal(), {}};
  }

 private:
  double mu_, sigma_, slope_;
};

/// Deterministic system f(x) = sum (x_j - c)^2.
class QuadraticSystem : public System {
 public:
  QuadraticSystem(std::size_t d, double c) : box_(SearchBox::cube(d, -1.0, 1.0)), c_(c) {}
  std::string id() const override { return "quadratic"; }
  const SearchBox& box() const override { return box_; }
  Observation evaluate(const Input& x, Seed) const override {
    double s = 0.0;
    for (std::size_t j = 0; j < x.dim(); ++j) s += (x[j] - c_) * (x[j] - c_);
    return Observation{s, {}};
  }

 private:
  SearchBox box_;
  double c_;
};

inline MhConfig quick_mh(std::size_t steps = 2000) {
  MhConfig c;
  c.steps = steps;
  return c;
}

inline ModelContext context(SearchBox box, std::size_t steps = 2000) {
  return ModelContext{std::move(box), quick_mh(steps), {}};
}

/// Dataset plus a context on which each zoo model can run inference.
struct ZooCase {
  std::string id;
  ModelContext ctx;
  Dataset data;
  Input query;
};

inline std::vector<ZooCase> zoo_cases() {
  std::vector<ZooCase> out;
  Rng rng(Seed{31});
  {
    const ContaminatedSystem sys(2, 0.2);
    Dataset d;
    for (int i = 0; i < 15; ++i) {
      const Input x = sys.box().sample(rng);
      d = d.appended(x, sys.evaluate(x, Seed{std::uint64_t(i)}));
    }
    out.push_back({"gp", context(sys.box()), d, Input{0.5, -0.5}});
    out.push_back({"denoising_gp", context(sys.box()), d, Input{0.5, -0.5}});
  }
  {
    const StateSystem sys;
    Dataset d;
    for (int i = 0; i < 20; ++i) {
      const Input x = sys.box().sample(rng);
      d = d.appended(x, sys.evaluate(x, Seed{std::uint64_t(i)}));
    }
    out.push_back({"switching", context(sys.box()), d, Input{0.8, 0.7, 0.3, 0.5}});
  }
  {
    const BasinSystem sys;
    Dataset d;
    for (int i = 0; i < 15; ++i) {
      const Input x = sys.box().sample(rng);
      d = d.appended(x, sys.evaluate(x, Seed{std::uint64_t(i)}));
    }
    out.push_back({"basin", context(sys.box()), d, Input{0.5, 0.5}});
  }
  {
    const MultitaskSystem sys;
    Dataset d;
    for (int i = 0; i < 16; ++i) {
      const Input x{rng.uniform(), rng.uniform(), double(1 + i % 2)};
      d = d.appended(x, sys.evaluate(x, Seed{std::uint64_t(i)}));
    }
    out.push_back({"warp", context(sys.box()), d, Input{0.4, 0.6, 2.0}});
  }
  {
    const PhaseShiftSystem sys;
    Dataset d;
    for (int i = 0; i < 15; ++i) {
      const Input x = sys.box().sample(rng);
      d = d.appended(x, sys.evaluate(x, Seed{std::uint64_t(i)}));
    }
    out.push_back({"phaseshift", context(sys.box()), d, Input{0.0}});
  }
  return out;
}

}  // namespace versabo::testing
