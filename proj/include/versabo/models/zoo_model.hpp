#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "versabo/core.hpp"
#include "versabo/mcmc.hpp"
#include "versabo/mf_optimizer.hpp"

namespace versabo {

/// One component of a closed-form conditional law p(y | z; x).
struct LawComponent {
  enum class Kind { normal, uniform };
  Kind kind = Kind::normal;
  double weight = 1.0;
  double a = 0.0;  // normal: mean, uniform: lower bound
  double b = 1.0;  // normal: sd, uniform: upper bound

  static LawComponent normal(double mean, double sd, double w = 1.0) { return {Kind::normal, w, mean, sd}; }
  static LawComponent uniform(double lo, double hi, double w = 1.0) { return {Kind::uniform, w, lo, hi}; }
};

/// Finite mixture of Normal and Uniform components; weights sum to one.
using Law = std::vector<LawComponent>;

inline double law_pdf(const Law& law, double y) {
  double p = 0.0;
  for (const auto& c : law) {
    if (c.weight == 0.0) continue;
    if (c.kind == LawComponent::Kind::normal) {
      const double z = (y - c.a) / c.b;
      p += c.weight * std::exp(-0.5 * z * z) / (c.b * std::sqrt(2.0 * std::numbers::pi));
    } else if (y >= c.a && y <= c.b) {
      p += c.weight / (c.b - c.a);
    }
  }
  return p;
}

inline double law_cdf(const Law& law, double y) {
  double p = 0.0;
  for (const auto& c : law) {
    if (c.kind == LawComponent::Kind::normal) {
      p += c.weight * 0.5 * std::erfc(-(y - c.a) / (c.b * std::sqrt(2.0)));
    } else {
      p += c.weight * std::clamp((y - c.a) / (c.b - c.a), 0.0, 1.0);
    }
  }
  return p;
}

/// Sampling by component selection, independent of any model's gen code.
inline double law_sample(const Law& law, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t k = 0; k < law.size(); ++k) {
    const auto& c = law[k];
    if (u < c.weight || k + 1 == law.size()) {
      return c.kind == LawComponent::Kind::normal ? c.a + c.b * rng.normal() : rng.uniform(c.a, c.b);
    }
    u -= c.weight;
  }
  throw Error("empty law");
}

/// Construction context handed to every zoo model by the registry.
struct ModelContext {
  SearchBox box;
  MhConfig mh;
  std::map<std::string, double, std::less<>> options;

  double option(std::string_view key, double fallback) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
  }
};

/// A model with a closed-form conditional law of the objective given one
/// latent sample, used as an independent check on gen.
class ZooModel : public Model {
 public:
  virtual Law conditional_law(const Input& x, const LatentSample& z) const = 0;
};

inline double logistic(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

inline double log_logistic(double t) { return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t)); }

}  // namespace versabo
