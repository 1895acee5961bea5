#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "versabo/ensemble.hpp"
#include "versabo/models/basin.hpp"
#include "versabo/models/denoising.hpp"
#include "versabo/models/gp_model.hpp"
#include "versabo/models/phaseshift.hpp"
#include "versabo/models/switching.hpp"
#include "versabo/models/warp.hpp"

namespace versabo {

inline std::vector<std::string> zoo_model_ids() {
  return {"basin", "denoising_gp", "gp", "phaseshift", "switching", "warp"};
}

/// Zoo model by id. Recognized options: "components" (phaseshift K) and
/// "x_dependent_weights" (denoising_gp, nonzero enables it).
inline std::shared_ptr<const ZooModel> make_zoo_model(std::string_view id, const ModelContext& ctx) {
  if (id == "gp") return std::make_shared<GpModel>(ctx);
  if (id == "switching") return std::make_shared<SwitchingModel>(ctx);
  if (id == "denoising_gp") return std::make_shared<DenoisingGpModel>(ctx);
  if (id == "basin") return std::make_shared<BasinModel>(ctx);
  if (id == "warp") return std::make_shared<WarpModel>(ctx);
  if (id == "phaseshift") {
    const double k = ctx.option("components", 2.0);
    if (!(k >= 1.0) || k != std::floor(k)) throw Error("phaseshift: components must be a positive integer");
    return std::make_shared<PhaseShiftModel>(ctx, static_cast<std::size_t>(k));
  }
  throw Error("unknown model '" + std::string(id) + "'");
}

/// Any model id, including "bpoe:<idA>+<idB>".
inline std::shared_ptr<const Model> make_model(std::string_view id, const ModelContext& ctx,
                                               CombineRule rule = CombineRule::standard) {
  constexpr std::string_view prefix = "bpoe:";
  if (id.substr(0, prefix.size()) == prefix) {
    const auto rest = id.substr(prefix.size());
    const auto plus = rest.find('+');
    if (plus == std::string_view::npos || rest.find('+', plus + 1) != std::string_view::npos) {
      throw Error("BPoE id must be bpoe:<idA>+<idB>");
    }
    return std::make_shared<BpoeModel>(make_zoo_model(rest.substr(0, plus), ctx),
                                       make_zoo_model(rest.substr(plus + 1), ctx), rule);
  }
  return make_zoo_model(id, ctx);
}

inline bool is_model_id(std::string_view id) {
  const auto zoo = zoo_model_ids();
  const auto known = [&](std::string_view z) { return std::find(zoo.begin(), zoo.end(), z) != zoo.end(); };
  constexpr std::string_view prefix = "bpoe:";
  if (id.substr(0, prefix.size()) != prefix) return known(id);
  const auto rest = id.substr(prefix.size());
  const auto plus = rest.find('+');
  return plus != std::string_view::npos && known(rest.substr(0, plus)) && known(rest.substr(plus + 1));
}

inline std::vector<std::string> model_ids() {
  auto ids = zoo_model_ids();
  ids.push_back("bpoe:<idA>+<idB>");
  return ids;
}

}  // namespace versabo
