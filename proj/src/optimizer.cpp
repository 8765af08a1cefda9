#include "subens/optimizer.hpp"

#include <cmath>

#include "subens/error.hpp"

namespace subens {

SgdMomentum::SgdMomentum(SgdConfig config) : config_(config) {
  if (!std::isfinite(config.learning_rate) || config.learning_rate < 0.0) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!std::isfinite(config.momentum) || config.momentum < 0.0 || config.momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
}

namespace {

void update(Tensor& w, Tensor& v, const Tensor& g, const SgdConfig& cfg, std::size_t layer) {
  if (w.shape() != g.shape()) {
    throw ConfigError("gradient shape " + shape_to_string(g.shape()) + " does not match parameter shape " +
                      shape_to_string(w.shape()) + " at layer " + std::to_string(layer));
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = cfg.momentum * v[i] - cfg.learning_rate * g[i];
    w[i] += v[i];
    if (!std::isfinite(w[i])) throw NumericalError("non-finite parameter update at layer " + std::to_string(layer));
  }
}

}  // namespace

void SgdMomentum::step(ParamStore& params, const ParamStore& grads) {
  for (const auto& [layer, g] : grads) {
    if (params.is_frozen(layer)) continue;
    LayerParams& p = params.at(layer);
    auto [it, inserted] = velocity_.try_emplace(layer);
    if (inserted) it->second = {Tensor(p.weight.shape()), Tensor(p.bias.shape())};
    update(p.weight, it->second.weight, g.weight, config_, layer);
    update(p.bias, it->second.bias, g.bias, config_, layer);
  }
}

}  // namespace subens
