#pragma once

#include <map>

#include "subens/params.hpp"

namespace subens {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
};

/// SGD with classical momentum:
///   v <- momentum * v - lr * g
///   w <- w + v
/// Velocity buffers are created lazily per layer.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig config = {});

  /// Applies one update for every layer present in `grads`. Frozen layers
  /// in `params` are left untouched.
  void step(ParamStore& params, const ParamStore& grads);

  const SgdConfig& config() const noexcept { return config_; }

 private:
  SgdConfig config_;
  std::map<std::size_t, LayerParams> velocity_;
};

}  // namespace subens
