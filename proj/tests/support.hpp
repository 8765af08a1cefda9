#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subens/network.hpp"
#include "subens/rng.hpp"

namespace subens::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

/// A small conv/pool/dense classifier with randomly chosen geometry,
/// at most a few hundred parameters.
inline NetworkSpec random_network(Rng& rng) {
  NetworkSpec spec;
  const std::size_t channels = 1 + rng.below(2);
  const std::size_t size = 4 + rng.below(3);
  spec.input_shape = {channels, size, size};
  spec.num_classes = 2 + rng.below(3);

  const std::size_t c1 = 2 + rng.below(2);
  const std::size_t k1 = 1 + 2 * rng.below(2);
  spec.layers.push_back(Conv2d{channels, c1, k1, k1, 1, rng.below(2) ? Padding::Same : Padding::Valid});
  spec.layers.push_back(Relu{});
  if (rng.below(2)) spec.layers.push_back(MaxPool2x2{});
  const std::size_t c2 = 2 + rng.below(2);
  spec.layers.push_back(Conv2d{c1, c2, 2, 2, 1 + rng.below(2), Padding::Same});
  spec.layers.push_back(Relu{});
  spec.layers.push_back(Flatten{});

  Shape flat = spec.input_shape;
  for (const auto& layer : spec.layers) flat = layer_output_shape(layer, flat);
  std::size_t used = spec.num_classes;
  for (const auto& layer : spec.layers) {
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      used += conv->out_channels * (conv->in_channels * conv->kernel_h * conv->kernel_w + 1);
    }
  }
  const std::size_t budget = (500 - used) / (flat[0] + 1 + spec.num_classes);
  const std::size_t hidden = std::min<std::size_t>(3 + rng.below(4), budget);
  spec.layers.push_back(Dense{flat[0], hidden});
  spec.layers.push_back(Relu{});
  spec.layers.push_back(Dense{hidden, spec.num_classes});
  spec.layers.push_back(Softmax{});
  spec.validate();
  return spec;
}

/// He-initialized weights with random nonzero biases, so no unit sits
/// exactly on a ReLU kink.
inline ParamStore random_params(const NetworkSpec& spec, Rng& rng) {
  ParamStore params = init_params(spec, rng.next_u64());
  for (const auto& [layer, _] : ParamStore(params)) {
    for (double& b : params.at(layer).bias.values()) b = 0.1 * rng.normal();
  }
  return params;
}

inline Tensor random_batch(const NetworkSpec& spec, std::size_t batch, Rng& rng) {
  Shape s{batch};
  s.insert(s.end(), spec.input_shape.begin(), spec.input_shape.end());
  return random_tensor(std::move(s), rng);
}

/// Largest relative error between backprop and central differences over
/// every parameter, for loss = <r, forward(x)> with fixed random weights r.
inline double max_gradient_error(const NetworkSpec& spec, ParamStore params, const Tensor& x, Rng& rng,
                                 double h = 1e-5) {
  const Tensor probe = forward(spec, params, x);
  const Tensor r = random_tensor(probe.shape(), rng);
  const auto loss = [&](const ParamStore& p) {
    const Tensor y = forward(spec, p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  const auto acts = forward_cached(spec, params, 0, spec.size(), x);
  const ParamStore grads = backward_range(spec, params, 0, spec.size(), acts, r);

  double worst = 0.0;
  const auto check = [&](std::size_t layer, bool weight) {
    auto& target = weight ? params.at(layer).weight : params.at(layer).bias;
    const auto& analytic = weight ? grads.at(layer).weight : grads.at(layer).bias;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double saved = target[i];
      target[i] = saved + h;
      const double up = loss(params);
      target[i] = saved - h;
      const double down = loss(params);
      target[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  };
  for (const auto& [layer, _] : ParamStore(params)) {
    check(layer, true);
    check(layer, false);
  }
  return worst;
}

/// A fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("subens_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace subens::testing
