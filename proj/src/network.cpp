#include "subens/network.hpp"

#include <charconv>

#include "subens/error.hpp"

namespace subens {

std::vector<Shape> NetworkSpec::shapes() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  if (input_shape.empty() || shape_size(input_shape) == 0) throw ConfigError("network input shape is empty");
  if (!std::holds_alternative<Softmax>(layers.back())) throw ConfigError("final layer must be softmax");
  std::vector<Shape> out;
  out.reserve(layers.size() + 1);
  out.push_back(input_shape);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      out.push_back(layer_output_shape(layers[i], out.back()));
    } catch (const ConfigError& e) {
      throw ConfigError("layer " + std::to_string(i) + " (" + layer_kind(layers[i]) + "): " + e.what());
    }
  }
  if (out.back() != Shape{num_classes}) {
    throw ConfigError("network output " + shape_to_string(out.back()) + " does not match " +
                      std::to_string(num_classes) + " classes");
  }
  return out;
}

SplitPoint split(const NetworkSpec& spec, std::size_t k) {
  if (k == 0 || k >= spec.size()) {
    throw ConfigError("split index " + std::to_string(k) + " out of range (0, " + std::to_string(spec.size()) +
                      "): trunk and task segments must both be non-empty");
  }
  return SplitPoint{k};
}

SplitPoint se_split(const NetworkSpec& spec, std::size_t k) {
  if (k == 0) throw ConfigError("SE-k requires k >= 1");
  std::size_t seen = 0;
  for (std::size_t i = spec.size(); i-- > 0;) {
    if (has_params(spec.layers[i]) && ++seen == k + 1) return split(spec, i);
  }
  throw ConfigError("SE-" + std::to_string(k) + " needs " + std::to_string(k + 1) +
                    " parameterized layers, network has " + std::to_string(seen));
}

SplitPoint parse_split(const NetworkSpec& spec, std::string_view text) {
  std::size_t value = 0;
  const bool named = text.starts_with("SE-") || text.starts_with("se-");
  const std::string_view digits = named ? text.substr(3) : text;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) {
    throw ConfigError("invalid split '" + std::string(text) + "': expected SE-k or a layer index");
  }
  return named ? se_split(spec, value) : split(spec, value);
}

NetworkSpec mnist_preset() {
  NetworkSpec spec;
  spec.input_shape = {1, 28, 28};
  spec.num_classes = 10;
  spec.layers = {
      Conv2d{1, 32, 3, 3, 1, Padding::Same},
      Relu{},
      Conv2d{32, 64, 3, 3, 1, Padding::Same},
      Relu{},
      Flatten{},
      Dense{64 * 28 * 28, 128},
      Relu{},
      Dense{128, 10},
      Softmax{},
  };
  return spec;
}

NetworkSpec small_cnn_preset(Shape input_shape, std::size_t num_classes) {
  if (input_shape.size() != 3 || input_shape[1] < 4 || input_shape[2] < 4) {
    throw ConfigError("small preset needs a (C, H>=4, W>=4) input");
  }
  const std::size_t pooled_h = input_shape[1] / 2 / 2;
  const std::size_t pooled_w = input_shape[2] / 2 / 2;
  NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers = {
      Conv2d{input_shape[0], 8, 3, 3, 1, Padding::Same},
      Relu{},
      MaxPool2x2{},
      Conv2d{8, 16, 3, 3, 1, Padding::Same},
      Relu{},
      MaxPool2x2{},
      Flatten{},
      Dense{16 * pooled_h * pooled_w, 32},
      Relu{},
      Dense{32, num_classes},
      Softmax{},
  };
  spec.validate();
  return spec;
}

ParamStore init_params(const NetworkSpec& spec, std::uint64_t seed, std::size_t begin, std::size_t end) {
  ParamStore params(seed);
  for (std::size_t i = begin; i < end && i < spec.size(); ++i) {
    if (has_params(spec.layers[i])) params.set(i, init_layer_params(spec.layers[i], seed, i));
  }
  return params;
}

Tensor forward_range(const NetworkSpec& spec, const ParamStore& params, std::size_t begin, std::size_t end,
                     Tensor x) {
  if (begin > end || end > spec.size()) throw ConfigError("layer range out of bounds");
  for (std::size_t i = begin; i < end; ++i) x = forward_layer(spec.layers[i], params.find(i), x);
  return x;
}

std::vector<Tensor> forward_cached(const NetworkSpec& spec, const ParamStore& params, std::size_t begin,
                                   std::size_t end, Tensor x) {
  if (begin > end || end > spec.size()) throw ConfigError("layer range out of bounds");
  std::vector<Tensor> acts;
  acts.reserve(end - begin + 1);
  acts.push_back(std::move(x));
  for (std::size_t i = begin; i < end; ++i) acts.push_back(forward_layer(spec.layers[i], params.find(i), acts.back()));
  return acts;
}

ParamStore backward_range(const NetworkSpec& spec, const ParamStore& params, std::size_t begin, std::size_t end,
                          const std::vector<Tensor>& activations, Tensor grad_output) {
  if (activations.size() != end - begin + 1) throw ConfigError("activation cache does not match layer range");
  ParamStore grads(params.seed());
  for (std::size_t i = end; i-- > begin;) {
    auto g = backward_layer(spec.layers[i], params.find(i), activations[i - begin], grad_output);
    if (g.grad_params) grads.set(i, std::move(*g.grad_params));
    grad_output = std::move(g.grad_input);
  }
  return grads;
}

SplitNetwork::SplitNetwork(NetworkSpec spec, SplitPoint split_at, ParamStore trunk, ParamStore task)
    : spec_(std::move(spec)), split_(split(spec_, split_at.index)), trunk_(std::move(trunk)), task_(std::move(task)) {
  spec_.validate();
  for (const auto& [layer, _] : trunk_) {
    if (layer >= split_.index) throw ConfigError("trunk parameters include task layer " + std::to_string(layer));
  }
  for (const auto& [layer, _] : task_) {
    if (layer < split_.index) throw ConfigError("task parameters include trunk layer " + std::to_string(layer));
  }
}

SplitNetwork SplitNetwork::from_full(NetworkSpec spec, SplitPoint split_at, const ParamStore& full) {
  ParamStore trunk = full.slice(0, split_at.index);
  ParamStore task = full.slice(split_at.index, spec.size());
  return SplitNetwork(std::move(spec), split_at, std::move(trunk), std::move(task));
}

void SplitNetwork::freeze_trunk() {
  for (const auto& [layer, _] : trunk_) trunk_.freeze(layer);
  frozen_ = true;
}

Tensor SplitNetwork::forward_trunk(Tensor x) const { return forward_range(spec_, trunk_, 0, split_.index, std::move(x)); }

Tensor SplitNetwork::forward_task(Tensor trunk_out) const {
  return forward_range(spec_, task_, split_.index, spec_.size(), std::move(trunk_out));
}

ParamStore SplitNetwork::stitched() const {
  ParamStore full = trunk_;
  full.merge(task_);
  return full;
}

std::uint64_t flops_of_layer(const LayerSpec& spec, const Shape& input_shape) {
  if (const auto* c = std::get_if<Conv2d>(&spec)) {
    const Shape out = layer_output_shape(spec, input_shape);
    return 2ULL * c->kernel_h * c->kernel_w * c->in_channels * c->out_channels * out[1] * out[2];
  }
  if (const auto* d = std::get_if<Dense>(&spec)) return 2ULL * d->in_features * d->out_features;
  return 0;
}

std::uint64_t network_flops(const NetworkSpec& spec, std::size_t begin, std::size_t end) {
  if (begin > end || end > spec.size()) throw ConfigError("layer range out of bounds");
  const auto shapes = spec.shapes();
  std::uint64_t total = 0;
  for (std::size_t i = begin; i < end; ++i) total += flops_of_layer(spec.layers[i], shapes[i]);
  return total;
}

}  // namespace subens
