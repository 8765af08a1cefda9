#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "subens/tensor.hpp"

namespace subens {

enum class Padding { Same, Valid };

struct Conv2d {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

struct Dense {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};
/// 2x2 window, stride 2, floor sizing. Ties resolve to the first maximum in row-major order.
struct MaxPool2x2 {
  friend bool operator==(const MaxPool2x2&, const MaxPool2x2&) = default;
};
struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};
/// Softmax over the feature axis of a [batch, C] tensor.
struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerSpec = std::variant<Conv2d, Dense, Relu, MaxPool2x2, Flatten, Softmax>;

/// Weight and bias of a conv2d or dense layer.
/// conv2d: weight [out, in, kh, kw]; dense: weight [out, in]; bias [out].
struct LayerParams {
  Tensor weight;
  Tensor bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct LayerGradients {
  Tensor grad_input;
  std::optional<LayerParams> grad_params;
};

std::string layer_kind(const LayerSpec& spec);
bool has_params(const LayerSpec& spec) noexcept;

/// Throws ConfigError if any dimension parameter is zero.
void validate_layer(const LayerSpec& spec);

/// Per-example output shape (no batch axis) for a per-example input shape.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input_shape);

/// Zero-filled parameter tensors with the right shapes. Throws for parameterless layers.
LayerParams empty_params(const LayerSpec& spec);

/// Fan-in used for He initialization.
std::size_t fan_in(const LayerSpec& spec);

/// `input` carries a leading batch axis. Output is checked for finiteness.
Tensor forward_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input);

/// Gradients of a scalar loss with respect to the layer input and parameters,
/// given the gradient with respect to the layer output.
LayerGradients backward_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input,
                              const Tensor& grad_output);

}  // namespace subens
