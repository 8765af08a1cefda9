#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "subens/layer.hpp"
#include "subens/params.hpp"

namespace subens {

/// Ordered layer sequence. The final layer must be a softmax over
/// `num_classes` outputs, and consecutive layer shapes must compose.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;  // per example, e.g. {channels, height, width}
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return layers.size(); }

  /// Input shape of every layer plus the final output shape (size() + 1
  /// entries). Throws ConfigError if the layers are inconsistent.
  std::vector<Shape> shapes() const;

  void validate() const { (void)shapes(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Trunk = layers [0, index), task = layers [index, size).
struct SplitPoint {
  std::size_t index = 0;
  friend bool operator==(const SplitPoint&, const SplitPoint&) = default;
};

/// Throws ConfigError unless 0 < k < spec.size() (the softmax then always
/// lands in the task segment).
SplitPoint split(const NetworkSpec& spec, std::size_t k);

/// Named sub-ensemble split "SE-k": the task segment starts at the
/// (k+1)-th parameterized layer counted from the output. SE-1 ensembles the
/// last two parameterized layers.
SplitPoint se_split(const NetworkSpec& spec, std::size_t k);

/// Accepts "SE-k" or a plain layer index.
SplitPoint parse_split(const NetworkSpec& spec, std::string_view text);

// Architecture presets.

/// conv 32 3x3, relu, conv 64 3x3, relu, flatten, dense 128, relu, dense 10, softmax
/// on 1x28x28 input ("same" padding, stride 1).
NetworkSpec mnist_preset();

/// Small desk-scale CNN: conv 8 3x3, relu, maxpool, conv 16 3x3, relu,
/// maxpool, flatten, dense 32, relu, dense C, softmax.
NetworkSpec small_cnn_preset(Shape input_shape, std::size_t num_classes);

/// Line-oriented text form: an `input shape=CxHxW` line followed by one
/// `kind key=value ...` line per layer. `#` starts a comment.
std::string to_text(const NetworkSpec& spec);
NetworkSpec parse_network_text(std::string_view text);
NetworkSpec read_network_file(const std::string& path);

/// Fresh He-initialized parameters for parameterized layers in [begin, end).
ParamStore init_params(const NetworkSpec& spec, std::uint64_t seed, std::size_t begin, std::size_t end);
inline ParamStore init_params(const NetworkSpec& spec, std::uint64_t seed) {
  return init_params(spec, seed, 0, spec.size());
}

/// Runs layers [begin, end) on a batched input.
Tensor forward_range(const NetworkSpec& spec, const ParamStore& params, std::size_t begin, std::size_t end,
                     Tensor x);
inline Tensor forward(const NetworkSpec& spec, const ParamStore& params, Tensor x) {
  return forward_range(spec, params, 0, spec.size(), std::move(x));
}

/// Activations of layers [begin, end): element 0 is the input, element i+1
/// the output of layer begin+i.
std::vector<Tensor> forward_cached(const NetworkSpec& spec, const ParamStore& params, std::size_t begin,
                                   std::size_t end, Tensor x);

/// Parameter gradients for layers [begin, end) given activations from
/// forward_cached and the gradient at the segment output.
ParamStore backward_range(const NetworkSpec& spec, const ParamStore& params, std::size_t begin, std::size_t end,
                          const std::vector<Tensor>& activations, Tensor grad_output);

/// Trunk/task pair over one NetworkSpec.
class SplitNetwork {
 public:
  SplitNetwork(NetworkSpec spec, SplitPoint split, ParamStore trunk, ParamStore task);

  /// Splits a full parameter set at `split`.
  static SplitNetwork from_full(NetworkSpec spec, SplitPoint split, const ParamStore& full);

  const NetworkSpec& spec() const noexcept { return spec_; }
  SplitPoint split_point() const noexcept { return split_; }
  const ParamStore& trunk() const noexcept { return trunk_; }
  const ParamStore& task() const noexcept { return task_; }
  ParamStore& task() noexcept { return task_; }

  void freeze_trunk();
  bool trunk_frozen() const noexcept { return frozen_; }

  Tensor forward_trunk(Tensor x) const;
  Tensor forward_task(Tensor trunk_out) const;

  /// forward_task(forward_trunk(x)).
  Tensor forward(Tensor x) const { return forward_task(forward_trunk(std::move(x))); }

  ParamStore stitched() const;

 private:
  NetworkSpec spec_;
  SplitPoint split_;
  ParamStore trunk_;
  ParamStore task_;
  bool frozen_ = false;
};

/// Forward FLOPs for one example. A multiply-accumulate counts as 2;
/// activations, pooling, flatten and softmax count as 0.
///   conv2d: 2 * kh * kw * C_in * C_out * H_out * W_out
///   dense:  2 * in * out
std::uint64_t flops_of_layer(const LayerSpec& spec, const Shape& input_shape);

/// Sum of flops_of_layer over layers [begin, end).
std::uint64_t network_flops(const NetworkSpec& spec, std::size_t begin, std::size_t end);
inline std::uint64_t network_flops(const NetworkSpec& spec) { return network_flops(spec, 0, spec.size()); }

}  // namespace subens
