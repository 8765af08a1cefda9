#include "subens/layer.hpp"

#include <algorithm>
#include <cmath>

#include "subens/error.hpp"
#include "subens/kernels.hpp"

namespace subens {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (padding == Padding::Same) return (in - 1) / stride + 1;
  if (in < kernel) {
    throw ConfigError("conv2d valid padding: input extent " + std::to_string(in) + " smaller than kernel " +
                      std::to_string(kernel));
  }
  return (in - kernel) / stride + 1;
}

kernels::ConvGeometry conv_geometry(const Conv2d& c, const Shape& batched_input) {
  if (batched_input.size() != 4 || batched_input[1] != c.in_channels) {
    throw ConfigError("conv2d expects input (N, " + std::to_string(c.in_channels) + ", H, W), got " +
                      shape_to_string(batched_input));
  }
  kernels::ConvGeometry g;
  g.batch = batched_input[0];
  g.in_channels = c.in_channels;
  g.in_h = batched_input[2];
  g.in_w = batched_input[3];
  g.out_channels = c.out_channels;
  g.kernel_h = c.kernel_h;
  g.kernel_w = c.kernel_w;
  g.stride = c.stride;
  g.out_h = conv_out_extent(g.in_h, c.kernel_h, c.stride, c.padding);
  g.out_w = conv_out_extent(g.in_w, c.kernel_w, c.stride, c.padding);
  if (c.padding == Padding::Same) {
    g.pad_top = (c.kernel_h - 1) / 2;
    g.pad_left = (c.kernel_w - 1) / 2;
  }
  return g;
}

kernels::DenseGeometry dense_geometry(const Dense& d, const Shape& batched_input) {
  if (batched_input.size() != 2 || batched_input[1] != d.in_features) {
    throw ConfigError("dense expects input (N, " + std::to_string(d.in_features) + "), got " +
                      shape_to_string(batched_input));
  }
  return {batched_input[0], d.in_features, d.out_features};
}

const LayerParams& require_params(const LayerParams* params, const LayerSpec& spec) {
  if (params == nullptr) throw ConfigError(layer_kind(spec) + " layer requires parameters");
  const LayerParams expected = empty_params(spec);
  if (params->weight.shape() != expected.weight.shape() || params->bias.shape() != expected.bias.shape()) {
    throw ConfigError(layer_kind(spec) + " parameter shape mismatch: weight " +
                      shape_to_string(params->weight.shape()) + ", expected " +
                      shape_to_string(expected.weight.shape()));
  }
  return *params;
}

void require_same_shape(const Tensor& a, const Shape& expected, const char* what) {
  if (a.shape() != expected) {
    throw ConfigError(std::string(what) + " shape " + shape_to_string(a.shape()) + ", expected " +
                      shape_to_string(expected));
  }
}

Tensor softmax_rows(const Tensor& input) {
  if (input.rank() != 2) throw ConfigError("softmax expects (N, C), got " + shape_to_string(input.shape()));
  Tensor out(input.shape());
  const std::size_t classes = input.dim(1);
  for (std::size_t n = 0; n < input.dim(0); ++n) {
    const auto row = input.data().subspan(n * classes, classes);
    const auto dst = out.data().subspan(n * classes, classes);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = std::exp(row[c] - peak);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

struct PoolGeometry {
  std::size_t batch, channels, in_h, in_w, out_h, out_w;
};

PoolGeometry pool_geometry(const Shape& s) {
  if (s.size() != 4 || s[2] < 2 || s[3] < 2) {
    throw ConfigError("maxpool2x2 expects (N, C, H>=2, W>=2), got " + shape_to_string(s));
  }
  return {s[0], s[1], s[2], s[3], s[2] / 2, s[3] / 2};
}

// Index of the first maximum within each 2x2 window, row-major within the window.
std::size_t pool_argmax(const Tensor& input, const PoolGeometry& g, std::size_t plane, std::size_t oh,
                        std::size_t ow) {
  const std::size_t base = plane * g.in_h * g.in_w;
  std::size_t best = base + (2 * oh) * g.in_w + 2 * ow;
  for (std::size_t dh = 0; dh < 2; ++dh) {
    for (std::size_t dw = 0; dw < 2; ++dw) {
      const std::size_t idx = base + (2 * oh + dh) * g.in_w + 2 * ow + dw;
      if (input[idx] > input[best]) best = idx;
    }
  }
  return best;
}

}  // namespace

std::string layer_kind(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const Conv2d&) { return std::string("conv2d"); },
                        [](const Dense&) { return std::string("dense"); },
                        [](const Relu&) { return std::string("relu"); },
                        [](const MaxPool2x2&) { return std::string("maxpool2x2"); },
                        [](const Flatten&) { return std::string("flatten"); },
                        [](const Softmax&) { return std::string("softmax"); },
                    },
                    spec);
}

bool has_params(const LayerSpec& spec) noexcept {
  return std::holds_alternative<Conv2d>(spec) || std::holds_alternative<Dense>(spec);
}

void validate_layer(const LayerSpec& spec) {
  if (const auto* c = std::get_if<Conv2d>(&spec)) {
    if (c->in_channels == 0 || c->out_channels == 0 || c->kernel_h == 0 || c->kernel_w == 0 || c->stride == 0) {
      throw ConfigError("conv2d dimension parameters must be >= 1");
    }
  } else if (const auto* d = std::get_if<Dense>(&spec)) {
    if (d->in_features == 0 || d->out_features == 0) throw ConfigError("dense dimension parameters must be >= 1");
  }
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  validate_layer(spec);
  return std::visit(Overloaded{
                        [&](const Conv2d& c) {
                          Shape batched{1};
                          batched.insert(batched.end(), in.begin(), in.end());
                          const auto g = conv_geometry(c, batched);
                          return Shape{g.out_channels, g.out_h, g.out_w};
                        },
                        [&](const Dense& d) {
                          if (in.size() != 1 || in[0] != d.in_features) {
                            throw ConfigError("dense expects (" + std::to_string(d.in_features) + "), got " +
                                              shape_to_string(in));
                          }
                          return Shape{d.out_features};
                        },
                        [&](const Relu&) { return in; },
                        [&](const MaxPool2x2&) {
                          if (in.size() != 3) throw ConfigError("maxpool2x2 expects (C, H, W)");
                          const auto g = pool_geometry(Shape{1, in[0], in[1], in[2]});
                          return Shape{g.channels, g.out_h, g.out_w};
                        },
                        [&](const Flatten&) { return Shape{shape_size(in)}; },
                        [&](const Softmax&) {
                          if (in.size() != 1) throw ConfigError("softmax expects a flat feature vector");
                          return in;
                        },
                    },
                    spec);
}

LayerParams empty_params(const LayerSpec& spec) {
  if (const auto* c = std::get_if<Conv2d>(&spec)) {
    return {Tensor({c->out_channels, c->in_channels, c->kernel_h, c->kernel_w}), Tensor({c->out_channels})};
  }
  if (const auto* d = std::get_if<Dense>(&spec)) {
    return {Tensor({d->out_features, d->in_features}), Tensor({d->out_features})};
  }
  throw ConfigError(layer_kind(spec) + " layer has no parameters");
}

std::size_t fan_in(const LayerSpec& spec) {
  if (const auto* c = std::get_if<Conv2d>(&spec)) return c->in_channels * c->kernel_h * c->kernel_w;
  if (const auto* d = std::get_if<Dense>(&spec)) return d->in_features;
  return 0;
}

Tensor forward_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input) {
  validate_layer(spec);
  const bool use_parallel = kernels::backend() == kernels::Backend::Parallel;
  Tensor out = std::visit(
      Overloaded{
          [&](const Conv2d& c) {
            const auto& p = require_params(params, spec);
            const auto g = conv_geometry(c, input.shape());
            Tensor y({g.batch, g.out_channels, g.out_h, g.out_w});
            if (use_parallel) {
              kernels::parallel::conv2d_forward(g, input.data(), p.weight.data(), p.bias.data(), y.data());
            } else {
              kernels::reference::conv2d_forward(g, input.data(), p.weight.data(), p.bias.data(), y.data());
            }
            return y;
          },
          [&](const Dense& d) {
            const auto& p = require_params(params, spec);
            const auto g = dense_geometry(d, input.shape());
            Tensor y({g.batch, g.out_features});
            if (use_parallel) {
              kernels::parallel::dense_forward(g, input.data(), p.weight.data(), p.bias.data(), y.data());
            } else {
              kernels::reference::dense_forward(g, input.data(), p.weight.data(), p.bias.data(), y.data());
            }
            return y;
          },
          [&](const Relu&) {
            Tensor y = input;
            for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
            return y;
          },
          [&](const MaxPool2x2&) {
            const auto g = pool_geometry(input.shape());
            Tensor y({g.batch, g.channels, g.out_h, g.out_w});
            for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane) {
              for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                  y[(plane * g.out_h + oh) * g.out_w + ow] = input[pool_argmax(input, g, plane, oh, ow)];
                }
              }
            }
            return y;
          },
          [&](const Flatten&) {
            if (input.rank() < 1) throw ConfigError("flatten expects a batch axis");
            return input.reshaped({input.dim(0), input.dim(0) == 0 ? 0 : input.size() / input.dim(0)});
          },
          [&](const Softmax&) { return softmax_rows(input); },
      },
      spec);
  out.require_finite(("forward " + layer_kind(spec)).c_str());
  return out;
}

LayerGradients backward_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& input,
                              const Tensor& grad_output) {
  validate_layer(spec);
  const bool use_parallel = kernels::backend() == kernels::Backend::Parallel;
  LayerGradients result = std::visit(
      Overloaded{
          [&](const Conv2d& c) {
            const auto& p = require_params(params, spec);
            const auto g = conv_geometry(c, input.shape());
            require_same_shape(grad_output, {g.batch, g.out_channels, g.out_h, g.out_w}, "conv2d grad_output");
            LayerGradients r{Tensor(input.shape()), empty_params(spec)};
            auto& gp = *r.grad_params;
            if (use_parallel) {
              kernels::parallel::conv2d_backward_input(g, grad_output.data(), p.weight.data(), r.grad_input.data());
              kernels::parallel::conv2d_backward_params(g, grad_output.data(), input.data(), gp.weight.data(),
                                                        gp.bias.data());
            } else {
              kernels::reference::conv2d_backward_input(g, grad_output.data(), p.weight.data(),
                                                        r.grad_input.data());
              kernels::reference::conv2d_backward_params(g, grad_output.data(), input.data(), gp.weight.data(),
                                                         gp.bias.data());
            }
            return r;
          },
          [&](const Dense& d) {
            const auto& p = require_params(params, spec);
            const auto g = dense_geometry(d, input.shape());
            require_same_shape(grad_output, {g.batch, g.out_features}, "dense grad_output");
            LayerGradients r{Tensor(input.shape()), empty_params(spec)};
            auto& gp = *r.grad_params;
            if (use_parallel) {
              kernels::parallel::dense_backward_input(g, grad_output.data(), p.weight.data(), r.grad_input.data());
              kernels::parallel::dense_backward_params(g, grad_output.data(), input.data(), gp.weight.data(),
                                                       gp.bias.data());
            } else {
              kernels::reference::dense_backward_input(g, grad_output.data(), p.weight.data(), r.grad_input.data());
              kernels::reference::dense_backward_params(g, grad_output.data(), input.data(), gp.weight.data(),
                                                        gp.bias.data());
            }
            return r;
          },
          [&](const Relu&) {
            require_same_shape(grad_output, input.shape(), "relu grad_output");
            LayerGradients r{Tensor(input.shape()), std::nullopt};
            for (std::size_t i = 0; i < input.size(); ++i) r.grad_input[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
            return r;
          },
          [&](const MaxPool2x2&) {
            const auto g = pool_geometry(input.shape());
            require_same_shape(grad_output, {g.batch, g.channels, g.out_h, g.out_w}, "maxpool2x2 grad_output");
            LayerGradients r{Tensor(input.shape()), std::nullopt};
            for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane) {
              for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                  r.grad_input[pool_argmax(input, g, plane, oh, ow)] += grad_output[(plane * g.out_h + oh) * g.out_w + ow];
                }
              }
            }
            return r;
          },
          [&](const Flatten&) {
            if (grad_output.size() != input.size()) throw ConfigError("flatten grad_output size mismatch");
            return LayerGradients{grad_output.reshaped(input.shape()), std::nullopt};
          },
          [&](const Softmax&) {
            const Tensor probs = softmax_rows(input);
            require_same_shape(grad_output, probs.shape(), "softmax grad_output");
            LayerGradients r{Tensor(input.shape()), std::nullopt};
            const std::size_t classes = input.dim(1);
            for (std::size_t n = 0; n < input.dim(0); ++n) {
              double dot = 0.0;
              for (std::size_t c = 0; c < classes; ++c) dot += grad_output[n * classes + c] * probs[n * classes + c];
              for (std::size_t c = 0; c < classes; ++c) {
                r.grad_input[n * classes + c] = probs[n * classes + c] * (grad_output[n * classes + c] - dot);
              }
            }
            return r;
          },
      },
      spec);
  const std::string where = "backward " + layer_kind(spec);
  result.grad_input.require_finite(where.c_str());
  if (result.grad_params) {
    result.grad_params->weight.require_finite(where.c_str());
    result.grad_params->bias.require_finite(where.c_str());
  }
  return result;
}

}  // namespace subens
