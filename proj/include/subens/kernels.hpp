#pragma once

#include <cstddef>
#include <span>

namespace subens::kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0, in_h = 0, in_w = 0;
  std::size_t out_channels = 0, out_h = 0, out_w = 0;
  std::size_t kernel_h = 0, kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad_top = 0, pad_left = 0;

  std::size_t input_size() const noexcept { return batch * in_channels * in_h * in_w; }
  std::size_t output_size() const noexcept { return batch * out_channels * out_h * out_w; }
  std::size_t weight_size() const noexcept { return out_channels * in_channels * kernel_h * kernel_w; }
};

struct DenseGeometry {
  std::size_t batch = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

// Both backends accumulate every output element in the same order, so their
// results are bitwise identical; the parallel one only distributes
// independent output elements across threads.

namespace reference {
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx);
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db);

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db);
}  // namespace reference

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx);
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db);

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db);
}  // namespace parallel

enum class Backend { Reference, Parallel };

/// Process-wide kernel selection used by forward_layer/backward_layer.
/// Defaults to Reference.
void set_backend(Backend backend) noexcept;
Backend backend() noexcept;

/// True when the parallel kernels were compiled with OpenMP.
bool parallel_available() noexcept;

}  // namespace subens::kernels
