#include <algorithm>
#include <atomic>

#include "subens/kernels.hpp"

namespace subens::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Reference};
}

void set_backend(Backend b) noexcept { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() noexcept { return g_backend.load(std::memory_order_relaxed); }

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                acc += w[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw] *
                       x[((n * g.in_channels + ci) * g.in_h + ih - g.pad_top) * g.in_w + iw - g.pad_left];
              }
            }
          }
          y[((n * g.out_channels + co) * g.out_h + oh) * g.out_w + ow] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const double grad = dy[((n * g.out_channels + co) * g.out_h + oh) * g.out_w + ow];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                dx[((n * g.in_channels + ci) * g.in_h + ih - g.pad_top) * g.in_w + iw - g.pad_left] +=
                    grad * w[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db) {
  std::fill(dw.begin(), dw.end(), 0.0);
  std::fill(db.begin(), db.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const double grad = dy[((n * g.out_channels + co) * g.out_h + oh) * g.out_w + ow];
          db[co] += grad;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                dw[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw] +=
                    grad * x[((n * g.in_channels + ci) * g.in_h + ih - g.pad_top) * g.in_w + iw - g.pad_left];
              }
            }
          }
        }
      }
    }
  }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < g.in_features; ++i) acc += w[o * g.in_features + i] * x[n * g.in_features + i];
      y[n * g.out_features + o] = acc;
    }
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      const double grad = dy[n * g.out_features + o];
      for (std::size_t i = 0; i < g.in_features; ++i) dx[n * g.in_features + i] += grad * w[o * g.in_features + i];
    }
  }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db) {
  std::fill(dw.begin(), dw.end(), 0.0);
  std::fill(db.begin(), db.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      const double grad = dy[n * g.out_features + o];
      db[o] += grad;
      for (std::size_t i = 0; i < g.in_features; ++i) dw[o * g.in_features + i] += grad * x[n * g.in_features + i];
    }
  }
}

}  // namespace reference
}  // namespace subens::kernels
