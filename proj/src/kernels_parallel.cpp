#include <algorithm>
#include <cstdint>

#include "subens/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace subens::kernels {

bool parallel_available() noexcept {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

namespace parallel {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 14;

using Index = std::int64_t;
}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const bool go_parallel = g.output_size() * g.in_channels * g.kernel_h * g.kernel_w >= kMinParallelWork;
  const auto batch = static_cast<Index>(g.batch);
  const auto out_c = static_cast<Index>(g.out_channels);
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index n = 0; n < batch; ++n) {
    for (Index co = 0; co < out_c; ++co) {
      const double* wc = w.data() + static_cast<std::size_t>(co) * g.in_channels * g.kernel_h * g.kernel_w;
      const double* xn = x.data() + static_cast<std::size_t>(n) * g.in_channels * g.in_h * g.in_w;
      double* yc = y.data() + (static_cast<std::size_t>(n) * g.out_channels + static_cast<std::size_t>(co)) *
                                  g.out_h * g.out_w;
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          double acc = b[static_cast<std::size_t>(co)];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              const double* xrow = xn + (ci * g.in_h + ih - g.pad_top) * g.in_w;
              const double* wrow = wc + (ci * g.kernel_h + kh) * g.kernel_w;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                acc += wrow[kw] * xrow[iw - g.pad_left];
              }
            }
          }
          yc[oh * g.out_w + ow] = acc;
        }
      }
    }
  }
}

// Each thread owns one (n, ci) input plane and gathers into it in
// (co, oh, ow, kh, kw) order, matching the reference scatter order.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
  const bool go_parallel = g.output_size() * g.in_channels * g.kernel_h * g.kernel_w >= kMinParallelWork;
  const auto batch = static_cast<Index>(g.batch);
  const auto in_c = static_cast<Index>(g.in_channels);
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index n = 0; n < batch; ++n) {
    for (Index ci = 0; ci < in_c; ++ci) {
      double* plane = dx.data() + (static_cast<std::size_t>(n) * g.in_channels + static_cast<std::size_t>(ci)) *
                                      g.in_h * g.in_w;
      std::fill(plane, plane + g.in_h * g.in_w, 0.0);
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const double* dyc = dy.data() + (static_cast<std::size_t>(n) * g.out_channels + co) * g.out_h * g.out_w;
        const double* wk =
            w.data() + (co * g.in_channels + static_cast<std::size_t>(ci)) * g.kernel_h * g.kernel_w;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const double grad = dyc[oh * g.out_w + ow];
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                plane[(ih - g.pad_top) * g.in_w + iw - g.pad_left] += grad * wk[kh * g.kernel_w + kw];
              }
            }
          }
        }
      }
    }
  }
}

// Each thread owns one (co, ci) filter slice and accumulates over (n, oh, ow).
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> db) {
  const bool go_parallel = g.output_size() * g.in_channels * g.kernel_h * g.kernel_w >= kMinParallelWork;
  const auto out_c = static_cast<Index>(g.out_channels);
  const auto in_c = static_cast<Index>(g.in_channels);
#pragma omp parallel for schedule(static) if (go_parallel)
  for (Index co = 0; co < out_c; ++co) {
    double acc = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* dyc =
          dy.data() + (n * g.out_channels + static_cast<std::size_t>(co)) * g.out_h * g.out_w;
      for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) acc += dyc[i];
    }
    db[static_cast<std::size_t>(co)] = acc;
  }
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index co = 0; co < out_c; ++co) {
    for (Index ci = 0; ci < in_c; ++ci) {
      double* wk = dw.data() + (static_cast<std::size_t>(co) * g.in_channels + static_cast<std::size_t>(ci)) *
                                   g.kernel_h * g.kernel_w;
      std::fill(wk, wk + g.kernel_h * g.kernel_w, 0.0);
      for (std::size_t n = 0; n < g.batch; ++n) {
        const double* dyc =
            dy.data() + (n * g.out_channels + static_cast<std::size_t>(co)) * g.out_h * g.out_w;
        const double* xp = x.data() + (n * g.in_channels + static_cast<std::size_t>(ci)) * g.in_h * g.in_w;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const double grad = dyc[oh * g.out_w + ow];
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
              const std::size_t ih = oh * g.stride + kh;
              if (ih < g.pad_top || ih - g.pad_top >= g.in_h) continue;
              for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::size_t iw = ow * g.stride + kw;
                if (iw < g.pad_left || iw - g.pad_left >= g.in_w) continue;
                wk[kh * g.kernel_w + kw] += grad * xp[(ih - g.pad_top) * g.in_w + iw - g.pad_left];
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
  const bool go_parallel = g.batch * g.in_features * g.out_features >= kMinParallelWork;
  const auto batch = static_cast<Index>(g.batch);
  const auto out_f = static_cast<Index>(g.out_features);
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index n = 0; n < batch; ++n) {
    for (Index o = 0; o < out_f; ++o) {
      const double* wr = w.data() + static_cast<std::size_t>(o) * g.in_features;
      const double* xr = x.data() + static_cast<std::size_t>(n) * g.in_features;
      double acc = b[static_cast<std::size_t>(o)];
      for (std::size_t i = 0; i < g.in_features; ++i) acc += wr[i] * xr[i];
      y[static_cast<std::size_t>(n) * g.out_features + static_cast<std::size_t>(o)] = acc;
    }
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
  const bool go_parallel = g.batch * g.in_features * g.out_features >= kMinParallelWork;
  const auto batch = static_cast<Index>(g.batch);
  const auto in_f = static_cast<Index>(g.in_features);
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index n = 0; n < batch; ++n) {
    for (Index i = 0; i < in_f; ++i) {
      const double* dyr = dy.data() + static_cast<std::size_t>(n) * g.out_features;
      double acc = 0.0;
      for (std::size_t o = 0; o < g.out_features; ++o) acc += dyr[o] * w[o * g.in_features + static_cast<std::size_t>(i)];
      dx[static_cast<std::size_t>(n) * g.in_features + static_cast<std::size_t>(i)] = acc;
    }
  }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db) {
  const bool go_parallel = g.batch * g.in_features * g.out_features >= kMinParallelWork;
  const auto out_f = static_cast<Index>(g.out_features);
  const auto in_f = static_cast<Index>(g.in_features);
#pragma omp parallel for schedule(static) if (go_parallel)
  for (Index o = 0; o < out_f; ++o) {
    double acc = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) acc += dy[n * g.out_features + static_cast<std::size_t>(o)];
    db[static_cast<std::size_t>(o)] = acc;
  }
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (Index o = 0; o < out_f; ++o) {
    for (Index i = 0; i < in_f; ++i) {
      double acc = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        acc += dy[n * g.out_features + static_cast<std::size_t>(o)] *
               x[n * g.in_features + static_cast<std::size_t>(i)];
      }
      dw[static_cast<std::size_t>(o) * g.in_features + static_cast<std::size_t>(i)] = acc;
    }
  }
}

}  // namespace parallel
}  // namespace subens::kernels
