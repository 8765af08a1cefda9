#include "subens/loss.hpp"

#include <algorithm>
#include <cmath>

#include "subens/error.hpp"

namespace subens {

namespace {

void check_inputs(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2) throw ConfigError("expected probabilities (N, C), got " + shape_to_string(probs.shape()));
  if (probs.dim(0) != labels.size()) throw ConfigError("label count does not match batch size");
  if (labels.empty()) throw ConfigError("empty batch");
  const std::size_t classes = probs.dim(1);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[n]) + " out of range [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

double cross_entropy_loss(const Tensor& probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  const std::size_t classes = probs.dim(1);
  double total = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) row_sum += probs[n * classes + c];
    if (std::abs(row_sum - 1.0) > 1e-6) throw ConfigError("probability row does not sum to 1");
    const double p = probs[n * classes + static_cast<std::size_t>(labels[n])];
    total -= std::log(std::max(p, kProbabilityFloor));
  }
  return total / static_cast<double>(labels.size());
}

Tensor softmax_cross_entropy_grad(const Tensor& probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  const std::size_t classes = probs.dim(1);
  const double scale = 1.0 / static_cast<double>(labels.size());
  Tensor grad = probs;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    grad[n * classes + static_cast<std::size_t>(labels[n])] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) grad[n * classes + c] *= scale;
  }
  return grad;
}

}  // namespace subens
