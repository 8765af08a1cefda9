#pragma once

#include <span>

#include "subens/tensor.hpp"

namespace subens {

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -log(max(p_true, 1e-12)). Rows must sum to 1
/// within 1e-6 and labels must lie in [0, C).
double cross_entropy_loss(const Tensor& probs, std::span<const int> labels);

/// Gradient of the mean cross-entropy with respect to the logits feeding a
/// softmax: (p - onehot(label)) / batch.
Tensor softmax_cross_entropy_grad(const Tensor& probs, std::span<const int> labels);

}  // namespace subens
