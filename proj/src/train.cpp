#include "subens/train.hpp"

#include <cmath>

#include "subens/error.hpp"
#include "subens/loss.hpp"
#include "subens/rng.hpp"

namespace subens {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  SgdMomentum check(sgd);
  (void)check;
}

TrainStats train_segment(const NetworkSpec& spec, ParamStore& params, std::size_t begin, const BatchSource& inputs,
                         std::span<const int> labels, const TrainConfig& config, std::uint64_t shuffle_seed,
                         const std::string& who) {
  config.validate();
  spec.validate();
  if (labels.empty()) throw ConfigError(who + ": empty training set");
  if (begin >= spec.size()) throw ConfigError(who + ": training segment is empty");
  const std::size_t end = spec.size();
  const std::size_t n = labels.size();

  SgdMomentum optimizer(config.sgd);
  TrainStats stats;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(shuffle_seed, epoch));
    const auto order = rng.permutation(n);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      batch_labels.clear();
      for (std::size_t r : rows) batch_labels.push_back(labels[r]);

      std::vector<Tensor> acts;
      try {
        acts = forward_cached(spec, params, begin, end, inputs(rows));
      } catch (const NumericalError& e) {
        throw TrainingError(who + ": diverged in epoch " + std::to_string(epoch) + " (" + e.what() + ")");
      }
      const Tensor probs = std::move(acts.back());
      acts.pop_back();
      const double loss = cross_entropy_loss(probs, batch_labels);
      if (!std::isfinite(loss)) {
        throw TrainingError(who + ": non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(rows.size());

      // The softmax and cross-entropy gradients are fused: backpropagation
      // starts at the softmax input.
      try {
        const ParamStore grads =
            backward_range(spec, params, begin, end - 1, acts, softmax_cross_entropy_grad(probs, batch_labels));
        optimizer.step(params, grads);
      } catch (const NumericalError& e) {
        throw TrainingError(who + ": diverged in epoch " + std::to_string(epoch) + " (" + e.what() + ")");
      }
      ++stats.steps;
    }
    stats.final_epoch_loss = epoch_loss / static_cast<double>(n);
  }
  return stats;
}

}  // namespace subens
