#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "subens/network.hpp"
#include "subens/optimizer.hpp"

namespace subens {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  SgdConfig sgd;

  void validate() const;
};

/// Produces the segment input for the given example rows (in order).
using BatchSource = std::function<Tensor(std::span<const std::size_t> rows)>;

struct TrainStats {
  double final_epoch_loss = 0.0;
  std::size_t steps = 0;
};

/// Minibatch SGD on layers [begin, spec.size()) with mean cross-entropy.
/// The segment must end in the network's softmax. Each epoch visits the
/// examples in a fresh permutation drawn from (shuffle_seed, epoch). A
/// non-finite loss raises TrainingError prefixed with `who`.
TrainStats train_segment(const NetworkSpec& spec, ParamStore& params, std::size_t begin, const BatchSource& inputs,
                         std::span<const int> labels, const TrainConfig& config, std::uint64_t shuffle_seed,
                         const std::string& who);

}  // namespace subens
