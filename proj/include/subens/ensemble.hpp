#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "subens/data.hpp"
#include "subens/network.hpp"
#include "subens/train.hpp"

namespace subens {

/// One frozen trunk shared by N task heads. Member 0 is the task segment of
/// the initially trained full network; members 1..N-1 are freshly
/// initialized heads trained against the frozen trunk.
class SubEnsemble {
 public:
  SubEnsemble(NetworkSpec spec, SplitPoint split, std::shared_ptr<const ParamStore> trunk,
              std::vector<ParamStore> members, std::vector<std::uint64_t> member_seeds);

  const NetworkSpec& spec() const noexcept { return spec_; }
  SplitPoint split_point() const noexcept { return split_; }
  const ParamStore& trunk() const noexcept { return *trunk_; }
  const std::shared_ptr<const ParamStore>& shared_trunk() const noexcept { return trunk_; }
  const std::vector<ParamStore>& members() const noexcept { return members_; }
  const std::vector<std::uint64_t>& member_seeds() const noexcept { return member_seeds_; }
  std::size_t size() const noexcept { return members_.size(); }

  /// The first n members over the same trunk.
  SubEnsemble prefix(std::size_t n) const;

  /// Trunk paired with head i as a standalone network.
  SplitNetwork member_network(std::size_t i) const;

  /// Averaged class probabilities, (batch, C). The trunk runs once.
  Tensor predict(const Tensor& x) const;

  /// predict() over a large input in row chunks.
  Tensor predict_chunked(const Tensor& x, std::size_t chunk = 256) const;

  /// Number of trunk forward passes made by predict().
  std::size_t trunk_evaluations() const noexcept { return trunk_calls_->load(); }

 private:
  NetworkSpec spec_;
  SplitPoint split_;
  std::shared_ptr<const ParamStore> trunk_;
  std::vector<ParamStore> members_;
  std::vector<std::uint64_t> member_seeds_;
  std::shared_ptr<std::atomic<std::size_t>> trunk_calls_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// N independently trained full networks.
class DeepEnsemble {
 public:
  DeepEnsemble(NetworkSpec spec, std::vector<ParamStore> members, std::vector<std::uint64_t> member_seeds);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<ParamStore>& members() const noexcept { return members_; }
  const std::vector<std::uint64_t>& member_seeds() const noexcept { return member_seeds_; }
  std::size_t size() const noexcept { return members_.size(); }

  DeepEnsemble prefix(std::size_t n) const;

  Tensor predict(const Tensor& x) const;
  Tensor predict_chunked(const Tensor& x, std::size_t chunk = 256) const;

 private:
  NetworkSpec spec_;
  std::vector<ParamStore> members_;
  std::vector<std::uint64_t> member_seeds_;
};

/// Mean of member probability tensors, summed in member order then divided by N.
Tensor average_probabilities(const std::vector<Tensor>& member_probs);

/// Initialization seed of member i: derive_seed(seed, i) = splitmix64(seed + i).
/// The shuffle stream of a member is derive_seed(init_seed, kShuffleStream).
inline constexpr std::uint64_t kShuffleStream = 0x5B0FF1EULL;
std::uint64_t member_seed(std::uint64_t seed, std::size_t member_index) noexcept;

/// Trains the full network once, freezes its trunk, keeps its head as
/// member 0, and trains n-1 further heads on the frozen trunk.
SubEnsemble train_sub_ensemble(const Dataset& data, const NetworkSpec& spec, SplitPoint split, std::size_t n,
                               const TrainConfig& config, std::uint64_t seed);

/// n independent full trainings on the same data (no resampling).
DeepEnsemble train_deep_ensemble(const Dataset& data, const NetworkSpec& spec, std::size_t n,
                                 const TrainConfig& config, std::uint64_t seed);

/// One full training with member 0's seeds; identical to the first member
/// of either ensemble.
ParamStore train_single(const Dataset& data, const NetworkSpec& spec, const TrainConfig& config,
                        std::uint64_t seed);

// Checkpoint directories: manifest.json plus trunk.ckpt and member_<i>.ckpt
// (sub-ensemble) or member_<i>.ckpt holding full networks (deep ensemble).

struct EnsembleManifest {
  std::string kind;  // "sub" or "deep"
  NetworkSpec spec;
  std::size_t split_index = 0;  // sub-ensembles only
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> member_seeds;
  TrainConfig train;
  std::string extra_json = "{}";  // caller-defined object, e.g. data source
};

void save_ensemble(const std::string& dir, const SubEnsemble& ensemble, std::uint64_t seed,
                   const TrainConfig& config, const std::string& extra_json = "{}");
void save_ensemble(const std::string& dir, const DeepEnsemble& ensemble, std::uint64_t seed,
                   const TrainConfig& config, const std::string& extra_json = "{}");

EnsembleManifest read_manifest(const std::string& dir);
SubEnsemble load_sub_ensemble(const std::string& dir);
DeepEnsemble load_deep_ensemble(const std::string& dir);

}  // namespace subens
