#include "subens/ensemble.hpp"

#include "subens/error.hpp"
#include "subens/rng.hpp"

namespace subens {

namespace {

// Trunk features for the whole training set are cached when they fit in
// this many doubles; otherwise the frozen trunk is re-run per minibatch.
// Both paths produce identical rows because layers act row by row.
constexpr std::size_t kFeatureCacheLimit = std::size_t{32} << 20;

void check_training_data(const Dataset& data, const NetworkSpec& spec) {
  spec.validate();
  data.validate();
  if (data.out_of_distribution) throw ConfigError("cannot train on an OOD dataset");
  if (data.num_classes != spec.num_classes) {
    throw ConfigError("dataset has " + std::to_string(data.num_classes) + " classes, network expects " +
                      std::to_string(spec.num_classes));
  }
  if (data.example_shape() != spec.input_shape) {
    throw ConfigError("dataset example shape " + shape_to_string(data.example_shape()) +
                      " does not match network input " + shape_to_string(spec.input_shape));
  }
}

BatchSource image_source(const Dataset& data) {
  return [&data](std::span<const std::size_t> rows) { return data.images.gather_batch(rows); };
}

std::uint64_t shuffle_seed(std::uint64_t init_seed) { return derive_seed(init_seed, kShuffleStream); }

}  // namespace

std::uint64_t member_seed(std::uint64_t seed, std::size_t member_index) noexcept {
  return derive_seed(seed, member_index);
}

Tensor average_probabilities(const std::vector<Tensor>& member_probs) {
  if (member_probs.empty()) throw ConfigError("cannot average an empty ensemble");
  Tensor sum = member_probs.front();
  for (std::size_t m = 1; m < member_probs.size(); ++m) {
    if (member_probs[m].shape() != sum.shape()) throw ConfigError("member outputs differ in shape");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += member_probs[m][i];
  }
  const auto count = static_cast<double>(member_probs.size());
  for (double& v : sum.data()) v /= count;
  return sum;
}

SubEnsemble::SubEnsemble(NetworkSpec spec, SplitPoint split_at, std::shared_ptr<const ParamStore> trunk,
                         std::vector<ParamStore> members, std::vector<std::uint64_t> member_seeds)
    : spec_(std::move(spec)),
      split_(split(spec_, split_at.index)),
      trunk_(std::move(trunk)),
      members_(std::move(members)),
      member_seeds_(std::move(member_seeds)) {
  if (!trunk_) throw ConfigError("sub-ensemble needs a trunk");
  if (members_.empty()) throw ConfigError("sub-ensemble needs at least one member");
  if (member_seeds_.size() != members_.size()) throw ConfigError("one seed per member required");
  for (const auto& [layer, _] : *trunk_) {
    if (layer >= split_.index) throw ConfigError("trunk holds task layer " + std::to_string(layer));
  }
  for (const auto& m : members_) {
    for (const auto& [layer, _] : m) {
      if (layer < split_.index) throw ConfigError("member holds trunk layer " + std::to_string(layer));
    }
  }
}

SubEnsemble SubEnsemble::prefix(std::size_t n) const {
  if (n == 0 || n > members_.size()) throw ConfigError("prefix size out of range");
  return SubEnsemble(spec_, split_, trunk_, {members_.begin(), members_.begin() + static_cast<std::ptrdiff_t>(n)},
                     {member_seeds_.begin(), member_seeds_.begin() + static_cast<std::ptrdiff_t>(n)});
}

SplitNetwork SubEnsemble::member_network(std::size_t i) const {
  SplitNetwork net(spec_, split_, *trunk_, members_.at(i));
  net.freeze_trunk();
  return net;
}

Tensor SubEnsemble::predict(const Tensor& x) const {
  const Tensor features = forward_range(spec_, *trunk_, 0, split_.index, x);
  trunk_calls_->fetch_add(1);
  std::vector<Tensor> probs;
  probs.reserve(members_.size());
  for (const auto& head : members_) probs.push_back(forward_range(spec_, head, split_.index, spec_.size(), features));
  return average_probabilities(probs);
}

namespace {

template <class Predict>
Tensor predict_in_chunks(const Tensor& x, std::size_t chunk, std::size_t classes, Predict&& predict) {
  if (chunk == 0) throw ConfigError("chunk size must be >= 1");
  const std::size_t n = x.dim(0);
  Tensor out({n, classes});
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    const Tensor part = predict(x.slice_batch(start, stop));
    std::copy(part.data().begin(), part.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * classes));
  }
  return out;
}

}  // namespace

Tensor SubEnsemble::predict_chunked(const Tensor& x, std::size_t chunk) const {
  return predict_in_chunks(x, chunk, spec_.num_classes, [this](const Tensor& part) { return predict(part); });
}

DeepEnsemble::DeepEnsemble(NetworkSpec spec, std::vector<ParamStore> members, std::vector<std::uint64_t> member_seeds)
    : spec_(std::move(spec)), members_(std::move(members)), member_seeds_(std::move(member_seeds)) {
  spec_.validate();
  if (members_.empty()) throw ConfigError("deep ensemble needs at least one member");
  if (member_seeds_.size() != members_.size()) throw ConfigError("one seed per member required");
}

DeepEnsemble DeepEnsemble::prefix(std::size_t n) const {
  if (n == 0 || n > members_.size()) throw ConfigError("prefix size out of range");
  return DeepEnsemble(spec_, {members_.begin(), members_.begin() + static_cast<std::ptrdiff_t>(n)},
                      {member_seeds_.begin(), member_seeds_.begin() + static_cast<std::ptrdiff_t>(n)});
}

Tensor DeepEnsemble::predict(const Tensor& x) const {
  std::vector<Tensor> probs;
  probs.reserve(members_.size());
  for (const auto& m : members_) probs.push_back(forward(spec_, m, x));
  return average_probabilities(probs);
}

Tensor DeepEnsemble::predict_chunked(const Tensor& x, std::size_t chunk) const {
  return predict_in_chunks(x, chunk, spec_.num_classes, [this](const Tensor& part) { return predict(part); });
}

ParamStore train_single(const Dataset& data, const NetworkSpec& spec, const TrainConfig& config, std::uint64_t seed) {
  check_training_data(data, spec);
  const std::uint64_t s0 = member_seed(seed, 0);
  ParamStore full = init_params(spec, s0);
  train_segment(spec, full, 0, image_source(data), data.labels, config, shuffle_seed(s0), "member 0");
  return full;
}

SubEnsemble train_sub_ensemble(const Dataset& data, const NetworkSpec& spec, SplitPoint split_at, std::size_t n,
                               const TrainConfig& config, std::uint64_t seed) {
  if (n == 0) throw ConfigError("ensemble size must be >= 1");
  config.validate();
  const SplitPoint sp = split(spec, split_at.index);
  check_training_data(data, spec);

  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(member_seed(seed, i));

  const ParamStore initial = train_single(data, spec, config, seed);
  ParamStore trunk = initial.slice(0, sp.index);
  for (const auto& [layer, _] : initial) {
    if (layer < sp.index) trunk.freeze(layer);
  }
  auto shared_trunk = std::make_shared<const ParamStore>(std::move(trunk));

  std::vector<ParamStore> heads;
  heads.push_back(initial.slice(sp.index, spec.size()));

  if (n > 1) {
    BatchSource features;
    Tensor cached;
    const std::size_t feature_size = shape_size(spec.shapes()[sp.index]) * data.size();
    if (feature_size <= kFeatureCacheLimit) {
      cached = forward_range(spec, *shared_trunk, 0, sp.index, data.images);
      features = [&cached](std::span<const std::size_t> rows) { return cached.gather_batch(rows); };
    } else {
      features = [&](std::span<const std::size_t> rows) {
        return forward_range(spec, *shared_trunk, 0, sp.index, data.images.gather_batch(rows));
      };
    }
    for (std::size_t i = 1; i < n; ++i) {
      ParamStore head = init_params(spec, seeds[i], sp.index, spec.size());
      train_segment(spec, head, sp.index, features, data.labels, config, shuffle_seed(seeds[i]),
                    "sub-ensemble member " + std::to_string(i));
      heads.push_back(std::move(head));
    }
  }
  return SubEnsemble(spec, sp, std::move(shared_trunk), std::move(heads), std::move(seeds));
}

DeepEnsemble train_deep_ensemble(const Dataset& data, const NetworkSpec& spec, std::size_t n,
                                 const TrainConfig& config, std::uint64_t seed) {
  if (n == 0) throw ConfigError("ensemble size must be >= 1");
  config.validate();
  check_training_data(data, spec);
  std::vector<ParamStore> members;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t si = member_seed(seed, i);
    ParamStore full = init_params(spec, si);
    train_segment(spec, full, 0, image_source(data), data.labels, config, shuffle_seed(si),
                  "deep-ensemble member " + std::to_string(i));
    members.push_back(std::move(full));
    seeds.push_back(si);
  }
  return DeepEnsemble(spec, std::move(members), std::move(seeds));
}

}  // namespace subens
