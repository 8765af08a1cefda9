#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>

#include "subens/layer.hpp"

namespace subens {

/// Trainable parameters keyed by layer index. Only conv2d and dense layers
/// have entries. Frozen layers are skipped by the optimizer.
class ParamStore {
 public:
  using Map = std::map<std::size_t, LayerParams>;

  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

  bool contains(std::size_t layer) const { return layers_.contains(layer); }
  const LayerParams* find(std::size_t layer) const;
  LayerParams& at(std::size_t layer);
  const LayerParams& at(std::size_t layer) const;
  void set(std::size_t layer, LayerParams params);

  Map::const_iterator begin() const noexcept { return layers_.begin(); }
  Map::const_iterator end() const noexcept { return layers_.end(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;

  void freeze(std::size_t layer) { frozen_.insert(layer); }
  bool is_frozen(std::size_t layer) const { return frozen_.contains(layer); }

  /// Entries for layers in [begin, end); frozen flags carry over.
  ParamStore slice(std::size_t begin, std::size_t end) const;

  /// Adds every entry of `other`; throws ConfigError on overlapping layers.
  void merge(const ParamStore& other);

  /// Equality of the numeric contents only (seed and frozen flags ignored).
  bool same_values(const ParamStore& other) const { return layers_ == other.layers_; }

 private:
  std::uint64_t seed_ = 0;
  Map layers_;
  std::set<std::size_t> frozen_;
};

/// FNV-1a over layer indices, shapes, and the raw bytes of every value.
std::uint64_t param_hash(const ParamStore& params);

/// He-normal weights (std = sqrt(2 / fan_in)) and zero bias. The stream is
/// derived from (seed, layer_index) so a layer's initial values do not depend
/// on which other layers are initialized alongside it.
LayerParams init_layer_params(const LayerSpec& spec, std::uint64_t seed, std::size_t layer_index);

}  // namespace subens
