#include "subens/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "subens/error.hpp"
#include "subens/rng.hpp"

namespace subens {

const LayerParams* ParamStore::find(std::size_t layer) const {
  const auto it = layers_.find(layer);
  return it == layers_.end() ? nullptr : &it->second;
}

LayerParams& ParamStore::at(std::size_t layer) {
  const auto it = layers_.find(layer);
  if (it == layers_.end()) throw ConfigError("no parameters for layer " + std::to_string(layer));
  return it->second;
}

const LayerParams& ParamStore::at(std::size_t layer) const {
  const auto* p = find(layer);
  if (p == nullptr) throw ConfigError("no parameters for layer " + std::to_string(layer));
  return *p;
}

void ParamStore::set(std::size_t layer, LayerParams params) { layers_[layer] = std::move(params); }

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& [_, p] : layers_) total += p.weight.size() + p.bias.size();
  return total;
}

ParamStore ParamStore::slice(std::size_t begin, std::size_t end) const {
  ParamStore out(seed_);
  for (auto it = layers_.lower_bound(begin); it != layers_.end() && it->first < end; ++it) {
    out.layers_.insert(*it);
    if (is_frozen(it->first)) out.frozen_.insert(it->first);
  }
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [layer, p] : other.layers_) {
    if (!layers_.emplace(layer, p).second) {
      throw ConfigError("parameter stores overlap at layer " + std::to_string(layer));
    }
    if (other.is_frozen(layer)) frozen_.insert(layer);
  }
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      const auto byte = static_cast<unsigned char>(v >> (8 * i));
      bytes(&byte, 1);
    }
  }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (std::size_t d : t.shape()) u64(d);
    for (double v : t.data()) u64(std::bit_cast<std::uint64_t>(v));
  }
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace

std::uint64_t param_hash(const ParamStore& params) {
  Fnv1a h;
  for (const auto& [layer, p] : params) {
    h.u64(layer);
    h.tensor(p.weight);
    h.tensor(p.bias);
  }
  return h.value();
}

LayerParams init_layer_params(const LayerSpec& spec, std::uint64_t seed, std::size_t layer_index) {
  LayerParams p = empty_params(spec);
  Rng rng(derive_seed(seed, layer_index));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in(spec)));
  for (double& w : p.weight.data()) w = stddev * rng.normal();
  return p;
}

}  // namespace subens
