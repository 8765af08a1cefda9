#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "subens/tensor.hpp"

namespace subens {

enum class Partition { Train, Test };

/// Label used for examples that carry no class (OOD sets).
inline constexpr int kOodLabel = -1;

struct Dataset {
  Tensor images;  // (n, channels, height, width)
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Partition partition = Partition::Train;
  bool out_of_distribution = false;

  std::size_t size() const noexcept { return labels.size(); }
  Shape example_shape() const;

  /// Throws ConfigError unless n >= 1, images and labels agree, and every
  /// label lies in [0, C) (OOD sets: every label is kOodLabel).
  void validate() const;
};

/// Scalar pixel standardization fitted on a training split.
struct Standardization {
  double mean = 0.0;
  double stddev = 1.0;

  static Standardization fit(const Dataset& train);
  Dataset apply(Dataset data) const;
};

struct TrainTest {
  Dataset train;
  Dataset test;
  Standardization stats;
};

/// Fits standardization on `train_raw` only and applies it to both splits.
TrainTest standardize(Dataset train_raw, Dataset test_raw);

// IDX (big-endian): images magic 0x00000803, dims (n, rows, cols), u8 pixels;
// labels magic 0x00000801, n, u8 labels.

/// Pixels are scaled to [0, 1]; no standardization is applied. When
/// `num_classes` is 0 it is inferred as max(label) + 1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Partition partition = Partition::Train, std::size_t num_classes = 0);

/// Writes a single-channel dataset with pixels in [0, 1] (rounded to the
/// nearest 1/255).
void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& data);

struct SyntheticConfig {
  std::size_t num_classes = 4;
  std::size_t image_size = 12;
  std::size_t per_class = 200;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  /// Selects an independent noise stream over the same class templates.
  std::uint64_t stream = 0;
};

/// Each class is a fixed template of Gaussian bumps on a grey background,
/// determined by (seed, class). Examples add i.i.d. Gaussian noise and are
/// clamped to [0, 1] and quantized to multiples of 1/255, so the result is
/// exactly representable in IDX. Classes are interleaved: example i has
/// label i % num_classes.
Dataset synthetic_blobs(const SyntheticConfig& config);

/// Train split uses noise stream 1, test split stream 2; standardized with
/// training statistics.
TrainTest synthetic_train_test(const SyntheticConfig& config, std::size_t test_per_class);

enum class OodKind { UniformNoise, ShuffledPixels };

OodKind parse_ood_kind(const std::string& text);

/// Same shape as `base`, labels set to kOodLabel.
/// UniformNoise: i.i.d. uniform over [min, max] of the base pixels.
/// ShuffledPixels: each image's pixels under an independent random permutation.
Dataset synthetic_ood(const Dataset& base, OodKind kind, std::uint64_t seed);

}  // namespace subens
