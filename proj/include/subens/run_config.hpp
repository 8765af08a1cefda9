#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "subens/data.hpp"
#include "subens/train.hpp"

namespace subens {

/// Pair of IDX files: images then labels.
struct IdxPaths {
  std::string images;
  std::string labels;
};

/// "images,labels" -> IdxPaths.
IdxPaths parse_idx_pair(const std::string& text);

/// "classes=4,size=12,per_class=200,test_per_class=100,noise=0.3,seed=0";
/// omitted keys keep their current values. Unknown keys are rejected.
void apply_synthetic_spec(const std::string& text, SyntheticConfig& synthetic, std::size_t& test_per_class);

struct RunConfig {
  std::string arch = "small";  // mnist | small | path to a network text file
  std::string split = "SE-1";  // SE-k or a layer index
  std::string mode = "sub";    // sub | deep
  std::size_t members = 5;
  std::size_t members_min = 1;
  std::uint64_t seed = 0;
  std::size_t runs = 10;  // correlate

  TrainConfig train{12, 32, {0.05, 0.9}};

  std::optional<IdxPaths> train_idx;
  std::optional<IdxPaths> test_idx;
  std::optional<IdxPaths> ood_idx;
  SyntheticConfig synthetic{4, 12, 200, 0.35, 0, 0};
  std::size_t test_per_class = 100;
  std::string ood_kind = "uniform_noise";
  std::vector<std::size_t> ood_members{1, 5, 10, 15};
  std::size_t calibration_bins = 10;

  std::string out_dir = ".";
  std::string csv;        // overrides the primary CSV file name
  std::string model_dir;  // train: output checkpoint dir; eval: input
  bool parallel = false;
  bool timing = false;

  /// Throws ConfigError on any invalid value.
  void validate() const;

  /// Overlays keys from a JSON object. Key names match the long CLI flags
  /// with '-' replaced by '_'. Unknown keys are rejected.
  void apply_json(const std::string& json_text);

  /// Stable JSON form of the data-source settings (stored in manifests).
  std::string data_json() const;
};

/// SUBENS_OUT_DIR if set and non-empty, else ".".
std::string default_out_dir();

}  // namespace subens
