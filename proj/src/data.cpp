#include "subens/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "subens/error.hpp"
#include "subens/rng.hpp"

namespace subens {

Shape Dataset::example_shape() const {
  if (images.rank() < 2) throw ConfigError("dataset images need a batch axis");
  return Shape(images.shape().begin() + 1, images.shape().end());
}

void Dataset::validate() const {
  if (labels.empty()) throw ConfigError("dataset is empty");
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw ConfigError("dataset images " + shape_to_string(images.shape()) + " do not match " +
                      std::to_string(labels.size()) + " labels");
  }
  for (int label : labels) {
    const bool ok = out_of_distribution ? label == kOodLabel
                                        : label >= 0 && static_cast<std::size_t>(label) < num_classes;
    if (!ok) throw ConfigError("label " + std::to_string(label) + " invalid for " + std::to_string(num_classes) + " classes");
  }
}

Standardization Standardization::fit(const Dataset& train) {
  const auto px = train.images.data();
  if (px.empty()) throw ConfigError("cannot fit standardization on an empty split");
  double sum = 0.0;
  for (double v : px) sum += v;
  const double mean = sum / static_cast<double>(px.size());
  double sq = 0.0;
  for (double v : px) sq += (v - mean) * (v - mean);
  const double stddev = std::sqrt(sq / static_cast<double>(px.size()));
  return {mean, stddev > 0.0 ? stddev : 1.0};
}

Dataset Standardization::apply(Dataset data) const {
  for (double& v : data.images.data()) v = (v - mean) / stddev;
  return data;
}

TrainTest standardize(Dataset train_raw, Dataset test_raw) {
  const auto stats = Standardization::fit(train_raw);
  return {stats.apply(std::move(train_raw)), stats.apply(std::move(test_raw)), stats};
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) throw FormatError("truncated IDX header in " + path);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 8) & 0xFF), static_cast<char>(v & 0xFF)};
  out.write(b.data(), 4);
}

unsigned char quantize(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path, Partition partition,
                 std::size_t num_classes) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (be32(img, 0, images_path) != 0x00000803) throw FormatError("bad IDX image magic in " + images_path);
  if (be32(lab, 0, labels_path) != 0x00000801) throw FormatError("bad IDX label magic in " + labels_path);
  const std::size_t n = be32(img, 4, images_path);
  const std::size_t rows = be32(img, 8, images_path);
  const std::size_t cols = be32(img, 12, images_path);
  const std::size_t n_labels = be32(lab, 4, labels_path);
  if (n != n_labels) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images, " + std::to_string(n_labels) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX image file has a zero dimension");
  if (img.size() < 16 + n * rows * cols) throw FormatError("truncated IDX image data in " + images_path);
  if (lab.size() < 8 + n) throw FormatError("truncated IDX label data in " + labels_path);

  Dataset d;
  d.partition = partition;
  d.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) d.images[i] = static_cast<double>(img[16 + i]) / 255.0;
  d.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = num_classes != 0 ? num_classes : static_cast<std::size_t>(max_label) + 1;
  d.validate();
  return d;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& data) {
  if (data.images.rank() != 4 || data.images.dim(1) != 1) throw ConfigError("IDX export needs single-channel images");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw FormatError("cannot open IDX output files");
  const auto n = static_cast<std::uint32_t>(data.size());
  put_be32(img, 0x00000803);
  put_be32(img, n);
  put_be32(img, static_cast<std::uint32_t>(data.images.dim(2)));
  put_be32(img, static_cast<std::uint32_t>(data.images.dim(3)));
  for (double v : data.images.data()) img.put(static_cast<char>(quantize(v)));
  put_be32(lab, 0x00000801);
  put_be32(lab, n);
  for (int label : data.labels) {
    if (label < 0 || label > 255) throw ConfigError("IDX labels must lie in [0, 255]");
    lab.put(static_cast<char>(label));
  }
  if (!img || !lab) throw FormatError("IDX write failed");
}

namespace {

constexpr std::size_t kBumpsPerClass = 3;
constexpr double kBackground = 0.5;
constexpr double kBumpAmplitude = 0.4;

std::vector<double> class_template(std::size_t size, std::uint64_t seed, std::size_t cls) {
  Rng rng(derive_seed(derive_seed(seed, 0x7E3A11ULL), cls));
  const double sigma = std::max(1.0, static_cast<double>(size) / 5.0);
  std::vector<double> tpl(size * size, kBackground);
  for (std::size_t b = 0; b < kBumpsPerClass; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(size));
    const double cx = rng.uniform(0.0, static_cast<double>(size));
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * kBumpAmplitude;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double dx = static_cast<double>(x) + 0.5 - cx;
        tpl[y * size + x] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
  }
  return tpl;
}

}  // namespace

Dataset synthetic_blobs(const SyntheticConfig& cfg) {
  if (cfg.num_classes == 0 || cfg.image_size == 0 || cfg.per_class == 0) {
    throw ConfigError("synthetic dataset parameters must be >= 1");
  }
  if (!std::isfinite(cfg.noise_std) || cfg.noise_std < 0.0) throw ConfigError("noise_std must be finite and >= 0");
  std::vector<std::vector<double>> templates;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) templates.push_back(class_template(cfg.image_size, cfg.seed, c));

  const std::size_t pixels = cfg.image_size * cfg.image_size;
  const std::size_t n = cfg.num_classes * cfg.per_class;
  Dataset d;
  d.num_classes = cfg.num_classes;
  d.images = Tensor({n, 1, cfg.image_size, cfg.image_size});
  d.labels.resize(n);
  Rng noise(derive_seed(derive_seed(cfg.seed, 0x5EEDULL), cfg.stream));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % cfg.num_classes;
    d.labels[i] = static_cast<int>(cls);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = templates[cls][p] + cfg.noise_std * noise.normal();
      d.images[i * pixels + p] = static_cast<double>(quantize(v)) / 255.0;
    }
  }
  return d;
}

TrainTest synthetic_train_test(const SyntheticConfig& config, std::size_t test_per_class) {
  SyntheticConfig train_cfg = config;
  train_cfg.stream = 1;
  SyntheticConfig test_cfg = config;
  test_cfg.stream = 2;
  test_cfg.per_class = test_per_class;
  Dataset train = synthetic_blobs(train_cfg);
  Dataset test = synthetic_blobs(test_cfg);
  test.partition = Partition::Test;
  return standardize(std::move(train), std::move(test));
}

OodKind parse_ood_kind(const std::string& text) {
  if (text == "uniform_noise" || text == "uniform") return OodKind::UniformNoise;
  if (text == "shuffled_pixels" || text == "shuffled") return OodKind::ShuffledPixels;
  throw ConfigError("unknown OOD kind '" + text + "' (expected uniform_noise or shuffled_pixels)");
}

Dataset synthetic_ood(const Dataset& base, OodKind kind, std::uint64_t seed) {
  if (base.size() == 0 || base.images.empty()) throw ConfigError("OOD generation needs a non-empty base dataset");
  Dataset out = base;
  out.out_of_distribution = true;
  std::fill(out.labels.begin(), out.labels.end(), kOodLabel);
  Rng rng(derive_seed(seed, 0x00DULL));
  if (kind == OodKind::UniformNoise) {
    const auto [lo, hi] = std::minmax_element(base.images.data().begin(), base.images.data().end());
    for (double& v : out.images.data()) v = rng.uniform(*lo, *hi);
  } else {
    const std::size_t row = base.images.row_size();
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto perm = rng.permutation(row);
      for (std::size_t p = 0; p < row; ++p) out.images[i * row + p] = base.images[i * row + perm[p]];
    }
  }
  return out;
}

}  // namespace subens
