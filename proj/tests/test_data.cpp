#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "subens/data.hpp"
#include "subens/error.hpp"
#include "support.hpp"

using namespace subens;

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

TEST_CASE("well-formed IDX files load with pixels scaled to [0, 1]") {
  const auto dir = testing::scratch_dir("idx_ok");
  {
    std::ofstream img(dir / "img", std::ios::binary);
    put_u32(img, 0x803);
    put_u32(img, 2);
    put_u32(img, 28);
    put_u32(img, 28);
    for (int i = 0; i < 2 * 28 * 28; ++i) img.put(static_cast<char>(i % 256));
    std::ofstream lab(dir / "lab", std::ios::binary);
    put_u32(lab, 0x801);
    put_u32(lab, 2);
    lab.put(3);
    lab.put(7);
  }
  const Dataset d = load_idx((dir / "img").string(), (dir / "lab").string());
  CHECK(d.size() == 2);
  CHECK(d.images.shape() == Shape{2, 1, 28, 28});
  CHECK(d.labels == std::vector<int>{3, 7});
  CHECK(d.num_classes == 8);
  CHECK(d.images[255] == 1.0);
  CHECK(d.images[1] == 1.0 / 255.0);
}

TEST_CASE("IDX with the wrong magic is rejected") {
  const auto dir = testing::scratch_dir("idx_bad");
  {
    std::ofstream img(dir / "img", std::ios::binary);
    put_u32(img, 0x802);
    put_u32(img, 1);
    put_u32(img, 1);
    put_u32(img, 1);
    img.put(0);
    std::ofstream lab(dir / "lab", std::ios::binary);
    put_u32(lab, 0x801);
    put_u32(lab, 1);
    lab.put(0);
  }
  CHECK_THROWS_AS(load_idx((dir / "img").string(), (dir / "lab").string()), FormatError);
}

TEST_CASE("IDX round trip preserves pixels bitwise") {
  SyntheticConfig cfg;
  cfg.per_class = 5;
  const Dataset d = synthetic_blobs(cfg);
  const auto dir = testing::scratch_dir("idx_rt");
  write_idx((dir / "img").string(), (dir / "lab").string(), d);
  const Dataset back = load_idx((dir / "img").string(), (dir / "lab").string());
  CHECK(back.images == d.images);
  CHECK(back.labels == d.labels);
  CHECK(back.num_classes == d.num_classes);
}

TEST_CASE("synthetic blobs are deterministic and noiseless classes are constant") {
  SyntheticConfig cfg;
  cfg.per_class = 6;
  CHECK(synthetic_blobs(cfg).images == synthetic_blobs(cfg).images);
  cfg.noise_std = 0.0;
  const Dataset d = synthetic_blobs(cfg);
  const std::size_t row = d.images.row_size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t first = static_cast<std::size_t>(d.labels[i]);
    for (std::size_t j = 0; j < row; ++j) CHECK(d.images[i * row + j] == d.images[first * row + j]);
  }
}

TEST_CASE("synthetic pixel values are quantized to the IDX grid") {
  const Dataset d = synthetic_blobs({});
  for (double v : d.images.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::round(v * 255.0) / 255.0 == v);
  }
}

TEST_CASE("standardization uses training statistics") {
  SyntheticConfig cfg;
  cfg.per_class = 50;
  const TrainTest tt = synthetic_train_test(cfg, 20);
  const auto& v = tt.train.images.values();
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x / static_cast<double>(v.size());
  for (double x : v) var += (x - mean) * (x - mean) / static_cast<double>(v.size());
  CHECK(std::abs(mean) <= 1e-9);
  CHECK(std::abs(var - 1.0) <= 1e-6);
  CHECK(tt.test.partition == Partition::Test);
  CHECK(tt.test.size() == 80);
}

TEST_CASE("a linear classifier separates the synthetic classes") {
  SyntheticConfig cfg;
  cfg.noise_std = 0.35;
  const TrainTest tt = synthetic_train_test(cfg, 100);
  // Nearest class mean is a linear rule; fitting it needs no training loop.
  const std::size_t row = tt.train.images.row_size(), c = tt.train.num_classes;
  std::vector<double> means(c * row, 0.0);
  std::vector<double> counts(c, 0.0);
  for (std::size_t i = 0; i < tt.train.size(); ++i) {
    const auto k = static_cast<std::size_t>(tt.train.labels[i]);
    counts[k] += 1.0;
    for (std::size_t j = 0; j < row; ++j) means[k * row + j] += tt.train.images[i * row + j];
  }
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < row; ++j) means[k * row + j] /= counts[k];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < tt.test.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < c; ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < row; ++j) {
        const double e = tt.test.images[i * row + j] - means[k * row + j];
        dist += e * e;
      }
      if (dist < best_d) best_d = dist, best = k;
    }
    correct += best == static_cast<std::size_t>(tt.test.labels[i]);
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(tt.test.size()) >= 0.95);
}

TEST_CASE("ood generators") {
  SyntheticConfig cfg;
  cfg.per_class = 10;
  const TrainTest tt = synthetic_train_test(cfg, 10);
  const Dataset noise = synthetic_ood(tt.test, OodKind::UniformNoise, 3);
  CHECK(noise.out_of_distribution);
  CHECK(noise.images.shape() == tt.test.images.shape());
  const auto [lo, hi] = std::minmax_element(tt.test.images.values().begin(), tt.test.images.values().end());
  for (double v : noise.images.values()) {
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }
  for (int l : noise.labels) CHECK(l == kOodLabel);
  CHECK(synthetic_ood(tt.test, OodKind::UniformNoise, 3).images == noise.images);

  Dataset zeros = tt.test;
  zeros.images = Tensor(zeros.images.shape(), 0.0);
  CHECK(synthetic_ood(zeros, OodKind::ShuffledPixels, 1).images == zeros.images);
  const Dataset shuffled = synthetic_ood(tt.test, OodKind::ShuffledPixels, 1);
  auto a = tt.test.images.values(), b = shuffled.images.values();
  CHECK(a != b);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK_THROWS_AS(parse_ood_kind("gaussian"), ConfigError);
}
