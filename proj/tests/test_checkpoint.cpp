#include <fstream>

#include "doctest.h"
#include "subens/checkpoint.hpp"
#include "subens/error.hpp"
#include "support.hpp"

using namespace subens;

TEST_CASE("checkpoint round trip is bit exact and keeps frozen flags") {
  Rng rng(61);
  const NetworkSpec spec = testing::random_network(rng);
  ParamStore params = testing::random_params(spec, rng);
  params.set_seed(1234);
  params.freeze(params.begin()->first);
  const auto path = (testing::scratch_dir("ckpt") / "a.ckpt").string();
  write_checkpoint(path, params);
  const ParamStore back = read_checkpoint(path);
  CHECK(back.same_values(params));
  CHECK(back.seed() == 1234);
  CHECK(back.is_frozen(params.begin()->first));
  CHECK(param_hash(back) == param_hash(params));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = testing::scratch_dir("ckpt_bad");
  ParamStore params;
  params.set(0, {Tensor::from({1, 2}, {1, 2}), Tensor::from({1}, {3})});
  const auto good = (dir / "good.ckpt").string();
  write_checkpoint(good, params);

  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto write = [&](const std::string& name, const std::string& content) {
    const auto p = (dir / name).string();
    std::ofstream(p, std::ios::binary) << content;
    return p;
  };
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(read_checkpoint(write("magic.ckpt", magic)), FormatError);
  CHECK_THROWS_AS(read_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 3))), FormatError);
  CHECK_THROWS_AS(read_checkpoint(write("long.ckpt", bytes + "x")), FormatError);
  CHECK_THROWS_AS(read_checkpoint((dir / "missing.ckpt").string()), FormatError);
}

TEST_CASE("parameter hash depends on values and layer index") {
  ParamStore a, b, c;
  a.set(0, {Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0})});
  b.set(0, {Tensor::from({1}, {1.0000000001}), Tensor::from({1}, {0.0})});
  c.set(1, {Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0})});
  CHECK(param_hash(a) != param_hash(b));
  CHECK(param_hash(a) != param_hash(c));
}

TEST_CASE("param store slice and merge") {
  ParamStore p;
  for (std::size_t i : {0, 2, 5}) p.set(i, {Tensor({1}, double(i)), Tensor({1}, 0.0)});
  const ParamStore low = p.slice(0, 3);
  const ParamStore high = p.slice(3, 9);
  CHECK(low.layer_count() == 2);
  CHECK(high.layer_count() == 1);
  ParamStore joined = low;
  joined.merge(high);
  CHECK(joined.same_values(p));
  CHECK_THROWS_AS(joined.merge(high), ConfigError);
}
