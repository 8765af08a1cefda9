#include "doctest.h"
#include "subens/error.hpp"
#include "subens/network.hpp"
#include "support.hpp"

using namespace subens;

namespace {

NetworkSpec four_layer() {
  NetworkSpec spec;
  spec.input_shape = {3};
  spec.num_classes = 2;
  spec.layers = {Dense{3, 4}, Relu{}, Dense{4, 2}, Softmax{}};
  return spec;
}

}  // namespace

TEST_CASE("split partitions layers by index") {
  const NetworkSpec spec = four_layer();
  CHECK(split(spec, 3).index == 3);
  CHECK_THROWS_AS(split(spec, 4), ConfigError);
  CHECK_THROWS_AS(split(spec, 0), ConfigError);
}

TEST_CASE("mnist preset SE-1 keeps the last two dense layers in the task") {
  const NetworkSpec spec = mnist_preset();
  REQUIRE(spec.size() == 9);
  const SplitPoint sp = se_split(spec, 1);
  CHECK(sp.index == 5);
  CHECK(spec.size() - sp.index == 4);
  CHECK(std::holds_alternative<Dense>(spec.layers[sp.index]));
  CHECK(parse_split(spec, "SE-1") == sp);
  CHECK(parse_split(spec, "SE-2").index == 2);
  CHECK(parse_split(spec, "7").index == 7);
  CHECK_THROWS_AS(parse_split(spec, "SE-9"), ConfigError);
  CHECK_THROWS_AS(parse_split(spec, "bogus"), ConfigError);
}

TEST_CASE("mnist preset shapes") {
  const auto shapes = mnist_preset().shapes();
  CHECK(shapes.front() == Shape{1, 28, 28});
  CHECK(shapes[5] == Shape{50176});
  CHECK(shapes.back() == Shape{10});
}

TEST_CASE("network must end in softmax with the declared class count") {
  NetworkSpec spec = four_layer();
  spec.layers.pop_back();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = four_layer();
  spec.num_classes = 3;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("split evaluation equals full evaluation bitwise") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkSpec spec = testing::random_network(rng);
    const ParamStore params = testing::random_params(spec, rng);
    const Tensor x = testing::random_batch(spec, 2, rng);
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const SplitNetwork net = SplitNetwork::from_full(spec, split(spec, k), params);
      CHECK(net.forward(x) == forward(spec, params, x));
      CHECK(net.stitched().same_values(params));
    }
  }
}

TEST_CASE("trunk output reused by several heads is unchanged") {
  Rng rng(32);
  const NetworkSpec spec = testing::random_network(rng);
  const ParamStore params = testing::random_params(spec, rng);
  const SplitNetwork net = SplitNetwork::from_full(spec, se_split(spec, 1), params);
  const Tensor x = testing::random_batch(spec, 2, rng);
  const Tensor t = net.forward_trunk(x);
  for (int i = 0; i < 5; ++i) CHECK(net.forward_trunk(x) == t);
}

TEST_CASE("flops per layer") {
  CHECK(flops_of_layer(Dense{128, 10}, {128}) == 2560);
  CHECK(flops_of_layer(Conv2d{1, 32, 3, 3, 1, Padding::Same}, {1, 28, 28}) == 451584);
  CHECK(flops_of_layer(Flatten{}, {64, 28, 28}) == 0);
  CHECK(flops_of_layer(Relu{}, {10}) == 0);
}

TEST_CASE("network flops are additive over layers") {
  const NetworkSpec spec = mnist_preset();
  const auto shapes = spec.shapes();
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) sum += flops_of_layer(spec.layers[i], shapes[i]);
  CHECK(network_flops(spec) == sum);
  CHECK(network_flops(spec, 0, 5) + network_flops(spec, 5, 9) == sum);
}

TEST_CASE("network text round trips") {
  const NetworkSpec spec = small_cnn_preset({2, 10, 10}, 5);
  CHECK(parse_network_text(to_text(spec)) == spec);
  CHECK(parse_network_text(to_text(mnist_preset())) == mnist_preset());
}

TEST_CASE("network text defaults and errors") {
  const NetworkSpec spec = parse_network_text(
      "# tiny\ninput shape=1x4x4\nconv2d in_channels=1 out_channels=2 kernel_h=3 kernel_w=3\nrelu\nflatten\n"
      "dense in_features=32 out_features=3\nsoftmax\n");
  CHECK(std::get<Conv2d>(spec.layers[0]).stride == 1);
  CHECK(std::get<Conv2d>(spec.layers[0]).padding == Padding::Same);
  CHECK(spec.num_classes == 3);
  CHECK_THROWS_AS(parse_network_text("input shape=4\nwobble\nsoftmax\n"), FormatError);
  CHECK_THROWS_AS(parse_network_text("input shape=4\ndense in_features=4 out_features=2 colour=red\nsoftmax\n"),
                  FormatError);
}
