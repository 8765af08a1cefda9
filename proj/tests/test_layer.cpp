#include <cmath>
#include <numeric>

#include "doctest.h"
#include "subens/error.hpp"
#include "subens/layer.hpp"
#include "support.hpp"

using namespace subens;

TEST_CASE("relu forward and backward") {
  const Tensor x = Tensor::from({1, 3}, {-1, 0, 2});
  CHECK(forward_layer(Relu{}, nullptr, x) == Tensor::from({1, 3}, {0, 0, 2}));
  const auto g = backward_layer(Relu{}, nullptr, Tensor::from({1, 2}, {-1, 2}), Tensor::from({1, 2}, {1, 1}));
  CHECK(g.grad_input == Tensor::from({1, 2}, {0, 1}));
  CHECK_FALSE(g.grad_params);
}

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor y = forward_layer(Softmax{}, nullptr, Tensor::from({1, 4}, {0, 0, 0, 0}));
  for (double v : y.values()) CHECK(v == 0.25);
}

TEST_CASE("softmax is shift invariant and rows sum to one") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor z = testing::random_tensor({2, 6}, rng, 5.0);
    Tensor shifted = z;
    const double c = 100.0 * rng.normal();
    for (double& v : shifted.values()) v += c;
    const Tensor a = forward_layer(Softmax{}, nullptr, z);
    const Tensor b = forward_layer(Softmax{}, nullptr, shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    CHECK(std::abs(a[0] + a[1] + a[2] + a[3] + a[4] + a[5] - 1.0) < 1e-12);
  }
}

TEST_CASE("1x1 convolution scales the input") {
  const Conv2d spec{1, 1, 1, 1, 1, Padding::Same};
  const LayerParams p{Tensor::from({1, 1, 1, 1}, {2}), Tensor::from({1}, {0})};
  const Tensor y = forward_layer(spec, &p, Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}));
  CHECK(y == Tensor::from({1, 1, 2, 2}, {2, 4, 6, 8}));
}

TEST_CASE("3x3 valid convolution of ones sums to nine") {
  const Conv2d spec{1, 1, 3, 3, 1, Padding::Valid};
  const LayerParams p{Tensor({1, 1, 3, 3}, 1.0), Tensor({1}, 0.0)};
  const Tensor y = forward_layer(spec, &p, Tensor({1, 1, 3, 3}, 1.0));
  CHECK(y == Tensor::from({1, 1, 1, 1}, {9}));
}

TEST_CASE("same padding keeps size, stride halves it") {
  CHECK(layer_output_shape(Conv2d{1, 4, 3, 3, 1, Padding::Same}, {1, 7, 7}) == Shape{4, 7, 7});
  CHECK(layer_output_shape(Conv2d{1, 4, 3, 3, 2, Padding::Same}, {1, 7, 7}) == Shape{4, 4, 4});
  CHECK(layer_output_shape(Conv2d{1, 4, 3, 3, 1, Padding::Valid}, {1, 7, 7}) == Shape{4, 5, 5});
  CHECK(layer_output_shape(MaxPool2x2{}, {3, 7, 6}) == Shape{3, 3, 3});
  CHECK(layer_output_shape(Flatten{}, {3, 2, 2}) == Shape{12});
  CHECK_THROWS_AS(layer_output_shape(Conv2d{2, 4, 3, 3, 1, Padding::Same}, {1, 7, 7}), ConfigError);
  CHECK_THROWS_AS(layer_output_shape(Dense{5, 2}, {4}), ConfigError);
}

TEST_CASE("dense 1->1 weight gradient is input times upstream gradient") {
  const LayerParams p{Tensor::from({1, 1}, {0.7}), Tensor::from({1}, {0.1})};
  const auto g = backward_layer(Dense{1, 1}, &p, Tensor::from({1, 1}, {3.0}), Tensor::from({1, 1}, {2.0}));
  REQUIRE(g.grad_params);
  CHECK(g.grad_params->weight[0] == 6.0);
  CHECK(g.grad_params->bias[0] == 2.0);
  CHECK(g.grad_input[0] == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("maxpool routes the gradient to the first maximum") {
  const Tensor x = Tensor::from({1, 1, 2, 2}, {1, 5, 5, 0});
  CHECK(forward_layer(MaxPool2x2{}, nullptr, x) == Tensor::from({1, 1, 1, 1}, {5}));
  const auto g = backward_layer(MaxPool2x2{}, nullptr, x, Tensor::from({1, 1, 1, 1}, {1}));
  CHECK(g.grad_input == Tensor::from({1, 1, 2, 2}, {0, 1, 0, 0}));
}

TEST_CASE("random 4x4 conv net gradients match finite differences") {
  NetworkSpec spec;
  spec.input_shape = {1, 4, 4};
  spec.num_classes = 3;
  spec.layers = {Conv2d{1, 2, 3, 3, 1, Padding::Same}, Relu{}, Flatten{}, Dense{32, 3}, Softmax{}};
  Rng rng(11);
  const ParamStore params = testing::random_params(spec, rng);
  const Tensor x = testing::random_batch(spec, 3, rng);
  CHECK(testing::max_gradient_error(spec, params, x, rng) < 1e-4);
}

TEST_CASE("layer shape mismatches are configuration errors") {
  const LayerParams p{Tensor({2, 3}, 0.0), Tensor({2}, 0.0)};
  CHECK_THROWS_AS(forward_layer(Dense{3, 2}, &p, Tensor({1, 4}, 0.0)), ConfigError);
  CHECK_THROWS_AS(forward_layer(Dense{3, 2}, nullptr, Tensor({1, 3}, 0.0)), ConfigError);
}

TEST_CASE("non-finite outputs are numerical errors") {
  const LayerParams p{Tensor::from({1, 1}, {1e308}), Tensor({1}, 0.0)};
  CHECK_THROWS_AS(forward_layer(Dense{1, 1}, &p, Tensor::from({1, 1}, {1e308})), NumericalError);
}

TEST_CASE("He initialization uses fan-in variance and zero bias") {
  const Dense spec{400, 300};
  const LayerParams p = init_layer_params(spec, 17, 0);
  double sq = 0.0;
  for (double w : p.weight.values()) sq += w * w;
  CHECK(sq / static_cast<double>(p.weight.size()) == doctest::Approx(2.0 / 400.0).epsilon(0.02));
  for (double b : p.bias.values()) CHECK(b == 0.0);
  CHECK(init_layer_params(spec, 17, 0) == p);
  CHECK_FALSE(init_layer_params(spec, 17, 1) == p);
}
