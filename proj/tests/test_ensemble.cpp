#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "subens/data.hpp"
#include "subens/ensemble.hpp"
#include "subens/error.hpp"
#include "subens/perf.hpp"
#include "support.hpp"

using namespace subens;

namespace {

struct Fixture {
  TrainTest data;
  NetworkSpec spec;
  TrainConfig train{3, 32, {0.05, 0.9}};
  Fixture() {
    SyntheticConfig cfg;
    cfg.per_class = 40;
    cfg.noise_std = 0.3;
    data = synthetic_train_test(cfg, 10);
    spec = small_cnn_preset(data.train.example_shape(), data.train.num_classes);
  }
};

}  // namespace

TEST_CASE("averaging member probabilities") {
  const Tensor a = average_probabilities({Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {0, 1})});
  CHECK(a == Tensor::from({1, 2}, {0.5, 0.5}));
  const Tensor b = average_probabilities(
      {Tensor::from({1, 2}, {0.9, 0.1}), Tensor::from({1, 2}, {0.6, 0.4}), Tensor::from({1, 2}, {0.3, 0.7})});
  CHECK(std::abs(b[0] - 0.6) < 1e-15);
  CHECK(std::abs(b[1] - 0.4) < 1e-15);
  const Tensor one = Tensor::from({1, 3}, {0.2, 0.3, 0.5});
  CHECK(average_probabilities({one}) == one);
  CHECK_THROWS_AS(average_probabilities({}), ConfigError);
}

TEST_CASE("average is permutation invariant and convex") {
  Rng rng(51);
  std::vector<Tensor> probs;
  for (int i = 0; i < 5; ++i) {
    Tensor t({3, 4});
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += t[r * 4 + c] = rng.uniform();
      for (std::size_t c = 0; c < 4; ++c) t[r * 4 + c] /= s;
    }
    probs.push_back(t);
  }
  const Tensor forward_order = average_probabilities(probs);
  std::reverse(probs.begin(), probs.end());
  const Tensor reverse_order = average_probabilities(probs);
  for (std::size_t i = 0; i < forward_order.size(); ++i) {
    CHECK(std::abs(forward_order[i] - reverse_order[i]) <= 1e-12);
    double lo = 1.0, hi = 0.0;
    for (const auto& p : probs) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    CHECK(forward_order[i] >= lo);
    CHECK(forward_order[i] <= hi);
  }
}

TEST_CASE("sub-ensemble of one equals the plain model") {
  Fixture f;
  const SplitPoint sp = se_split(f.spec, 1);
  const ParamStore single = train_single(f.data.train, f.spec, f.train, 5);
  const SubEnsemble se = train_sub_ensemble(f.data.train, f.spec, sp, 1, f.train, 5);
  CHECK(se.predict(f.data.test.images) == forward(f.spec, single, f.data.test.images));
  const DeepEnsemble de = train_deep_ensemble(f.data.train, f.spec, 1, f.train, 5);
  CHECK(de.members().front().same_values(single));
}

TEST_CASE("sub-ensemble members share one frozen trunk and differ in their heads") {
  Fixture f;
  const SplitPoint sp = se_split(f.spec, 1);
  const SubEnsemble se = train_sub_ensemble(f.data.train, f.spec, sp, 3, f.train, 6);
  const std::uint64_t trunk = param_hash(train_single(f.data.train, f.spec, f.train, 6).slice(0, sp.index));
  CHECK(param_hash(se.trunk()) == trunk);
  std::vector<std::uint64_t> heads;
  for (std::size_t i = 0; i < se.size(); ++i) {
    CHECK(param_hash(se.member_network(i).trunk()) == trunk);
    heads.push_back(param_hash(se.members()[i]));
  }
  CHECK(heads[0] != heads[1]);
  CHECK(heads[0] != heads[2]);
  CHECK(heads[1] != heads[2]);
}

TEST_CASE("ensemble training is reproducible and prefixes match smaller ensembles") {
  Fixture f;
  const SplitPoint sp = se_split(f.spec, 2);
  const SubEnsemble a = train_sub_ensemble(f.data.train, f.spec, sp, 3, f.train, 9);
  const SubEnsemble b = train_sub_ensemble(f.data.train, f.spec, sp, 3, f.train, 9);
  const SubEnsemble two = train_sub_ensemble(f.data.train, f.spec, sp, 2, f.train, 9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.members()[i].same_values(b.members()[i]));
  CHECK(a.prefix(2).predict(f.data.test.images) == two.predict(f.data.test.images));

  const DeepEnsemble d = train_deep_ensemble(f.data.train, f.spec, 2, f.train, 9);
  CHECK(param_hash(d.members()[0]) != param_hash(d.members()[1]));
}

TEST_CASE("predict runs the trunk exactly once and matches stitched members") {
  Fixture f;
  const SplitPoint sp = se_split(f.spec, 1);
  const SubEnsemble se = train_sub_ensemble(f.data.train, f.spec, sp, 4, f.train, 2);
  const std::size_t before = se.trunk_evaluations();
  const Tensor got = se.predict(f.data.test.images);
  CHECK(se.trunk_evaluations() == before + 1);

  std::vector<Tensor> members;
  for (std::size_t i = 0; i < se.size(); ++i) {
    members.push_back(forward(f.spec, se.member_network(i).stitched(), f.data.test.images));
  }
  CHECK(got == average_probabilities(members));
  CHECK(se.predict_chunked(f.data.test.images, 7) == got);
}

TEST_CASE("deep ensemble inference cost is n single models") {
  const NetworkSpec spec = mnist_preset();
  const SplitPoint sp = se_split(spec, 1);
  CHECK(ensemble_flops(spec, sp, 4, EnsembleMode::Deep) == 4 * network_flops(spec));
}

TEST_CASE("ensemble checkpoints round trip") {
  Fixture f;
  const auto dir = testing::scratch_dir("ensemble_io");
  const SplitPoint sp = se_split(f.spec, 1);
  const SubEnsemble se = train_sub_ensemble(f.data.train, f.spec, sp, 2, f.train, 4);
  save_ensemble((dir / "sub").string(), se, 4, f.train, R"({"source":"synthetic"})");
  const SubEnsemble back = load_sub_ensemble((dir / "sub").string());
  CHECK(back.predict(f.data.test.images) == se.predict(f.data.test.images));
  CHECK(back.member_seeds() == se.member_seeds());
  const EnsembleManifest m = read_manifest((dir / "sub").string());
  CHECK(m.kind == "sub");
  CHECK(m.spec == f.spec);
  CHECK(m.split_index == sp.index);
  CHECK(m.train.epochs == 3);

  const DeepEnsemble de = train_deep_ensemble(f.data.train, f.spec, 2, f.train, 4);
  save_ensemble((dir / "deep").string(), de, 4, f.train);
  CHECK(load_deep_ensemble((dir / "deep").string()).predict(f.data.test.images) == de.predict(f.data.test.images));
  CHECK_THROWS(load_sub_ensemble((dir / "deep").string()));
}

TEST_CASE("training data must match the network") {
  Fixture f;
  const NetworkSpec wrong = small_cnn_preset({1, 8, 8}, 4);
  CHECK_THROWS_AS(train_sub_ensemble(f.data.train, wrong, se_split(wrong, 1), 2, f.train, 0), ConfigError);
  CHECK_THROWS_AS(train_sub_ensemble(f.data.train, f.spec, se_split(f.spec, 1), 0, f.train, 0), ConfigError);
}
