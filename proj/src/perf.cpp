#include "subens/perf.hpp"

#include <chrono>
#include <memory>

#include "subens/ensemble.hpp"
#include "subens/error.hpp"
#include "subens/rng.hpp"

namespace subens {

namespace {

struct SegmentFlops {
  std::uint64_t trunk;
  std::uint64_t task;
};

SegmentFlops segment_flops(const NetworkSpec& spec, SplitPoint sp) {
  const SplitPoint checked = split(spec, sp.index);
  return {network_flops(spec, 0, checked.index), network_flops(spec, checked.index, spec.size())};
}

}  // namespace

std::uint64_t ensemble_flops(const NetworkSpec& spec, SplitPoint sp, std::size_t n, EnsembleMode mode) {
  if (n == 0) throw ConfigError("ensemble size must be >= 1");
  const auto f = segment_flops(spec, sp);
  return mode == EnsembleMode::Deep ? n * (f.trunk + f.task) : f.trunk + n * f.task;
}

double speedup(const NetworkSpec& spec, SplitPoint sp, std::size_t n) {
  if (n == 0) throw ConfigError("ensemble size must be >= 1");
  const auto f = segment_flops(spec, sp);
  if (f.task == 0) throw ConfigError("task segment has no FLOPs; speedup undefined for this split");
  return static_cast<double>(n * (f.trunk + f.task)) / static_cast<double>(f.trunk + n * f.task);
}

double speedup_limit(const NetworkSpec& spec, SplitPoint sp) {
  const auto f = segment_flops(spec, sp);
  if (f.task == 0) throw ConfigError("task segment has no FLOPs; speedup undefined for this split");
  return static_cast<double>(f.trunk + f.task) / static_cast<double>(f.task);
}

FlopsReport flops_report(const NetworkSpec& spec, SplitPoint sp, std::size_t max_members) {
  if (max_members == 0) throw ConfigError("ensemble size must be >= 1");
  const auto f = segment_flops(spec, sp);
  FlopsReport report{f.trunk, f.task, f.trunk + f.task, {}};
  for (std::size_t n = 1; n <= max_members; ++n) {
    report.rows.push_back({n, ensemble_flops(spec, sp, n, EnsembleMode::Deep),
                           ensemble_flops(spec, sp, n, EnsembleMode::Sub), speedup(spec, sp, n)});
  }
  return report;
}

InferenceTiming time_inference(const NetworkSpec& spec, SplitPoint sp, std::size_t n, std::size_t batch,
                               std::size_t repeats, std::uint64_t seed) {
  if (n == 0 || batch == 0 || repeats == 0) throw ConfigError("timing parameters must be >= 1");
  std::vector<ParamStore> full;
  std::vector<ParamStore> heads;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) {
    seeds.push_back(member_seed(seed, i));
    full.push_back(init_params(spec, seeds.back()));
    heads.push_back(full.back().slice(sp.index, spec.size()));
  }
  const DeepEnsemble deep(spec, full, seeds);
  const SubEnsemble sub(spec, sp, std::make_shared<const ParamStore>(full.front().slice(0, sp.index)), heads, seeds);

  Shape input{batch};
  input.insert(input.end(), spec.input_shape.begin(), spec.input_shape.end());
  Tensor x(input);
  Rng rng(seed);
  for (double& v : x.data()) v = rng.normal();

  using Clock = std::chrono::steady_clock;
  const auto measure = [&](const auto& ensemble) {
    const auto start = Clock::now();
    for (std::size_t r = 0; r < repeats; ++r) (void)ensemble.predict(x);
    return std::chrono::duration<double>(Clock::now() - start).count() / static_cast<double>(repeats);
  };
  return {measure(deep), measure(sub)};
}

}  // namespace subens
