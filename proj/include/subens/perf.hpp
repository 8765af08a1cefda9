#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "subens/network.hpp"

namespace subens {

enum class EnsembleMode { Deep, Sub };

/// Inference FLOPs for one example.
///   deep: n * F          sub: F_T + n * F_K
/// where F_T and F_K are the trunk and task segment FLOPs and F = F_T + F_K.
std::uint64_t ensemble_flops(const NetworkSpec& spec, SplitPoint split, std::size_t n, EnsembleMode mode);

/// n * F / (F_T + n * F_K). Throws ConfigError when F_K == 0.
double speedup(const NetworkSpec& spec, SplitPoint split, std::size_t n);

/// F / F_K, the supremum of speedup(n).
double speedup_limit(const NetworkSpec& spec, SplitPoint split);

struct FlopsRow {
  std::size_t members = 0;
  std::uint64_t deep_flops = 0;
  std::uint64_t sub_flops = 0;
  double speedup = 0.0;
};

struct FlopsReport {
  std::uint64_t trunk_flops = 0;
  std::uint64_t task_flops = 0;
  std::uint64_t total_flops = 0;
  std::vector<FlopsRow> rows;  // members = 1..max_members
};

FlopsReport flops_report(const NetworkSpec& spec, SplitPoint split, std::size_t max_members);

/// Wall-clock inference time of both ensemble kinds over randomly
/// initialized parameters. Informational only.
struct InferenceTiming {
  double deep_seconds = 0.0;
  double sub_seconds = 0.0;
};

InferenceTiming time_inference(const NetworkSpec& spec, SplitPoint split, std::size_t n, std::size_t batch,
                               std::size_t repeats, std::uint64_t seed);

}  // namespace subens
