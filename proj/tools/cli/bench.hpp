#pragma once

#include <cstdint>
#include <vector>

#include "softtopk/types.hpp"

namespace softtopk::cli {

// Wall-clock scaling harness over seeded Gaussian instances. A fixed
// iteration budget (no early stop) keeps the work per n comparable, so the
// timing ratios expose the O(n) scaling of one solve + backward pass.
struct BenchConfig {
  std::vector<Index> sizes{10000, 100000};
  Index k = 5;
  double epsilon = 1e-2;
  int iters = 100;
  int repeats = 5;
  std::uint64_t seed = 1;
  bool sorted = false;
};

struct BenchRow {
  Index n = 0;
  double forward_ms = 0.0;           // median over repeats
  double forward_backward_ms = 0.0;  // median over repeats
};

std::vector<BenchRow> run_bench(const BenchConfig& cfg);

}  // namespace softtopk::cli
