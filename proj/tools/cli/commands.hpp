#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cli/bench.hpp"
#include "cli/knn_demo.hpp"
#include "cli/record_io.hpp"
#include "softtopk/types.hpp"

namespace softtopk::cli {

// shared exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitNumerical = 2;

struct TopkCmdOptions {
  Index k = 0;  // required unless every record carries its own k
  EotConfig solver;
  bool sorted = false;
  bool largest = false;
  InputFormat format = InputFormat::kJsonl;
};

// Stream-to-stream top-k driver: one RunRecord line per input record,
// deterministic for a fixed (input, flags) pair.
int cmd_topk(std::istream& in, std::ostream& out, std::ostream& err,
             const TopkCmdOptions& opts);

struct GradCheckCmdOptions {
  Index n = 20;
  Index k = 5;
  std::vector<double> epsilons{1e-1, 1e-2};
  int seeds = 20;
  std::uint64_t base_seed = 1;
  double threshold = 1e-2;  // nonzero exit when any epsilon's worst exceeds it
  int max_iter = 200000;
  double tol = 1e-13;
};

int cmd_grad_check(std::ostream& out, std::ostream& err,
                   const GradCheckCmdOptions& opts);

struct BiasScanCmdOptions {
  Index n = 50;
  Index k = 5;
  std::vector<double> epsilons{1e-3, 1e-2};
  int trials = 100;
  std::uint64_t seed = 1;
  double min_gap = 1e-3;
  int max_iter = 1000000;
};

int cmd_bias_scan(std::ostream& out, std::ostream& err,
                  const BiasScanCmdOptions& opts);

int cmd_bench(std::ostream& out, std::ostream& err, const BenchConfig& cfg,
              Index k_for_report);

int cmd_knn_demo(std::ostream& out, std::ostream& err,
                 const KnnDemoConfig& cfg);

}  // namespace softtopk::cli
