#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "softtopk/soft_topk.hpp"
#include "softtopk/types.hpp"

namespace softtopk::cli {

enum class InputFormat { kJsonl, kCsv };

struct InputRecord {
  std::string id;
  Vector scores;
  std::optional<Index> k;  // absent when the flag value applies
};

struct Diagnostics {
  double epsilon = 0.0;
  int iters_run = 0;
  double marginal_residual = 0.0;
  std::string mode_used;
};

// One output line per input record. `a` is n values for top-k mode and
// n*k row-major values (with sorted_k set) for sorted mode.
struct RunRecord {
  std::string id;
  Index k = 0;
  Vector scores;
  bool sorted = false;
  bool largest = false;
  std::vector<double> a;
  Index sorted_k = 0;
  Diagnostics diagnostics;
};

// Parses one input line; throws std::invalid_argument with a message that
// names the offending line.
InputRecord parse_jsonl_record(const std::string& line, size_t line_no);
InputRecord parse_csv_record(const std::string& line, size_t line_no);

std::string serialize_run_record(const RunRecord& rec);

std::string mode_name(SinkhornMode mode);

RunRecord make_run_record(const InputRecord& in, Index k,
                          const TopkOutput& out, double epsilon);
RunRecord make_run_record(const InputRecord& in, Index k,
                          const SortedTopkOutput& out, double epsilon);

}  // namespace softtopk::cli
