#include "cli/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "softtopk/backward.hpp"
#include "softtopk/soft_topk.hpp"

namespace softtopk::cli {

namespace {

// fixed report schema shared by the scan/bench commands
constexpr const char* kCsvHeader = "n,k,epsilon,metric,value\n";

std::string csv_row(Index n, Index k, double epsilon,
                    const std::string& metric, double value) {
  std::ostringstream ss;
  ss.precision(17);
  ss << n << ',' << k << ',' << epsilon << ',' << metric << ',' << value
     << '\n';
  return ss.str();
}

Vector seeded_gaussian(std::uint64_t seed, Index n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

int cmd_topk(std::istream& in, std::ostream& out, std::ostream& err,
             const TopkCmdOptions& opts) {
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    InputRecord rec;
    Index k = 0;
    try {
      rec = opts.format == InputFormat::kJsonl
                ? parse_jsonl_record(line, line_no)
                : parse_csv_record(line, line_no);
      k = rec.k.value_or(opts.k);
      if (k < 1) {
        throw std::invalid_argument("input line " + std::to_string(line_no) +
                                    ": no k given (record field or --k)");
      }
      const ScoreVector scores(rec.scores);
      if (k >= scores.size()) {
        throw std::invalid_argument("input line " + std::to_string(line_no) +
                                    ": k >= n");
      }
      RunRecord run;
      if (opts.sorted) {
        run = make_run_record(
            rec, k, sorted_soft_topk(scores, k, opts.solver, opts.largest),
            opts.solver.epsilon);
      } else {
        run = make_run_record(
            rec, k, soft_topk(scores, k, opts.solver, opts.largest),
            opts.solver.epsilon);
      }
      out << serialize_run_record(run) << '\n';
    } catch (const NumericalError& e) {
      err << "record '" << rec.id << "': " << e.what() << '\n';
      return kExitNumerical;
    } catch (const std::invalid_argument& e) {
      err << e.what() << '\n';
      return kExitBadInput;
    }
  }
  return kExitOk;
}

int cmd_grad_check(std::ostream& out, std::ostream& err,
                   const GradCheckCmdOptions& opts) {
  EotConfig solver;
  solver.max_iter = opts.max_iter;
  solver.residual_tol = opts.tol;

  out << kCsvHeader;
  double worst_overall = 0.0;
  try {
    for (const double eps : opts.epsilons) {
      solver.epsilon = eps;
      double worst = 0.0;
      double sum = 0.0;
      for (int s = 0; s < opts.seeds; ++s) {
        const std::uint64_t seed = opts.base_seed + static_cast<unsigned>(s);
        const Vector x = seeded_gaussian(seed, opts.n);
        Vector probe = seeded_gaussian(seed ^ 0x9e3779b97f4a7c15ULL, opts.n);
        probe /= probe.norm();
        const GradCheckReport rep =
            grad_check(ScoreVector(x), opts.k, solver, probe);
        worst = std::max(worst, rep.max_rel_err);
        sum += rep.max_rel_err;
      }
      out << csv_row(opts.n, opts.k, eps, "max_rel_err", worst);
      out << csv_row(opts.n, opts.k, eps, "mean_rel_err",
                     sum / std::max(opts.seeds, 1));
      out << csv_row(opts.n, opts.k, eps, "instances", opts.seeds);
      worst_overall = std::max(worst_overall, worst);
    }
  } catch (const NumericalError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  }
  if (worst_overall > opts.threshold) {
    err << "max_rel_err " << worst_overall << " exceeds threshold "
        << opts.threshold << '\n';
    return kExitBadInput;
  }
  return kExitOk;
}

int cmd_bias_scan(std::ostream& out, std::ostream& err,
                  const BiasScanCmdOptions& opts) {
  out << kCsvHeader;
  try {
    for (const double eps : opts.epsilons) {
      double sum_actual = 0.0;
      double sum_bound = 0.0;
      int violations = 0;
      int counted = 0;
      std::mt19937_64 rng(opts.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int t = 0; t < opts.trials; ++t) {
        Vector x(opts.n);
        for (Index i = 0; i < opts.n; ++i) x[i] = gauss(rng);
        Vector s = x;
        std::sort(s.begin(), s.end());
        const double gap = s[opts.k] - s[opts.k - 1];
        if (gap < opts.min_gap) continue;

        // stop once the solve is well below the per-instance bound
        const double bound_hint =
            eps * std::log(2.0 * static_cast<double>(opts.n)) /
            (static_cast<double>(opts.n) * gap);
        EotConfig solver;
        solver.epsilon = eps;
        solver.max_iter = opts.max_iter;
        solver.residual_tol = std::clamp(bound_hint / 50.0, 1e-9, 1e-6);

        const BiasReport rep = bias_report(ScoreVector(x), opts.k, solver);
        sum_actual += rep.actual;
        sum_bound += rep.bound;
        if (!rep.pass) ++violations;
        ++counted;
      }
      const double denom = std::max(counted, 1);
      out << csv_row(opts.n, opts.k, eps, "mean_actual", sum_actual / denom);
      out << csv_row(opts.n, opts.k, eps, "mean_bound", sum_bound / denom);
      out << csv_row(opts.n, opts.k, eps, "violations", violations);
      out << csv_row(opts.n, opts.k, eps, "instances", counted);
    }
  } catch (const NumericalError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_bench(std::ostream& out, std::ostream& err, const BenchConfig& cfg,
              Index k_for_report) {
  try {
    const std::vector<BenchRow> rows = run_bench(cfg);
    out << kCsvHeader;
    for (const BenchRow& row : rows) {
      out << csv_row(row.n, k_for_report, cfg.epsilon, "forward_ms",
                     row.forward_ms);
      out << csv_row(row.n, k_for_report, cfg.epsilon, "forward_backward_ms",
                     row.forward_backward_ms);
    }
    for (size_t i = 1; i < rows.size(); ++i) {
      out << csv_row(rows[i].n, k_for_report, cfg.epsilon,
                     "forward_backward_ratio_vs_prev",
                     rows[i].forward_backward_ms /
                         rows[i - 1].forward_backward_ms);
    }
  } catch (const NumericalError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_knn_demo(std::ostream& out, std::ostream& err,
                 const KnnDemoConfig& cfg) {
  try {
    const KnnDemoResult res = run_knn_demo(cfg);
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["k"] = cfg.k;
    j["epsilon"] = cfg.epsilon;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["untrained_train_accuracy"] = res.untrained_train_accuracy;
    j["untrained_test_accuracy"] = res.untrained_test_accuracy;
    j["train_accuracy"] = res.train_accuracy;
    j["test_accuracy"] = res.test_accuracy;
    j["initial_loss"] = res.losses.empty() ? 0.0 : res.losses.front();
    j["final_loss"] = res.losses.empty() ? 0.0 : res.losses.back();
    j["loss_non_increasing_first10"] = res.loss_non_increasing_first10;
    out << j.dump() << '\n';
  } catch (const NumericalError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace softtopk::cli
