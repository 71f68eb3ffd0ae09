#include "cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "softtopk/backward.hpp"
#include "softtopk/soft_topk.hpp"

namespace softtopk::cli {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  EotConfig solver;
  solver.epsilon = cfg.epsilon;
  solver.max_iter = cfg.iters;
  solver.residual_tol.reset();  // fixed budget

  std::vector<BenchRow> rows;
  for (const Index n : cfg.sizes) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = gauss(rng);
    const ScoreVector scores(x);
    const Vector probe = Vector::Ones(n) / static_cast<double>(n);

    std::vector<double> fwd, fwd_bwd;
    for (int r = 0; r < cfg.repeats; ++r) {
      if (cfg.sorted) {
        auto t0 = std::chrono::steady_clock::now();
        const SortedTopkOutput out = sorted_soft_topk(scores, cfg.k, solver);
        fwd.push_back(ms_since(t0));

        t0 = std::chrono::steady_clock::now();
        const SortedTopkOutput out2 = sorted_soft_topk(scores, cfg.k, solver);
        Matrix grad_gamma = Matrix::Zero(n, cfg.k + 1);
        grad_gamma.leftCols(cfg.k) = probe.replicate(1, cfg.k);
        const CostGradient gc = vjp_plan_to_cost(
            grad_gamma, out2.plan, out2.problem.marginals, solver.epsilon);
        chain_cost_to_scores(gc, scores, out2.problem);
        fwd_bwd.push_back(ms_since(t0));
      } else {
        auto t0 = std::chrono::steady_clock::now();
        const TopkOutput out = soft_topk(scores, cfg.k, solver);
        fwd.push_back(ms_since(t0));

        t0 = std::chrono::steady_clock::now();
        const TopkOutput out2 = soft_topk(scores, cfg.k, solver);
        vjp_soft_topk(probe, out2, solver);
        fwd_bwd.push_back(ms_since(t0));
      }
    }
    rows.push_back(BenchRow{n, median(fwd), median(fwd_bwd)});
  }
  return rows;
}

}  // namespace softtopk::cli
