// Acceptance suite: one pass/fail line per criterion. Each case pins its
// tolerances in code; a red line here means the library misses its contract.
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "cli/bench.hpp"
#include "cli/knn_demo.hpp"
#include "softtopk/applications.hpp"
#include "softtopk/backward.hpp"
#include "softtopk/ot_core.hpp"
#include "softtopk/soft_topk.hpp"
#include "test_util.hpp"

using namespace softtopk;
using namespace softtopk::testutil;

namespace {

void report(int id, const char* name, bool ok) {
  std::printf("[acceptance] C%02d %-46s %s\n", id, name, ok ? "PASS" : "FAIL");
  std::fflush(stdout);
}

EotConfig solver_cfg(double eps, int max_iter, double tol,
                     bool normalize = true) {
  EotConfig cfg;
  cfg.epsilon = eps;
  cfg.max_iter = max_iter;
  if (tol > 0.0) cfg.residual_tol = tol;
  cfg.normalize_cost = normalize;
  return cfg;
}

}  // namespace

TEST_CASE("C01 figure-3 membership within 0.01 in under 10 ms") {
  const EotConfig cfg = solver_cfg(1e-3, 200000, 1e-6);
  const ScoreVector x(fig_scores());
  const Vector expected = vec({1, 1, 0, 0, 1, 1, 1});

  // warm-up, then median of three timed solves
  soft_topk(x, 5, cfg);
  double best_ms = 1e18;
  Vector a;
  for (int r = 0; r < 3; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    a = soft_topk(x, 5, cfg).a;
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    best_ms = std::min(best_ms, ms);
  }
  const double dev = (a - expected).cwiseAbs().maxCoeff();
  const bool ok = dev < 0.01 && best_ms < 10.0;
  report(1, "figure-3 membership, < 10 ms", ok);
  CHECK(dev < 0.01);
  CHECK(best_ms < 10.0);
}

TEST_CASE("C02 figure-5 sorted ranks") {
  const SortedTopkOutput out = sorted_soft_topk(
      ScoreVector(fig_scores()), 2, solver_cfg(1e-3, 200000, 1e-6));
  Index arg0, arg1;
  out.a.col(0).maxCoeff(&arg0);
  out.a.col(1).maxCoeff(&arg1);
  const bool ok = arg0 == 4 && arg1 == 6;
  report(2, "figure-5 sorted ranks (-0.2 then 0.1)", ok);
  CHECK(arg0 == 4);
  CHECK(arg1 == 6);
}

TEST_CASE("C03 marginal feasibility on 100 gaussian instances") {
  std::mt19937_64 rng(1001);
  const EotConfig cfg = solver_cfg(1e-2, 2000, 1e-6);
  int reached = 0;
  int worst_iters = 0;
  for (int t = 0; t < 100; ++t) {
    const TopkOutput out = soft_topk(ScoreVector(gaussian(rng, 50)), 5, cfg);
    if (out.plan.marginal_residual <= 1e-6) ++reached;
    worst_iters = std::max(worst_iters, out.plan.iters_run);
  }
  const bool ok = reached == 100;
  report(3, "feasibility 1e-6 within 2000 iterations", ok);
  CHECK(reached == 100);
  CHECK(worst_iters <= 2000);
}

TEST_CASE("C04 entropic bias bound (Frobenius) never violated") {
  std::mt19937_64 rng(1002);
  int violations = 0;
  int checked = 0;
  for (const double eps : {1e-3, 1e-2}) {
    std::mt19937_64 inner(rng());
    for (int t = 0; t < 100; ++t) {
      const Vector x = gaussian(inner, 50);
      Vector s = x;
      std::sort(s.begin(), s.end());
      const double gap = s[5] - s[4];
      if (gap < 1e-3) continue;
      const double bound_hint = eps * std::log(100.0) / (50.0 * gap);
      const EotConfig cfg = solver_cfg(
          eps, 1000000, std::clamp(bound_hint / 50.0, 1e-9, 1e-6));
      const BiasReport rep = bias_report(ScoreVector(x), 5, cfg);
      ++checked;
      if (!rep.pass) ++violations;
    }
  }
  const bool ok = violations == 0 && checked > 150;
  report(4, "bias <= eps(ln n + ln 2)/(n gap), 0 violations", ok);
  CHECK(violations == 0);
  CHECK(checked > 150);
}

TEST_CASE("C05 objective gap within [0, eps ln(nm)] on oracle instances") {
  std::mt19937_64 rng(1003);
  const EotConfig cfg = solver_cfg(1e-2, 300000, 1e-10);
  int bad = 0;
  int total = 0;
  for (int t = 0; t < 25; ++t) {
    const Index n = 3 + static_cast<Index>(rng() % 8);
    const Index k = 1 + static_cast<Index>(rng() % (n - 1));
    const Vector x = gaussian(rng, n);
    const bool sorted_mode = t % 4 == 3 && k <= 4;
    const EotProblem p =
        sorted_mode ? build_sorted_problem(ScoreVector(x), k, cfg)
                    : build_topk_problem(ScoreVector(x), k, cfg);
    const TransportPlan entropic = solve_eot(p, cfg);
    const TransportPlan vertex = exact_ot_bruteforce(p);
    const Matrix rounded = round_to_feasible(entropic.gamma, p.marginals);
    const double gap = (p.cost.cwiseProduct(rounded - vertex.gamma)).sum();
    const double ub =
        cfg.epsilon * std::log(static_cast<double>(p.n() * p.m()));
    // lower edge allows double-precision dot-product roundoff
    if (!(gap >= -1e-12 && gap <= ub)) ++bad;
    ++total;
  }
  const bool ok = bad == 0 && total == 25;
  report(5, "oracle objective gap in [0, eps ln(nm)]", ok);
  CHECK(bad == 0);
}

TEST_CASE("C06 gradient correctness against finite differences") {
  std::mt19937_64 rng(1004);
  double worst_1e1 = 0.0, worst_1e2 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vector x = gaussian(rng, 20);
    Vector probe = gaussian(rng, 20);
    probe /= probe.norm();
    worst_1e1 = std::max(
        worst_1e1,
        grad_check(ScoreVector(x), 5, solver_cfg(1e-1, 200000, 1e-13), probe)
            .max_rel_err);
    worst_1e2 = std::max(
        worst_1e2,
        grad_check(ScoreVector(x), 5, solver_cfg(1e-2, 200000, 1e-14), probe)
            .max_rel_err);
  }

  // closed-form two-score gradient, unnormalized cost
  double closed_form_err = 0.0;
  for (const double eps : {0.5, 1.0, 2.0}) {
    const EotConfig cfg = solver_cfg(eps, 20000, 1e-15, false);
    const TopkOutput out = soft_topk(ScoreVector(vec({0.0, 1.0})), 1, cfg);
    Vector probe = Vector::Zero(2);
    probe[0] = 1.0;
    const ScoreGradient g = vjp_soft_topk(probe, out, cfg);
    const double expect =
        -sigmoid(1.0 / eps) * sigmoid(-1.0 / eps) / eps;
    closed_form_err = std::max(closed_form_err, std::abs(g.grad_x[0] - expect));
  }

  const bool ok =
      worst_1e1 <= 1e-3 && worst_1e2 <= 1e-2 && closed_form_err <= 1e-6;
  report(6, "grad check 1e-3 @ eps 0.1, 1e-2 @ eps 0.01", ok);
  CHECK(worst_1e1 <= 1e-3);
  CHECK(worst_1e2 <= 1e-2);
  CHECK(closed_form_err <= 1e-6);
}

TEST_CASE("C07 naive and reduced-memory backward coincide") {
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 4 + static_cast<Index>(rng() % 17);
    const bool sorted_mode = t % 2 == 1;
    const Index k = sorted_mode
                        ? 1 + static_cast<Index>(rng() % std::min<Index>(4, n - 1))
                        : 1 + static_cast<Index>(rng() % (n - 1));
    const EotConfig cfg = solver_cfg(0.05, 5000, 1e-13);
    const ScoreVector x(gaussian(rng, n));
    const EotProblem p = sorted_mode ? build_sorted_problem(x, k, cfg)
                                     : build_topk_problem(x, k, cfg);
    const TransportPlan plan = solve_eot(p, cfg);
    Matrix gg(n, p.m());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p.m(); ++j) gg(i, j) = gauss(rng);
    const Matrix fast =
        vjp_plan_to_cost(gg, plan, p.marginals, cfg.epsilon).grad_c;
    const Matrix slow = vjp_naive(gg, plan, p.marginals, cfg.epsilon).grad_c;
    worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
  }
  const bool ok = worst <= 1e-10;
  report(7, "algorithmic equivalence <= 1e-10 (50 runs)", ok);
  CHECK(worst <= 1e-10);
}

TEST_CASE("C08 nonzero Jacobian rows under unit probes") {
  std::mt19937_64 rng(1006);
  const EotConfig cfg = solver_cfg(1e-1, 5000, 1e-12);
  int nonzero = 0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 5 + static_cast<Index>(rng() % 26);
    const Index k = 1 + static_cast<Index>(rng() % (n - 1));
    const TopkOutput out = soft_topk(ScoreVector(gaussian(rng, n)), k, cfg);
    Vector probe = Vector::Zero(n);
    probe[static_cast<Index>(rng() % n)] = 1.0;
    if (vjp_soft_topk(probe, out, cfg).grad_x.cwiseAbs().maxCoeff() > 1e-12) {
      ++nonzero;
    }
  }
  const bool ok = nonzero == 100;
  report(8, "score gradient nonzero on 100 instances", ok);
  CHECK(nonzero == 100);
}

TEST_CASE("C09 near-linear forward+backward scaling") {
  cli::BenchConfig cfg;
  cfg.sizes = {10000, 100000};
  cfg.k = 5;
  cfg.epsilon = 1e-2;
  cfg.iters = 100;
  cfg.repeats = 3;
  cfg.seed = 9;
  const auto rows = cli::run_bench(cfg);
  REQUIRE(rows.size() == 2);
  const double ratio = rows[1].forward_backward_ms / rows[0].forward_backward_ms;
  const bool ok = ratio <= 15.0;
  std::printf("[acceptance]      timing: %.2f ms -> %.2f ms, ratio %.2f\n",
              rows[0].forward_backward_ms, rows[1].forward_backward_ms, ratio);
  report(9, "time(1e5)/time(1e4) <= 15 for m = 2", ok);
  CHECK(ratio <= 15.0);
}

TEST_CASE("C10 toy knn demo reaches 0.90 test accuracy") {
  cli::KnnDemoConfig cfg;  // defaults: seed 1, k 5, eps 0.1, 60 steps
  const cli::KnnDemoResult res = cli::run_knn_demo(cfg);
  std::printf(
      "[acceptance]      knn demo: untrained %.3f -> trained %.3f (loss %.3f -> %.3f)\n",
      res.untrained_test_accuracy, res.test_accuracy, res.losses.front(),
      res.losses.back());
  const bool ok = res.test_accuracy >= 0.90 && res.loss_non_increasing_first10;
  report(10, "trained-through-operator knn >= 0.90", ok);
  CHECK(res.test_accuracy >= 0.90);
  CHECK(res.loss_non_increasing_first10);
}
