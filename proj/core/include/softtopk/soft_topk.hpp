#pragma once

#include "softtopk/ot_core.hpp"
#include "softtopk/types.hpp"

namespace softtopk {

// Smoothed top-k membership vector. a = n * (first plan column); entries
// live in [0, 1] up to solver residual and sum to k. By convention the k
// *smallest* scores are selected; `largest` negates the scores first. A
// -inf entry acts as a score of minus infinity either way: inside every
// smallest-k selection, outside every largest-k one.
struct TopkOutput {
  Vector a;  // [n]
  TransportPlan plan;
  EotProblem problem;
  Vector solver_scores;  // scores the problem was built from (negated when largest)
  bool largest = false;
};

// Smoothed rank-membership matrix. a(i, l) approximates the indicator that
// x_i is the (l+1)-th smallest score; columns sum to 1, rows to <= 1.
struct SortedTopkOutput {
  Matrix a;  // [n, k]
  TransportPlan plan;
  EotProblem problem;
  Vector solver_scores;
  bool largest = false;
};

// Empirical check of the entropic bias bound
//   ||Gamma_eps - Gamma*||_F <= eps (ln n + ln 2) / (n * gap),
// gap = x_(k+1) - x_(k). Undefined when the boundary scores tie.
struct BiasReport {
  double bound = 0.0;
  double actual = 0.0;
  double gap = 0.0;
  bool bound_defined = false;
  bool pass = false;
};

TopkOutput soft_topk(const ScoreVector& x, Index k, const EotConfig& cfg,
                     bool largest = false);

SortedTopkOutput sorted_soft_topk(const ScoreVector& x, Index k,
                                  const EotConfig& cfg, bool largest = false);

// Exact 0/1 indicator of the k smallest (or largest) scores, ties broken by
// lower index.
Vector hard_topk(const ScoreVector& x, Index k, bool largest = false);

// Solves the instance on the raw squared-Euclidean cost (the setting of the
// bound; a rescaled cost rescales the constant) and compares against the
// closed-form unregularized plan.
BiasReport bias_report(const ScoreVector& x, Index k, const EotConfig& cfg);

}  // namespace softtopk
