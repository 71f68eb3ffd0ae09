#include "softtopk/soft_topk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace softtopk {

namespace {

// Largest-k runs on negated scores. The -inf fill happens on the raw scale
// first, so a masked candidate ends up strictly above every negated score
// and stays out of the selection.
Vector negate_after_mask(const ScoreVector& x) {
  return -apply_neg_inf_mask(x);
}

// Negated scores with the -inf markers kept in place; used by the backward
// pass to zero masked gradients.
Vector negate_keeping_markers(const ScoreVector& x) {
  Vector v = x.values();
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != kNegInf) v[i] = -v[i];
  }
  return v;
}

}  // namespace

TopkOutput soft_topk(const ScoreVector& x, Index k, const EotConfig& cfg,
                     bool largest) {
  TopkOutput out;
  out.largest = largest;
  if (largest) {
    out.solver_scores = negate_keeping_markers(x);
    out.problem = build_topk_problem(ScoreVector(negate_after_mask(x)), k, cfg);
  } else {
    out.solver_scores = x.values();
    out.problem = build_topk_problem(x, k, cfg);
  }
  out.plan = solve_eot(out.problem, cfg);
  out.a = static_cast<double>(x.size()) * out.plan.gamma.col(0);
  return out;
}

SortedTopkOutput sorted_soft_topk(const ScoreVector& x, Index k,
                                  const EotConfig& cfg, bool largest) {
  SortedTopkOutput out;
  out.largest = largest;
  if (largest) {
    out.solver_scores = negate_keeping_markers(x);
    out.problem =
        build_sorted_problem(ScoreVector(negate_after_mask(x)), k, cfg);
  } else {
    out.solver_scores = x.values();
    out.problem = build_sorted_problem(x, k, cfg);
  }
  out.plan = solve_eot(out.problem, cfg);
  out.a = static_cast<double>(x.size()) * out.plan.gamma.leftCols(k);
  return out;
}

Vector hard_topk(const ScoreVector& x, Index k, bool largest) {
  const Index n = x.size();
  if (k < 1 || k >= n) {
    throw std::invalid_argument("k must satisfy 1 <= k < n");
  }
  const Vector masked =
      largest ? negate_after_mask(x) : apply_neg_inf_mask(x);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return masked[a] < masked[b]; });
  Vector ind = Vector::Zero(n);
  for (Index r = 0; r < k; ++r) ind[order[r]] = 1.0;
  return ind;
}

BiasReport bias_report(const ScoreVector& x, Index k, const EotConfig& cfg) {
  const Index n = x.size();
  if (x.has_masked()) {
    throw std::invalid_argument("bias_report: scores must be finite");
  }
  Vector sorted = x.values();
  std::sort(sorted.begin(), sorted.end());

  BiasReport rep;
  rep.gap = sorted[k] - sorted[k - 1];

  EotConfig raw_cfg = cfg;
  raw_cfg.normalize_cost = false;
  const EotProblem problem = build_topk_problem(x, k, raw_cfg);
  const TransportPlan entropic = solve_eot(problem, raw_cfg);
  const TransportPlan exact = exact_topk_plan(x, k);
  rep.actual = (entropic.gamma - exact.gamma).norm();

  if (rep.gap > 0.0) {
    rep.bound = cfg.epsilon * (std::log(static_cast<double>(n)) + std::log(2.0)) /
                (static_cast<double>(n) * rep.gap);
    rep.bound_defined = std::isfinite(rep.bound);
  }
  rep.pass = rep.bound_defined && rep.actual <= rep.bound;
  return rep;
}

}  // namespace softtopk
