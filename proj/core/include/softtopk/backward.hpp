#pragma once

#include <functional>

#include "softtopk/soft_topk.hpp"
#include "softtopk/types.hpp"

namespace softtopk {

// Schur-complement blocks of the dual Hessian with the last dual variable
// pinned to zero:
//   kappa    = diag(nu_bar) - Gbar^T diag(mu)^-1 Gbar      [(m-1), (m-1)]
//   l_matrix = diag(mu)^-1 Gbar kappa^-1                   [n, m-1]
// where Gbar drops the last plan column. kappa is a positive scalar for
// top-k (m = 2) and a k x k matrix for sorted top-k.
struct DualHessianBlocks {
  Matrix kappa;
  Matrix kappa_inv;
  Matrix l_matrix;
};

struct CostGradient {
  Matrix grad_c;  // [n, m], dL/dC
};

struct ScoreGradient {
  Vector grad_x;  // [n], dL/dx
};

struct GradCheckReport {
  Vector analytic;
  Vector numeric;
  double max_rel_err = 0.0;
  double plan_residual = 0.0;  // residual of the plan the analytic pass used
};

// Throws NumericalError when kappa is singular (pivot below 1e-12).
DualHessianBlocks dual_hessian_blocks(const TransportPlan& plan,
                                      const Marginals& marginals);

// Reduced-memory vector-Jacobian product dL/dGamma -> dL/dC through the
// optimality conditions of the entropic problem. O(n m) time and scratch,
// independent of how many Sinkhorn iterations produced the plan (only the
// converged plan enters).
CostGradient vjp_plan_to_cost(const Matrix& grad_gamma,
                              const TransportPlan& plan,
                              const Marginals& marginals, double epsilon);

// Reference implementation that materializes the full dual-Jacobian tensors
// (O(n^2 m) work); used to cross-check vjp_plan_to_cost. Guarded to n <= 64.
CostGradient vjp_naive(const Matrix& grad_gamma, const TransportPlan& plan,
                       const Marginals& marginals, double epsilon);

// dL/dC -> dL/dx through C_ij = (x_i - y_j)^2 / normalizer. The normalizer
// is treated as a constant (stop-gradient); masked (-inf) entries get
// gradient 0. `x` must be the score vector the problem was built from.
ScoreGradient chain_cost_to_scores(const CostGradient& grad_c,
                                   const ScoreVector& x,
                                   const EotProblem& problem);

// Full backward pass for soft_topk: lifts dL/da onto the first plan column,
// then applies vjp_plan_to_cost and chain_cost_to_scores. The result is in
// original-score space (sign handled when the output used `largest`).
ScoreGradient vjp_soft_topk(const Vector& grad_a, const TopkOutput& out,
                            const EotConfig& cfg);

// Central differences with per-coordinate step h * max(1, |x_i|).
// Coordinates equal to -inf are skipped (derivative reported as 0).
Vector finite_diff_grad(const std::function<double(const Vector&)>& loss_fn,
                        const Vector& x, double h = 1e-4);

// Compares vjp_soft_topk against finite differences for the probe loss
// L = probe . A^eps. The finite-difference path re-solves with the cost
// normalizer frozen at the base point, mirroring the stop-gradient the
// analytic path applies. Requires eps >= 1e-3 (finite differences are
// unreliable below). max_rel_err is taken over entries with
// |numeric| > 1e-8.
GradCheckReport grad_check(const ScoreVector& x, Index k,
                           const EotConfig& cfg, const Vector& probe);

}  // namespace softtopk
