#pragma once

#include "softtopk/types.hpp"

namespace softtopk {

// Replaces -inf entries by min_finite - (max_finite - min_finite), which
// keeps masked candidates maximally far from the selection anchors without
// risking overflow.
Vector apply_neg_inf_mask(const ScoreVector& x);

// cost(i, j) = (scores_i - anchors_j)^2
Matrix squared_anchor_cost(const Vector& scores, const Vector& anchors);

// Top-k instance: anchors [0, 1], nu = [k/n, (n-k)/n], cost (x_i - y_j)^2.
EotProblem build_topk_problem(const ScoreVector& x, Index k,
                              const EotConfig& cfg);

// Sorted top-k instance: anchors [0..k], nu = [1/n, ..., 1/n, (n-k)/n].
EotProblem build_sorted_problem(const ScoreVector& x, Index k,
                                const EotConfig& cfg);

// Bregman-projection iterations on the kernel G = exp(-C/eps). Fast but
// overflows for small eps; throws NumericalError when the plan turns
// non-finite.
TransportPlan sinkhorn_plain(const EotProblem& p, const EotConfig& cfg);

// Log-domain iterations on the potentials f, g. Overflow-free; same
// contract as sinkhorn_plain.
TransportPlan sinkhorn_log(const EotProblem& p, const EotConfig& cfg);

// Mode dispatch: kAuto runs the plain kernel for eps > 1e-2 and falls back
// to the log kernel when it fails; otherwise the log kernel.
TransportPlan solve_eot(const EotProblem& p, const EotConfig& cfg);

// Closed-form unregularized optimum: the k smallest scores send their mass
// to anchor 0, the rest to anchor 1. Ties broken by original index.
// Requires fully finite scores.
TransportPlan exact_topk_plan(const ScoreVector& x, Index k);

// Minimizes <C, Gamma> by enumerating the vertices of the transport
// polytope (k-subsets for top-k anchors, injective rank assignments for
// sorted anchors). Ties broken by lexicographically smallest support.
// Guarded to n <= 12 (and a vertex-count cap in sorted mode).
TransportPlan exact_ot_bruteforce(const EotProblem& p);

// Max-norm deviation of gamma's row/column sums from the marginals.
double marginal_residual(const Matrix& gamma, const Marginals& marginals);

// Projects a near-feasible plan onto the transport polytope: rows and
// columns are scaled down to their marginals and the leftover mass is
// re-inserted as a rank-one patch. Useful when an objective value of an
// exactly feasible plan is needed from a finitely-iterated solve.
Matrix round_to_feasible(const Matrix& gamma, const Marginals& marginals);

}  // namespace softtopk
