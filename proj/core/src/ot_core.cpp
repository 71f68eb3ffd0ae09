#include "softtopk/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace softtopk {

namespace {

void check_k(Index k, Index n) {
  if (k < 1 || k >= n) {
    throw std::invalid_argument("k must satisfy 1 <= k < n");
  }
}

EotProblem finish_problem(Vector masked, Vector anchors, Vector nu,
                          const EotConfig& cfg) {
  const Index n = masked.size();
  EotProblem p;
  p.cost = squared_anchor_cost(masked, anchors);
  p.marginals.mu = Vector::Constant(n, 1.0 / static_cast<double>(n));
  p.marginals.nu = std::move(nu);
  p.anchors.values = std::move(anchors);
  p.masked_scores = std::move(masked);
  p.normalizer = 1.0;
  if (cfg.normalize_cost) {
    const double mx = p.cost.maxCoeff();
    if (mx > 0.0) {
      p.cost /= mx;
      p.normalizer = mx;
    }
  }
  return p;
}

// Column-wise residual part is exact right after a column update; the row
// part carries the convergence error.
double residual_impl(const Matrix& gamma, const Vector& mu, const Vector& nu) {
  const double row = (gamma.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  const double col = (gamma.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff();
  return std::max(row, col);
}

// Early-stop polling period: the feasibility residual costs about as much
// as an iteration, so it is only sampled every few iterations.
constexpr int kResidualCheckEvery = 10;

}  // namespace

Matrix squared_anchor_cost(const Vector& scores, const Vector& anchors) {
  Matrix cost(scores.size(), anchors.size());
  for (Index j = 0; j < anchors.size(); ++j) {
    cost.col(j) = (scores.array() - anchors[j]).square();
  }
  return cost;
}

Vector apply_neg_inf_mask(const ScoreVector& x) {
  Vector v = x.values();
  if (!x.has_masked()) return v;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] == kNegInf) continue;
    mn = std::min(mn, v[i]);
    mx = std::max(mx, v[i]);
  }
  const double fill = mn - (mx - mn);
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] == kNegInf) v[i] = fill;
  }
  return v;
}

EotProblem build_topk_problem(const ScoreVector& x, Index k,
                              const EotConfig& cfg) {
  const Index n = x.size();
  check_k(k, n);
  Vector anchors(2);
  anchors << 0.0, 1.0;
  Vector nu(2);
  nu << static_cast<double>(k) / static_cast<double>(n),
      static_cast<double>(n - k) / static_cast<double>(n);
  return finish_problem(apply_neg_inf_mask(x), std::move(anchors),
                        std::move(nu), cfg);
}

EotProblem build_sorted_problem(const ScoreVector& x, Index k,
                                const EotConfig& cfg) {
  const Index n = x.size();
  check_k(k, n);
  Vector anchors = Vector::LinSpaced(k + 1, 0.0, static_cast<double>(k));
  Vector nu = Vector::Constant(k + 1, 1.0 / static_cast<double>(n));
  nu[k] = static_cast<double>(n - k) / static_cast<double>(n);
  return finish_problem(apply_neg_inf_mask(x), std::move(anchors),
                        std::move(nu), cfg);
}

TransportPlan sinkhorn_plain(const EotProblem& p, const EotConfig& cfg) {
  const Index n = p.n();
  const Index m = p.m();
  const double eps = cfg.epsilon;
  if (eps <= 0.0) throw std::invalid_argument("epsilon must be positive");

  // scalar exp so extreme ratios underflow to exact zero and surface as the
  // NaN failure signal (SIMD exp saturates at a subnormal instead)
  const Matrix G = (-p.cost / eps).unaryExpr(
      [](double t) { return std::exp(t); });
  const Vector& mu = p.marginals.mu;
  const Vector& nu = p.marginals.nu;

  Vector q = Vector::Constant(m, 1.0 / static_cast<double>(m));
  Vector pvec = Vector::Ones(n);
  Vector gq(n), gtp(m);
  TransportPlan plan;
  plan.iters_run = 0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    gq.noalias() = G * q;
    pvec = mu.array() / gq.array();
    gtp.noalias() = G.transpose() * pvec;
    q = nu.array() / gtp.array();
    plan.iters_run = it + 1;
    if (cfg.residual_tol && (it + 1) % kResidualCheckEvery == 0) {
      const Matrix gamma = G.cwiseProduct(pvec * q.transpose());
      const double r = residual_impl(gamma, mu, nu);
      if (r <= *cfg.residual_tol) break;   // NaN compares false, keep going
      if (!std::isfinite(r)) break;        // overflow; fail below
    }
  }
  plan.gamma = G.cwiseProduct(pvec * q.transpose());
  if (!plan.gamma.allFinite()) {
    throw NumericalError("sinkhorn_plain: non-finite plan (use log mode)");
  }
  plan.dual_f = eps * pvec.array().log();
  plan.dual_g = eps * q.array().log();
  plan.marginal_residual = residual_impl(plan.gamma, mu, nu);
  plan.mode_used = SinkhornMode::kPlain;
  return plan;
}

TransportPlan sinkhorn_log(const EotProblem& p, const EotConfig& cfg) {
  const Index n = p.n();
  const Index m = p.m();
  const double eps = cfg.epsilon;
  if (eps <= 0.0) throw std::invalid_argument("epsilon must be positive");

  const Vector& mu = p.marginals.mu;
  const Vector& nu = p.marginals.nu;
  const Vector log_mu = mu.array().log();
  const Vector log_nu = nu.array().log();

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  // z holds the scaled exponents (f_i + g_j - C_ij)/eps of the running plan;
  // soft-min reductions are shifted by the row/column max before exp.
  Matrix z(n, m);
  Vector rmax(n), cmax(m), racc(n), cacc(m);
  TransportPlan plan;
  plan.iters_run = 0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    z = ((-p.cost).rowwise() + g.transpose()) / eps;
    rmax = z.rowwise().maxCoeff();
    racc = (z.colwise() - rmax).array().exp().rowwise().sum();
    f = -eps * (rmax.array() + racc.array().log() - log_mu.array());

    z = ((-p.cost).colwise() + f) / eps;
    cmax = z.colwise().maxCoeff();
    cacc = (z.rowwise() - cmax.transpose()).array().exp().colwise().sum();
    g = -eps * (cmax.array() + cacc.array().log() - log_nu.array());

    plan.iters_run = it + 1;
    if (cfg.residual_tol && (it + 1) % kResidualCheckEvery == 0) {
      z = (((-p.cost).colwise() + f).rowwise() + g.transpose()) / eps;
      const Matrix gamma = z.array().exp();
      if (residual_impl(gamma, mu, nu) <= *cfg.residual_tol) break;
    }
  }
  z = (((-p.cost).colwise() + f).rowwise() + g.transpose()) / eps;
  plan.gamma = z.array().exp();
  plan.dual_f = std::move(f);
  plan.dual_g = std::move(g);
  plan.marginal_residual = residual_impl(plan.gamma, mu, nu);
  plan.mode_used = SinkhornMode::kLog;
  return plan;
}

TransportPlan solve_eot(const EotProblem& p, const EotConfig& cfg) {
  switch (cfg.mode) {
    case SinkhornMode::kPlain:
      return sinkhorn_plain(p, cfg);
    case SinkhornMode::kLog:
      return sinkhorn_log(p, cfg);
    case SinkhornMode::kAuto:
      break;
  }
  if (cfg.epsilon > 1e-2) {
    try {
      return sinkhorn_plain(p, cfg);
    } catch (const NumericalError&) {
      // fall through to the stabilized kernel
    }
  }
  return sinkhorn_log(p, cfg);
}

TransportPlan exact_topk_plan(const ScoreVector& x, Index k) {
  const Index n = x.size();
  check_k(k, n);
  if (x.has_masked()) {
    throw std::invalid_argument("exact_topk_plan: scores must be finite");
  }
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return x.values()[a] < x.values()[b];
  });
  TransportPlan plan;
  plan.gamma = Matrix::Zero(n, 2);
  const double w = 1.0 / static_cast<double>(n);
  for (Index r = 0; r < n; ++r) {
    plan.gamma(order[r], r < k ? 0 : 1) = w;
  }
  plan.dual_f = Vector::Zero(n);
  plan.dual_g = Vector::Zero(2);
  plan.iters_run = 0;
  plan.marginal_residual = 0.0;
  return plan;
}

namespace {

// Top-k vertices: subsets S of size k routed to anchor 0. Enumerated in
// lexicographic order so the first strict minimum is the lexicographically
// smallest support.
Matrix bruteforce_topk(const EotProblem& p, Index k) {
  const Index n = p.n();
  std::vector<Index> sel(k);
  std::iota(sel.begin(), sel.end(), Index{0});
  const double col1_total = p.cost.col(1).sum();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> best_sel;
  while (true) {
    double v = col1_total;
    for (Index i : sel) v += p.cost(i, 0) - p.cost(i, 1);
    if (v < best) {
      best = v;
      best_sel = sel;
    }
    // next combination
    Index i = k - 1;
    while (i >= 0 && sel[i] == n - k + i) --i;
    if (i < 0) break;
    ++sel[i];
    for (Index j = i + 1; j < k; ++j) sel[j] = sel[j - 1] + 1;
  }
  Matrix gamma = Matrix::Zero(n, 2);
  const double w = 1.0 / static_cast<double>(n);
  gamma.col(1).setConstant(w);
  for (Index i : best_sel) {
    gamma(i, 0) = w;
    gamma(i, 1) = 0.0;
  }
  return gamma;
}

// Sorted vertices: injective assignments of rows to rank anchors 0..k-1,
// remaining rows on the last anchor. Depth-first in index order, so the
// first strict minimum is lexicographically smallest in the assignment
// tuple.
Matrix bruteforce_sorted(const EotProblem& p, Index k) {
  const Index n = p.n();
  double rest_total = p.cost.col(k).sum();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> assign(k, -1), best_assign;
  std::vector<bool> used(n, false);
  // partial = sum over filled ranks of (C[i,rank] - C[i,k])
  auto dfs = [&](auto&& self, Index rank, double partial) -> void {
    if (rank == k) {
      const double v = rest_total + partial;
      if (v < best) {
        best = v;
        best_assign = assign;
      }
      return;
    }
    for (Index i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = true;
      assign[rank] = i;
      self(self, rank + 1, partial + p.cost(i, rank) - p.cost(i, k));
      used[i] = false;
    }
  };
  dfs(dfs, 0, 0.0);
  Matrix gamma = Matrix::Zero(n, k + 1);
  const double w = 1.0 / static_cast<double>(n);
  gamma.col(k).setConstant(w);
  for (Index r = 0; r < k; ++r) {
    gamma(best_assign[r], r) = w;
    gamma(best_assign[r], k) = 0.0;
  }
  return gamma;
}

}  // namespace

TransportPlan exact_ot_bruteforce(const EotProblem& p) {
  const Index n = p.n();
  const Index m = p.m();
  if (n > 12) throw std::invalid_argument("exact_ot_bruteforce: n > 12");

  TransportPlan plan;
  if (m == 2) {
    // top-k mode; k recovered from the first column marginal
    const Index k = static_cast<Index>(
        std::llround(p.marginals.nu[0] * static_cast<double>(n)));
    plan.gamma = bruteforce_topk(p, k);
  } else {
    const Index k = m - 1;
    double count = 1.0;
    for (Index i = 0; i < k; ++i) count *= static_cast<double>(n - i);
    if (count > 2e6) {
      throw std::invalid_argument("exact_ot_bruteforce: instance too large");
    }
    plan.gamma = bruteforce_sorted(p, k);
  }
  plan.dual_f = Vector::Zero(n);
  plan.dual_g = Vector::Zero(m);
  plan.iters_run = 0;
  plan.marginal_residual =
      residual_impl(plan.gamma, p.marginals.mu, p.marginals.nu);
  return plan;
}

double marginal_residual(const Matrix& gamma, const Marginals& marginals) {
  return residual_impl(gamma, marginals.mu, marginals.nu);
}

Matrix round_to_feasible(const Matrix& gamma, const Marginals& marginals) {
  const Vector& mu = marginals.mu;
  const Vector& nu = marginals.nu;
  Matrix g = gamma;
  // scale rows down to <= mu, then columns down to <= nu
  for (Index i = 0; i < g.rows(); ++i) {
    const double s = g.row(i).sum();
    if (s > mu[i] && s > 0.0) g.row(i) *= mu[i] / s;
  }
  for (Index j = 0; j < g.cols(); ++j) {
    const double s = g.col(j).sum();
    if (s > nu[j] && s > 0.0) g.col(j) *= nu[j] / s;
  }
  Vector r = mu - g.rowwise().sum();
  Vector c = nu - g.colwise().sum().transpose();
  const double total = r.sum();
  if (total > 0.0) {
    g += (r * c.transpose()) / total;
  }
  return g;
}

}  // namespace softtopk
