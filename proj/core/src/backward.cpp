#include "softtopk/backward.hpp"

#include <Eigen/LU>

#include <cmath>
#include <vector>

namespace softtopk {

namespace {

void check_shapes(const Matrix& grad_gamma, const TransportPlan& plan,
                  const Marginals& marginals) {
  if (grad_gamma.rows() != plan.gamma.rows() ||
      grad_gamma.cols() != plan.gamma.cols()) {
    throw std::invalid_argument("grad_gamma shape does not match the plan");
  }
  if (marginals.mu.size() != plan.gamma.rows() ||
      marginals.nu.size() != plan.gamma.cols()) {
    throw std::invalid_argument("marginals do not match the plan");
  }
}

}  // namespace

DualHessianBlocks dual_hessian_blocks(const TransportPlan& plan,
                                      const Marginals& marginals) {
  const Matrix& gamma = plan.gamma;
  const Index m = gamma.cols();
  const auto gbar = gamma.leftCols(m - 1);
  const Vector inv_mu = marginals.mu.cwiseInverse();

  DualHessianBlocks blocks;
  blocks.kappa = Matrix(marginals.nu.head(m - 1).asDiagonal());
  blocks.kappa.noalias() -=
      gbar.transpose() * inv_mu.asDiagonal() * gbar;

  Eigen::FullPivLU<Matrix> lu(blocks.kappa);
  // full pivoting sorts |U_ii| decreasingly; the last one is the smallest
  const double min_pivot =
      lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot >= 1e-12)) {
    throw NumericalError("dual Hessian block is singular (degenerate plan)");
  }
  blocks.kappa_inv = lu.inverse();
  blocks.l_matrix.noalias() =
      inv_mu.asDiagonal() * gbar * blocks.kappa_inv;
  return blocks;
}

CostGradient vjp_plan_to_cost(const Matrix& grad_gamma,
                              const TransportPlan& plan,
                              const Marginals& marginals, double epsilon) {
  check_shapes(grad_gamma, plan, marginals);
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");

  const Matrix& gamma = plan.gamma;
  const Index m = gamma.cols();
  const auto gbar = gamma.leftCols(m - 1);
  const Vector inv_mu = marginals.mu.cwiseInverse();
  const DualHessianBlocks blocks = dual_hessian_blocks(plan, marginals);

  const Matrix g1 = grad_gamma.cwiseProduct(gamma);  // [n, m]
  const Vector row_sums = g1.rowwise().sum();        // [n]
  Vector col_sums = g1.colwise().sum().transpose();  // [m]

  // dL/dC_ij = (1/eps) * (-G1_ij + (row_i + col_j) * Gamma_ij) with
  //   row = g1 o inv_mu + diag(mu)^-1 Gbar (L^T g1) - L g2
  //   col = pad(kappa^-1 g2 - L^T g1, 0),
  // g1/g2 the row/column sums of G1 (g2 drops the pinned last column).
  const Vector g1_l = blocks.l_matrix.transpose() * row_sums;  // [m-1]
  const Vector g2 = col_sums.head(m - 1);                      // [m-1]

  Vector row = row_sums.cwiseProduct(inv_mu);
  row.noalias() += inv_mu.asDiagonal() * (gbar * g1_l);
  row.noalias() -= blocks.l_matrix * g2;

  Vector col = Vector::Zero(m);
  col.head(m - 1) = blocks.kappa_inv * g2 - g1_l;

  CostGradient out;
  out.grad_c =
      (-g1 + gamma.cwiseProduct(row.replicate(1, m) +
                                col.transpose().replicate(gamma.rows(), 1))) /
      epsilon;
  return out;
}

CostGradient vjp_naive(const Matrix& grad_gamma, const TransportPlan& plan,
                       const Marginals& marginals, double epsilon) {
  check_shapes(grad_gamma, plan, marginals);
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  const Matrix& gamma = plan.gamma;
  const Index n = gamma.rows();
  const Index m = gamma.cols();
  if (n > 64) throw std::invalid_argument("vjp_naive: instance too large");

  const auto gbar = gamma.leftCols(m - 1);
  const Vector inv_mu = marginals.mu.cwiseInverse();
  const DualHessianBlocks blocks = dual_hessian_blocks(plan, marginals);

  // H^{-1} blocks (up to the -eps factor that cancels against D's 1/eps):
  //   H1 = diag(mu)^-1 + L Gbar^T diag(mu)^-1   [n, n]
  //   H2 = -L                                   [n, m-1]
  //   H3 = H2^T, H4 = kappa^-1
  Matrix h1 = Matrix(inv_mu.asDiagonal());
  h1.noalias() +=
      blocks.l_matrix * gbar.transpose() * inv_mu.asDiagonal();
  const Matrix h2 = -blocks.l_matrix;
  const Matrix h3 = h2.transpose();
  const Matrix& h4 = blocks.kappa_inv;

  // materialize d(xi)/dC [n, n, m] and d(b)/dC [m, n, m] (last slice 0)
  std::vector<Matrix> dxi(n), db(m);
  for (Index h = 0; h < n; ++h) {
    dxi[h] = Matrix(n, m);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) {
        const double pad_h2 = j < m - 1 ? h2(h, j) : 0.0;
        dxi[h](i, j) = (h1(h, i) + pad_h2) * gamma(i, j);
      }
    }
  }
  for (Index l = 0; l < m; ++l) {
    db[l] = Matrix::Zero(n, m);
    if (l == m - 1) continue;  // b_m pinned to zero
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) {
        const double pad_h4 = j < m - 1 ? h4(l, j) : 0.0;
        db[l](i, j) = (h3(l, i) + pad_h4) * gamma(i, j);
      }
    }
  }

  const Matrix g1 = grad_gamma.cwiseProduct(gamma);
  CostGradient out;
  out.grad_c = -g1;
  for (Index h = 0; h < n; ++h) {
    for (Index l = 0; l < m; ++l) {
      const double w = g1(h, l);
      if (w == 0.0) continue;
      out.grad_c.noalias() += w * dxi[h];
      out.grad_c.noalias() += w * db[l];
    }
  }
  out.grad_c /= epsilon;
  return out;
}

ScoreGradient chain_cost_to_scores(const CostGradient& grad_c,
                                   const ScoreVector& x,
                                   const EotProblem& problem) {
  if (grad_c.grad_c.rows() != problem.n() ||
      grad_c.grad_c.cols() != problem.m() || x.size() != problem.n()) {
    throw std::invalid_argument("chain_cost_to_scores: shape mismatch");
  }
  const Vector& anchors = problem.anchors.values;
  ScoreGradient out;
  out.grad_x = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    if (x.values()[i] == kNegInf) continue;  // detached fill value
    double acc = 0.0;
    for (Index j = 0; j < anchors.size(); ++j) {
      acc += grad_c.grad_c(i, j) * 2.0 *
             (problem.masked_scores[i] - anchors[j]);
    }
    out.grad_x[i] = acc / problem.normalizer;
  }
  return out;
}

ScoreGradient vjp_soft_topk(const Vector& grad_a, const TopkOutput& out,
                            const EotConfig& cfg) {
  const Index n = out.plan.gamma.rows();
  if (grad_a.size() != n) {
    throw std::invalid_argument("vjp_soft_topk: grad_a size mismatch");
  }
  Matrix grad_gamma = Matrix::Zero(n, out.plan.gamma.cols());
  grad_gamma.col(0) = static_cast<double>(n) * grad_a;  // a = n * Gamma e_1
  const CostGradient gc =
      vjp_plan_to_cost(grad_gamma, out.plan, out.problem.marginals,
                       cfg.epsilon);
  ScoreGradient gx =
      chain_cost_to_scores(gc, ScoreVector(out.solver_scores), out.problem);
  if (out.largest) gx.grad_x = -gx.grad_x;
  return gx;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& loss_fn,
                        const Vector& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("h must be positive");
  Vector grad = Vector::Zero(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] == kNegInf) continue;
    const double step = h * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double up = loss_fn(probe);
    probe[i] = x[i] - step;
    const double down = loss_fn(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradCheckReport grad_check(const ScoreVector& x, Index k,
                           const EotConfig& cfg, const Vector& probe) {
  if (cfg.epsilon < 1e-3) {
    throw std::invalid_argument("grad_check: eps below 1e-3 is unreliable");
  }
  if (probe.size() != x.size()) {
    throw std::invalid_argument("grad_check: probe size mismatch");
  }
  const TopkOutput out = soft_topk(x, k, cfg);
  const double n = static_cast<double>(x.size());

  GradCheckReport rep;
  rep.plan_residual = out.plan.marginal_residual;
  rep.analytic = vjp_soft_topk(probe, out, cfg).grad_x;

  // The analytic path differentiates A^eps with the normalizer held fixed,
  // so the difference quotient must probe that same function.
  const double frozen = out.problem.normalizer;
  const auto loss = [&](const Vector& xv) {
    EotProblem p;
    p.masked_scores = apply_neg_inf_mask(ScoreVector(xv));
    p.anchors = out.problem.anchors;
    p.marginals = out.problem.marginals;
    p.normalizer = frozen;
    p.cost = squared_anchor_cost(p.masked_scores, p.anchors.values) / frozen;
    const TransportPlan plan = solve_eot(p, cfg);
    return probe.dot(n * plan.gamma.col(0));
  };
  rep.numeric = finite_diff_grad(loss, x.values(), 1e-4);

  rep.max_rel_err = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(rep.numeric[i]) > 1e-8) {
      rep.max_rel_err =
          std::max(rep.max_rel_err,
                   std::abs(rep.analytic[i] - rep.numeric[i]) /
                       std::abs(rep.numeric[i]));
    }
  }
  return rep;
}

}  // namespace softtopk
