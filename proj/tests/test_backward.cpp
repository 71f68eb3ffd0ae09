#include <doctest.h>

#include <cmath>
#include <random>

#include "softtopk/backward.hpp"
#include "softtopk/ot_core.hpp"
#include "test_util.hpp"

using namespace softtopk;
using namespace softtopk::testutil;

namespace {

EotConfig solver_cfg(double eps, int max_iter = 100000, double tol = 1e-13,
                     bool normalize = true) {
  EotConfig cfg;
  cfg.epsilon = eps;
  cfg.max_iter = max_iter;
  if (tol > 0.0) cfg.residual_tol = tol;
  cfg.normalize_cost = normalize;
  return cfg;
}

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

// d(sigmoid)/dt
double dsigmoid(double t) { return sigmoid(t) * sigmoid(-t); }

}  // namespace

TEST_CASE("dual Hessian blocks") {
  std::mt19937_64 rng(60);
  const EotConfig cfg = solver_cfg(0.05, 3000, 1e-12);

  SUBCASE("top-k: kappa is a positive scalar") {
    const EotProblem p =
        build_topk_problem(ScoreVector(gaussian(rng, 15)), 5, cfg);
    const TransportPlan plan = solve_eot(p, cfg);
    const DualHessianBlocks b = dual_hessian_blocks(plan, p.marginals);
    REQUIRE(b.kappa.rows() == 1);
    CHECK(b.kappa(0, 0) > 0.0);
    CHECK(b.kappa(0, 0) * b.kappa_inv(0, 0) == doctest::Approx(1.0));
  }

  SUBCASE("sorted: kappa symmetric with a clean inverse") {
    const EotProblem p =
        build_sorted_problem(ScoreVector(gaussian(rng, 12)), 4, cfg);
    const TransportPlan plan = solve_eot(p, cfg);
    const DualHessianBlocks b = dual_hessian_blocks(plan, p.marginals);
    REQUIRE(b.kappa.rows() == 4);
    CHECK((b.kappa - b.kappa.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix eye = b.kappa * b.kappa_inv;
    CHECK((eye - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("hard plans are singular") {
    const TransportPlan hard = exact_topk_plan(ScoreVector(fig_scores()), 5);
    Marginals marg;
    marg.mu = Vector::Constant(7, 1.0 / 7.0);
    marg.nu = vec({5.0 / 7.0, 2.0 / 7.0});
    CHECK_THROWS_AS(dual_hessian_blocks(hard, marg), NumericalError);
    Matrix gg = Matrix::Ones(7, 2);
    CHECK_THROWS_AS(vjp_plan_to_cost(gg, hard, marg, 1e-2), NumericalError);
  }
}

TEST_CASE("reduced-memory and naive gradients coincide") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 12; ++t) {
    const Index n = 4 + static_cast<Index>(rng() % 17);
    const bool sorted_mode = t % 2 == 1;
    const Index k = sorted_mode ? 3 : 1 + static_cast<Index>(rng() % (n - 1));
    const EotConfig cfg = solver_cfg(0.05, 5000, 1e-13);
    const ScoreVector x(gaussian(rng, n));
    const EotProblem p = sorted_mode ? build_sorted_problem(x, k, cfg)
                                     : build_topk_problem(x, k, cfg);
    const TransportPlan plan = solve_eot(p, cfg);
    const Matrix gg = random_matrix(rng, n, p.m());
    const CostGradient fast =
        vjp_plan_to_cost(gg, plan, p.marginals, cfg.epsilon);
    const CostGradient slow = vjp_naive(gg, plan, p.marginals, cfg.epsilon);
    CHECK((fast.grad_c - slow.grad_c).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero cotangent gives zero gradients") {
  const EotConfig cfg = solver_cfg(0.1, 2000, 1e-12);
  const EotProblem p = build_topk_problem(ScoreVector(fig_scores()), 3, cfg);
  const TransportPlan plan = solve_eot(p, cfg);
  const Matrix zeros = Matrix::Zero(7, 2);
  CHECK(vjp_plan_to_cost(zeros, plan, p.marginals, cfg.epsilon)
            .grad_c.cwiseAbs().maxCoeff() == 0.0);
  CHECK(vjp_naive(zeros, plan, p.marginals, cfg.epsilon)
            .grad_c.cwiseAbs().maxCoeff() == 0.0);

  const TopkOutput out = soft_topk(ScoreVector(fig_scores()), 3, cfg);
  const ScoreGradient g = vjp_soft_topk(Vector::Zero(7), out, cfg);
  CHECK(g.grad_x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-score closed form: dA1/dC and dA1/dx") {
  // unnormalized cost keeps A1 = sigmoid((x2 - x1)/eps) exactly
  for (double eps : {0.5, 1.0, 2.0}) {
    const EotConfig cfg = solver_cfg(eps, 20000, 1e-15, false);
    const ScoreVector x(vec({0.0, 1.0}));
    const TopkOutput out = soft_topk(x, 1, cfg);

    const double u = 1.0 / eps;  // (C12 + C21 - C11 - C22) / (2 eps)
    Matrix grad_gamma = Matrix::Zero(2, 2);
    grad_gamma(0, 0) = 2.0;  // L = A1 = 2 * Gamma_11
    const CostGradient gc =
        vjp_plan_to_cost(grad_gamma, out.plan, out.problem.marginals, eps);
    const double s = dsigmoid(u) / (2.0 * eps);
    CHECK(gc.grad_c(0, 0) == doctest::Approx(-s).epsilon(1e-6));
    CHECK(gc.grad_c(0, 1) == doctest::Approx(s).epsilon(1e-6));
    CHECK(gc.grad_c(1, 0) == doctest::Approx(s).epsilon(1e-6));
    CHECK(gc.grad_c(1, 1) == doctest::Approx(-s).epsilon(1e-6));

    const ScoreGradient gx = chain_cost_to_scores(gc, x, out.problem);
    CHECK(gx.grad_x[0] == doctest::Approx(-dsigmoid(u) / eps).epsilon(1e-6));
    // A1 depends on x2 - x1 only, so the gradient sums to zero
    CHECK(gx.grad_x.sum() == doctest::Approx(0.0).epsilon(1e-12));
    if (eps == 1.0) {
      CHECK(gx.grad_x[0] == doctest::Approx(-0.1966).epsilon(1e-3));
    }
  }
}

TEST_CASE("cost gradient is equivariant under score swaps") {
  const double a = 0.7;
  const double eps = 1.0;
  const EotConfig cfg = solver_cfg(eps, 20000, 1e-15, false);
  const TopkOutput fwd = soft_topk(ScoreVector(vec({-a, a})), 1, cfg);
  const TopkOutput swapped = soft_topk(ScoreVector(vec({a, -a})), 1, cfg);

  Matrix gg = Matrix::Zero(2, 2);
  gg(0, 0) = 1.0;
  Matrix gg_swapped = Matrix::Zero(2, 2);
  gg_swapped(1, 0) = 1.0;

  const CostGradient g1 =
      vjp_plan_to_cost(gg, fwd.plan, fwd.problem.marginals, eps);
  const CostGradient g2 = vjp_plan_to_cost(gg_swapped, swapped.plan,
                                           swapped.problem.marginals, eps);
  // swapping the scores and the cotangent rows swaps the gradient rows
  CHECK((g1.grad_c.row(0) - g2.grad_c.row(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.grad_c.row(1) - g2.grad_c.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("score gradient never vanishes (nonzero Jacobian)") {
  std::mt19937_64 rng(62);
  const EotConfig cfg = solver_cfg(0.1, 5000, 1e-12);
  for (int t = 0; t < 25; ++t) {
    const Index n = 5 + static_cast<Index>(rng() % 26);
    const Index k = 1 + static_cast<Index>(rng() % (n - 1));
    const TopkOutput out = soft_topk(ScoreVector(gaussian(rng, n)), k, cfg);
    Vector probe = Vector::Zero(n);
    probe[static_cast<Index>(rng() % n)] = 1.0;
    const ScoreGradient g = vjp_soft_topk(probe, out, cfg);
    CHECK(g.grad_x.cwiseAbs().maxCoeff() > 1e-12);
  }
}

TEST_CASE("backward consumes only the converged plan") {
  // identical plans with different iteration histories give identical
  // gradients: nothing but gamma, marginals, eps enters
  const EotConfig cfg = solver_cfg(0.05, 4000, 1e-13);
  const EotProblem p = build_topk_problem(ScoreVector(fig_scores()), 4, cfg);
  TransportPlan plan = solve_eot(p, cfg);
  TransportPlan relabeled = plan;
  relabeled.iters_run = 1 << 30;
  relabeled.dual_f.setZero();
  relabeled.dual_g.setZero();
  Matrix gg = Matrix::Ones(7, 2);
  const Matrix a = vjp_plan_to_cost(gg, plan, p.marginals, cfg.epsilon).grad_c;
  const Matrix b =
      vjp_plan_to_cost(gg, relabeled, p.marginals, cfg.epsilon).grad_c;
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences") {
  SUBCASE("quadratic is differentiated exactly") {
    const auto loss = [](const Vector& v) { return v.squaredNorm(); };
    const Vector g = finite_diff_grad(loss, vec({1.0, 2.0}), 1e-4);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-9));
  }

  SUBCASE("matches the two-score closed form") {
    const EotConfig cfg = solver_cfg(1.0, 20000, 1e-15, false);
    const auto loss = [&](const Vector& v) {
      return soft_topk(ScoreVector(v), 1, cfg).a[0];
    };
    const Vector g = finite_diff_grad(loss, vec({0.0, 1.0}), 1e-4);
    CHECK(g[0] == doctest::Approx(-dsigmoid(1.0)).epsilon(1e-6));
  }

  SUBCASE("masked coordinates are skipped") {
    const auto loss = [](const Vector& v) { return v[0]; };
    const Vector g = finite_diff_grad(loss, vec({1.0, kNegInf}), 1e-4);
    CHECK(g[1] == 0.0);
  }
}

TEST_CASE("grad_check agrees with finite differences") {
  std::mt19937_64 rng(63);

  SUBCASE("eps = 1e-1 within 1e-3") {
    for (int t = 0; t < 5; ++t) {
      const Vector x = gaussian(rng, 20);
      Vector probe = gaussian(rng, 20);
      probe /= probe.norm();
      const GradCheckReport rep =
          grad_check(ScoreVector(x), 5, solver_cfg(0.1, 200000, 1e-13), probe);
      CHECK(rep.max_rel_err <= 1e-3);
    }
  }

  SUBCASE("eps = 1e-2 within 1e-2") {
    for (int t = 0; t < 3; ++t) {
      const Vector x = gaussian(rng, 20);
      Vector probe = gaussian(rng, 20);
      probe /= probe.norm();
      const GradCheckReport rep = grad_check(
          ScoreVector(x), 5, solver_cfg(1e-2, 200000, 1e-14), probe);
      CHECK(rep.max_rel_err <= 1e-2);
    }
  }

  SUBCASE("zero probe gives zero gradients") {
    const GradCheckReport rep =
        grad_check(ScoreVector(fig_scores()), 3, solver_cfg(0.1, 5000, 1e-12),
                   Vector::Zero(7));
    CHECK(rep.analytic.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.numeric.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.max_rel_err == 0.0);
  }

  SUBCASE("eps below 1e-3 is rejected") {
    CHECK_THROWS_AS(grad_check(ScoreVector(fig_scores()), 3,
                               solver_cfg(1e-4, 100, 1e-6), Vector::Zero(7)),
                    std::invalid_argument);
  }
}

TEST_CASE("naive gradient guards its instance size") {
  std::mt19937_64 rng(64);
  const EotConfig cfg = solver_cfg(0.5, 50, 0.0);
  const EotProblem p = build_topk_problem(ScoreVector(gaussian(rng, 65)), 5, cfg);
  const TransportPlan plan = solve_eot(p, cfg);
  const Matrix gg = Matrix::Ones(65, 2);
  CHECK_THROWS_AS(vjp_naive(gg, plan, p.marginals, cfg.epsilon),
                  std::invalid_argument);
}

TEST_CASE("masked scores receive zero gradient") {
  const EotConfig cfg = solver_cfg(0.1, 5000, 1e-12);
  const ScoreVector x(vec({0.4, kNegInf, 1.9, -0.2, 1.4}));
  const TopkOutput out = soft_topk(x, 2, cfg);
  Vector probe = Vector::Ones(5);
  const ScoreGradient g = vjp_soft_topk(probe, out, cfg);
  CHECK(g.grad_x[1] == 0.0);
  CHECK(g.grad_x.cwiseAbs().maxCoeff() > 0.0);
}
