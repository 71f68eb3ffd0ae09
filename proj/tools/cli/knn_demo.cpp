#include "cli/knn_demo.hpp"

#include <algorithm>
#include <random>

#include "softtopk/applications.hpp"
#include "softtopk/backward.hpp"
#include "softtopk/soft_topk.hpp"

namespace softtopk::cli {

namespace {

struct Dataset {
  Matrix points;            // [N, 2]
  std::vector<int> labels;  // size N, values {0, 1}
};

Dataset sample_mixture(std::mt19937_64& rng, const KnnDemoConfig& cfg,
                       int per_class) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.points.resize(2 * per_class, 2);
  d.labels.resize(static_cast<size_t>(2 * per_class));
  Index row = 0;
  for (int cls = 0; cls < 2; ++cls) {
    const double mean = cls == 0 ? -cfg.class_separation : cfg.class_separation;
    for (int i = 0; i < per_class; ++i, ++row) {
      d.points(row, 0) = mean + cfg.signal_noise * noise(rng);
      d.points(row, 1) = cfg.nuisance_noise * noise(rng);
      d.labels[static_cast<size_t>(row)] = cls;
    }
  }
  return d;
}

// majority vote over the hard k nearest templates in feature space
double knn_accuracy(const Matrix& w, const Dataset& train,
                    const Dataset& queries, Index k) {
  const Matrix f_train = train.points * w.transpose();
  const Matrix f_query = queries.points * w.transpose();
  int correct = 0;
  for (Index q = 0; q < f_query.rows(); ++q) {
    Vector dist(f_train.rows());
    for (Index i = 0; i < f_train.rows(); ++i) {
      dist[i] = (f_train.row(i) - f_query.row(q)).norm();
    }
    const Vector sel = hard_topk(ScoreVector(dist), k);
    double votes[2] = {0.0, 0.0};
    for (Index i = 0; i < sel.size(); ++i) {
      if (sel[i] > 0.0) votes[train.labels[static_cast<size_t>(i)]] += 1.0;
    }
    const int pred = votes[1] > votes[0] ? 1 : 0;
    if (pred == queries.labels[static_cast<size_t>(q)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(f_query.rows());
}

}  // namespace

KnnDemoResult run_knn_demo(const KnnDemoConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const Dataset train = sample_mixture(rng, cfg, cfg.train_per_class);
  const Dataset test = sample_mixture(rng, cfg, cfg.test_per_class);
  const Index n_train = train.points.rows();
  const Index n_templates = n_train - 1;

  EotConfig solver;
  solver.epsilon = cfg.epsilon;
  solver.max_iter = cfg.solver_max_iter;
  solver.residual_tol = cfg.solver_tol;

  KnnDemoResult result;
  Matrix w = Matrix::Identity(2, 2);
  result.untrained_train_accuracy = knn_accuracy(w, train, train, cfg.k);
  result.untrained_test_accuracy = knn_accuracy(w, train, test, cfg.k);

  const double kd = static_cast<double>(cfg.k);
  for (int step = 0; step < cfg.steps; ++step) {
    Matrix grad_w = Matrix::Zero(2, 2);
    double loss_sum = 0.0;
    for (Index j = 0; j < n_train; ++j) {
      // templates = everything but the query
      Matrix deltas(n_templates, 2);
      std::vector<int> labels;
      labels.reserve(static_cast<size_t>(n_templates));
      Index r = 0;
      for (Index i = 0; i < n_train; ++i) {
        if (i == j) continue;
        deltas.row(r++) = train.points.row(i) - train.points.row(j);
        labels.push_back(train.labels[static_cast<size_t>(i)]);
      }
      const Matrix mapped = deltas * w.transpose();  // [n-1, 2]
      Vector dist = mapped.rowwise().norm();

      const TopkOutput out = soft_topk(ScoreVector(dist), cfg.k, solver);
      const LabelMatrix lm = one_hot_labels(labels, 2);
      Vector query_onehot = Vector::Zero(2);
      query_onehot[train.labels[static_cast<size_t>(j)]] = 1.0;

      loss_sum += kd - knn_loss(out, lm, query_onehot);
      const Vector grad_a = -knn_loss_grad_a(lm, query_onehot);
      const Vector grad_dist = vjp_soft_topk(grad_a, out, solver).grad_x;

      // d dist_i / dW = (W delta_i) delta_i^T / dist_i
      for (Index i = 0; i < n_templates; ++i) {
        const double safe = std::max(dist[i], 1e-12);
        grad_w.noalias() += (grad_dist[i] / safe) *
                            (mapped.row(i).transpose() * deltas.row(i));
      }
    }
    result.losses.push_back(loss_sum / static_cast<double>(n_train));
    grad_w /= static_cast<double>(n_train);
    w -= cfg.lr * grad_w;
  }

  for (size_t i = 0; i + 1 < result.losses.size() && i + 1 < 10; ++i) {
    if (result.losses[i + 1] > result.losses[i] + 1e-12) {
      result.loss_non_increasing_first10 = false;
    }
  }
  result.train_accuracy = knn_accuracy(w, train, train, cfg.k);
  result.test_accuracy = knn_accuracy(w, train, test, cfg.k);
  result.feature_map = w;
  return result;
}

}  // namespace softtopk::cli
