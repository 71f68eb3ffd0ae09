#pragma once

#include <cstdint>
#include <vector>

#include "softtopk/types.hpp"

namespace softtopk::cli {

// Toy end-to-end k-nearest-neighbor training on a synthetic 2-D two-class
// Gaussian mixture. The signal axis separates the classes; the nuisance
// axis carries large noise, so plain kNN on raw coordinates is weak. A
// linear feature map W is trained by gradient descent through the smoothed
// top-k selection: per query, the loss is the selected mass landing on
// wrong-class templates.
struct KnnDemoConfig {
  std::uint64_t seed = 1;
  Index k = 5;
  double epsilon = 0.1;
  int steps = 60;
  double lr = 0.5;
  int train_per_class = 40;
  int test_per_class = 50;
  double class_separation = 1.0;  // class means at +-separation on the signal axis
  double signal_noise = 0.5;
  double nuisance_noise = 8.0;
  int solver_max_iter = 2000;
  double solver_tol = 1e-9;
};

struct KnnDemoResult {
  double untrained_train_accuracy = 0.0;
  double untrained_test_accuracy = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> losses;  // one entry per training step
  bool loss_non_increasing_first10 = true;
  Matrix feature_map;  // final 2x2 W
};

KnnDemoResult run_knn_demo(const KnnDemoConfig& cfg);

}  // namespace softtopk::cli
