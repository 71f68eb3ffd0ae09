#pragma once

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace softtopk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Raised when a solve cannot produce finite results: overflow in the plain
// Sinkhorn kernel, or a singular dual Hessian in the backward pass.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Input scores. Entries are finite or -inf; a -inf entry means a score of
// minus infinity, so it always belongs to a smallest-k selection and never
// to a largest-k one (the masking idiom for attention). At least one entry
// must be finite and n >= 2.
class ScoreVector {
 public:
  explicit ScoreVector(Vector values) : values_(std::move(values)) {
    if (values_.size() < 2) {
      throw std::invalid_argument("ScoreVector: need at least 2 scores");
    }
    for (Index i = 0; i < values_.size(); ++i) {
      const double v = values_[i];
      if (v == kNegInf) {
        ++masked_count_;
      } else if (!std::isfinite(v)) {
        throw std::invalid_argument(
            "ScoreVector: entries must be finite or -inf");
      }
    }
    if (masked_count_ == values_.size()) {
      throw std::invalid_argument("ScoreVector: all scores are -inf");
    }
  }

  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  Index masked_count() const { return masked_count_; }
  bool has_masked() const { return masked_count_ > 0; }

 private:
  Vector values_;
  Index masked_count_ = 0;
};

// Anchor positions: [0, 1] for top-k, [0, 1, ..., k] for sorted top-k.
struct AnchorSet {
  Vector values;
};

struct Marginals {
  Vector mu;  // source mass, one entry per score; uniform 1/n
  Vector nu;  // target mass, one entry per anchor
};

enum class SinkhornMode { kPlain, kLog, kAuto };

struct EotConfig {
  double epsilon = 1e-2;  // entropy regularization
  int max_iter = 200;
  SinkhornMode mode = SinkhornMode::kAuto;
  std::optional<double> residual_tol;  // optional early stop on feasibility
  bool normalize_cost = true;          // divide the cost by its max entry
};

// Entropic-OT instance for a (sorted) top-k selection. `cost` holds the
// squared distances to the anchors, already divided by `normalizer` when
// normalization is on (normalizer == 1 otherwise).
struct EotProblem {
  Matrix cost;  // [n, m], finite, >= 0
  Marginals marginals;
  AnchorSet anchors;
  double normalizer = 1.0;
  Vector masked_scores;  // scores after -inf replacement, [n]

  Index n() const { return cost.rows(); }
  Index m() const { return cost.cols(); }
};

// Transport plan with solver diagnostics. Dual potentials are stored in the
// log domain (f = eps*log p, g = eps*log q) in both solver modes.
struct TransportPlan {
  Matrix gamma;  // [n, m], entrywise >= 0
  Vector dual_f;  // [n]
  Vector dual_g;  // [m]
  int iters_run = 0;
  double marginal_residual = 0.0;  // max of ||G1-mu||_inf, ||G^T 1-nu||_inf
  SinkhornMode mode_used = SinkhornMode::kPlain;  // kernel that produced gamma
};

}  // namespace softtopk
