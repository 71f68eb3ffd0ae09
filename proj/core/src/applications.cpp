#include "softtopk/applications.hpp"

#include <cmath>

namespace softtopk {

LabelMatrix one_hot_labels(const std::vector<int>& labels, int num_classes) {
  LabelMatrix lm;
  lm.onehot = Matrix::Zero(num_classes, static_cast<Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("one_hot_labels: label out of range");
    }
    lm.onehot(labels[i], static_cast<Index>(i)) = 1.0;
  }
  return lm;
}

double knn_loss(const TopkOutput& a, const LabelMatrix& templates,
                const Vector& query_label) {
  if (templates.onehot.cols() != a.a.size()) {
    throw std::invalid_argument("knn_loss: template count != score count");
  }
  if (query_label.size() != templates.onehot.rows()) {
    throw std::invalid_argument("knn_loss: label dimension mismatch");
  }
  return query_label.dot(templates.onehot * a.a);
}

Vector knn_loss_grad_a(const LabelMatrix& templates,
                       const Vector& query_label) {
  if (query_label.size() != templates.onehot.rows()) {
    throw std::invalid_argument("knn_loss_grad_a: label dimension mismatch");
  }
  return templates.onehot.transpose() * query_label;
}

Vector topk_attention_weights(const Vector& scores, Index k,
                              const EotConfig& cfg) {
  const TopkOutput sel = soft_topk(ScoreVector(scores), k, cfg,
                                   /*largest=*/true);
  Vector z = scores + sel.a.cwiseMax(1e-30).array().log().matrix();
  const double mx = z.maxCoeff();
  Vector w = (z.array() - mx).exp();
  w /= w.sum();
  return w;
}

BeamMixOutput beam_step_mix(const BeamMixInput& in) {
  const Index ranks = static_cast<Index>(in.rank_weights.size());
  if (ranks == 0) throw std::invalid_argument("beam_step_mix: empty tensor");
  const Index vocab = in.rank_weights[0].rows();
  const Index beams = in.rank_weights[0].cols();
  if (in.embeddings.rows() != vocab) {
    throw std::invalid_argument("beam_step_mix: embeddings rows != V");
  }
  if (in.hidden.rows() != beams) {
    throw std::invalid_argument("beam_step_mix: hidden rows != k");
  }

  BeamMixOutput out;
  out.next_embeddings = Matrix::Zero(ranks, in.embeddings.cols());
  out.next_hidden = Matrix::Zero(ranks, in.hidden.cols());
  for (Index l = 0; l < ranks; ++l) {
    const Matrix& a = in.rank_weights[l];
    if (a.rows() != vocab || a.cols() != beams) {
      throw std::invalid_argument("beam_step_mix: ragged rank slices");
    }
    // sum_{j,i} a(j,i) emb_j  ==  emb^T (a 1);  sum_{j,i} a(j,i) hid_i == hid^T (a^T 1)
    out.next_embeddings.row(l) =
        (in.embeddings.transpose() * a.rowwise().sum()).transpose();
    out.next_hidden.row(l) =
        (in.hidden.transpose() * a.colwise().sum().transpose()).transpose();
  }
  return out;
}

BeamChoice beam_backtrack(const std::vector<Matrix>& rank_weights,
                          Index rank) {
  if (rank < 0 || rank >= static_cast<Index>(rank_weights.size())) {
    throw std::invalid_argument("beam_backtrack: rank out of range");
  }
  const Matrix& a = rank_weights[static_cast<size_t>(rank)];
  BeamChoice best{0, 0};
  double best_val = -std::numeric_limits<double>::infinity();
  // scan in (token, predecessor) order so strict improvement keeps the
  // lexicographically smallest argmax
  for (Index j = 0; j < a.rows(); ++j) {
    for (Index i = 0; i < a.cols(); ++i) {
      if (a(j, i) > best_val) {
        best_val = a(j, i);
        best = BeamChoice{j, i};
      }
    }
  }
  return best;
}

std::vector<Matrix> sorted_output_to_beam_tensor(const SortedTopkOutput& out,
                                                 Index vocab, Index beams) {
  const Index n = out.a.rows();
  const Index k = out.a.cols();
  if (vocab * beams != n) {
    throw std::invalid_argument(
        "sorted_output_to_beam_tensor: V*k != candidate count");
  }
  std::vector<Matrix> slices(static_cast<size_t>(k));
  for (Index l = 0; l < k; ++l) {
    Matrix slice(vocab, beams);
    for (Index j = 0; j < vocab; ++j) {
      for (Index i = 0; i < beams; ++i) {
        slice(j, i) = out.a(j * beams + i, l);
      }
    }
    slices[static_cast<size_t>(l)] = std::move(slice);
  }
  return slices;
}

}  // namespace softtopk
