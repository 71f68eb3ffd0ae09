#pragma once

#include <vector>

#include "softtopk/soft_topk.hpp"
#include "softtopk/types.hpp"

namespace softtopk {

// One-hot label encodings as columns: onehot(c, i) = 1 iff template i has
// class c.
struct LabelMatrix {
  Matrix onehot;  // [num_classes, num_templates]
};

LabelMatrix one_hot_labels(const std::vector<int>& labels, int num_classes);

// Smoothed count of selected templates sharing the query label:
//   loss = query_label^T * onehot * a.
// Linear in a; its gradient is knn_loss_grad_a.
double knn_loss(const TopkOutput& a, const LabelMatrix& templates,
                const Vector& query_label);

// d(loss)/da: indicator of templates whose label matches the query.
Vector knn_loss_grad_a(const LabelMatrix& templates,
                       const Vector& query_label);

// w = softmax(scores + log A^eps) where A^eps marks the k largest scores.
// Near-zero A entries are floored at 1e-30 before the log.
Vector topk_attention_weights(const Vector& scores, Index k,
                              const EotConfig& cfg);

// Rank-weight tensor plus the quantities a beam step mixes. rank_weights[l]
// is the V x k slice of smoothed indicators that candidate (token j, beam i)
// has rank l; each slice sums to 1.
struct BeamMixInput {
  std::vector<Matrix> rank_weights;  // k slices, each [V, k]
  Matrix embeddings;                 // [V, D] token embeddings
  Matrix hidden;                     // [k, H] beam hidden states
};

struct BeamMixOutput {
  Matrix next_embeddings;  // [k, D]; row l = sum_{j,i} a(j,i,l) * emb_j
  Matrix next_hidden;      // [k, H]; row l = sum_{j,i} a(j,i,l) * hid_i
};

BeamMixOutput beam_step_mix(const BeamMixInput& in);

struct BeamChoice {
  Index token;        // selected vocabulary index o
  Index predecessor;  // beam index r the embedding chain continues from
};

// argmax over the rank slice, ties broken by smallest (token, predecessor)
// pair lexicographically.
BeamChoice beam_backtrack(const std::vector<Matrix>& rank_weights,
                          Index rank);

// Reshapes a sorted top-k output over n = V*k flat candidates into per-rank
// V x k slices. Flat candidate index j*k + i maps to (token j, beam i).
std::vector<Matrix> sorted_output_to_beam_tensor(const SortedTopkOutput& out,
                                                 Index vocab, Index beams);

}  // namespace softtopk
