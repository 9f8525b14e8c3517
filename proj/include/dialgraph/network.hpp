#pragma once

#include <vector>

#include "dialgraph/model.hpp"
#include "dialgraph/rng.hpp"

namespace dialgraph {

/// Encoder output for one dialogue plus its speaker tags.
struct EncodedInput {
  Matrix raw;
  std::vector<Speaker> speakers;
};

EncodedInput encode_input(const Dialogue& d, const UtteranceEncoder& enc);

/// Everything the backward pass needs from one batched forward pass. The
/// batch is one disjoint-union graph; each dialogue is one segment.
struct BatchTape {
  std::vector<BiLstmTrace> lstm;
  DialogueGraph graph;  // nodes = contextualized e_i of every dialogue
  Matrix query;         // E * W_e
  Matrix normalizers;   // n x 8
  std::array<Matrix, kTypedRelationCount> projected;  // E * W'_theta^T
  Matrix projected_self;
  Matrix pre1, mask1, h1;  // h1 = relu(pre1) .* mask1
  Matrix neighbors, pre2, mask2, h2;
  std::vector<Vector> pooled;   // o per segment, before dropout
  std::vector<Vector> head_mask;
  std::vector<Vector> head_in;  // o after dropout
  std::vector<std::vector<Eigen::Index>> argmax;
  std::vector<double> pooled_norm;  // |sum g| for norm_sum
  std::vector<double> scores;
};

/// Scores a batch. With `dropout_rng` set and config.dropout > 0, inverted
/// dropout is applied after each stage and before the head; otherwise the
/// pass is deterministic.
BatchTape forward_batch(const std::vector<const EncodedInput*>& batch, const ModelParams& params,
                        Rng* dropout_rng = nullptr);

/// Accumulates d(sum_k d_scores[k] * score_k)/d(params) into `grads`.
void backward_batch(const BatchTape& tape, const ModelParams& params, const std::vector<double>& d_scores,
                    ModelParams& grads);

/// Mean margin loss over pairs (score index 2k vs 2k+1) and its gradient
/// w.r.t. each score.
double pair_loss(const std::vector<double>& scores, const std::vector<int>& labels, double margin,
                 std::vector<double>& d_scores);

}  // namespace dialgraph
