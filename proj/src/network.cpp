#include "dialgraph/network.hpp"

#include <cmath>
#include <stdexcept>

namespace dialgraph {

namespace {

// Inverted dropout mask: entries are 0 or 1/(1-p).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0.0) return Matrix::Ones(rows, cols);
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng->uniform01() < p ? 0.0 : keep;
  return m;
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

EncodedInput encode_input(const Dialogue& d, const UtteranceEncoder& enc) {
  return {encode_utterances(d, enc), d.speakers()};
}

BatchTape forward_batch(const std::vector<const EncodedInput*>& batch, const ModelParams& params, Rng* dropout_rng) {
  const ModelConfig& cfg = params.config;
  BatchTape t;
  t.lstm.resize(batch.size());
  std::vector<DialogueGraph> graphs;
  graphs.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch[k]->raw.rows() == 0) throw std::invalid_argument("forward: dialogue has no utterances");
    Matrix e = contextualize(batch[k]->raw, params.context, &t.lstm[k]);
    graphs.push_back(build_graph(e, batch[k]->speakers, params.attention, cfg.window));
  }
  t.graph = disjoint_union(graphs);
  const Matrix& e = t.graph.nodes;
  t.query = e * params.attention;

  // Stage 1.
  t.normalizers = relation_normalizers(t.graph, params, cfg.norm);
  for (std::size_t r = 0; r < kTypedRelationCount; ++r) t.projected[r] = e * params.relation[r].transpose();
  t.projected_self = e * params.self1.transpose();
  t.pre1 = Matrix::Zero(e.rows(), params.self1.rows());
  for (const auto& ed : t.graph.edges) {
    const auto i = idx(ed.dst), j = idx(ed.src);
    if (ed.relation == Relation::Self) {
      t.pre1.row(i) += ed.weight * t.projected_self.row(i);
    } else {
      const auto r = typed_index(ed.relation);
      t.pre1.row(i) += (ed.weight / t.normalizers(i, idx(r))) * t.projected[r].row(j);
    }
  }
  t.mask1 = dropout_mask(t.pre1.rows(), t.pre1.cols(), cfg.dropout, dropout_rng);
  t.h1 = t.pre1.cwiseMax(0.0).cwiseProduct(t.mask1);

  // Stage 2.
  t.neighbors = neighbor_sum(t.h1, t.graph);
  t.pre2 = t.neighbors * params.neighbor2.transpose() + t.h1 * params.self2.transpose();
  t.mask2 = dropout_mask(t.pre2.rows(), t.pre2.cols(), cfg.dropout, dropout_rng);
  t.h2 = t.pre2.cwiseMax(0.0).cwiseProduct(t.mask2);

  // Pool and score per dialogue.
  const std::size_t segs = t.graph.segment_count();
  t.pooled.resize(segs);
  t.head_in.resize(segs);
  t.head_mask.resize(segs);
  t.argmax.resize(segs);
  t.pooled_norm.assign(segs, 0.0);
  t.scores.resize(segs);
  for (std::size_t s = 0; s < segs; ++s) {
    const auto lo = idx(t.graph.segments[s]), n = idx(t.graph.segments[s + 1]) - lo;
    Matrix g(n, t.h2.cols() + e.cols());
    g << t.h2.middleRows(lo, n), e.middleRows(lo, n);
    t.pooled[s] = pool_rows(g, cfg.pooling, &t.argmax[s]);
    if (cfg.pooling == Pooling::norm_sum) t.pooled_norm[s] = g.colwise().sum().norm();
    t.head_mask[s] = dropout_mask(t.pooled[s].size(), 1, cfg.dropout, dropout_rng);
    t.head_in[s] = t.pooled[s].cwiseProduct(t.head_mask[s]);
    t.scores[s] = params.head_weight.dot(t.head_in[s]) + params.head_bias[0];
  }
  return t;
}

void backward_batch(const BatchTape& t, const ModelParams& params, const std::vector<double>& d_scores,
                    ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const Matrix& e = t.graph.nodes;
  const Eigen::Index d2 = t.h2.cols(), d = e.cols(), width = d2 + d;
  Matrix d_e = Matrix::Zero(e.rows(), d);
  Matrix d_h2 = Matrix::Zero(t.h2.rows(), d2);

  // Head and pooling.
  for (std::size_t s = 0; s < t.scores.size(); ++s) {
    const double ds = d_scores[s];
    if (ds == 0.0) continue;
    grads.head_weight += ds * t.head_in[s];
    grads.head_bias[0] += ds;
    const Vector d_pooled = ds * params.head_weight.cwiseProduct(t.head_mask[s]);

    const auto lo = idx(t.graph.segments[s]), n = idx(t.graph.segments[s + 1]) - lo;
    Matrix d_g = Matrix::Zero(n, width);
    auto mean_back = [&](const Vector& dv) { d_g.rowwise() += (dv / static_cast<double>(n)).transpose(); };
    auto max_back = [&](const Vector& dv) {
      for (Eigen::Index k = 0; k < width; ++k) d_g(t.argmax[s][static_cast<std::size_t>(k)], k) += dv[k];
    };
    switch (cfg.pooling) {
      case Pooling::mean: mean_back(d_pooled); break;
      case Pooling::max: max_back(d_pooled); break;
      case Pooling::mean_max:
        mean_back(d_pooled.head(width));
        max_back(d_pooled.tail(width));
        break;
      case Pooling::norm_sum: {
        const double norm = t.pooled_norm[s];
        if (norm > 0.0) {
          const Vector& o = t.pooled[s];
          const Vector d_sum = (d_pooled - o * o.dot(d_pooled)) / norm;
          d_g.rowwise() += d_sum.transpose();
        }
        break;
      }
    }
    d_h2.middleRows(lo, n) += d_g.leftCols(d2);
    d_e.middleRows(lo, n) += d_g.rightCols(d);
  }

  // Stage 2.
  const Matrix d_pre2 = d_h2.cwiseProduct(t.mask2).cwiseProduct((t.pre2.array() > 0.0).cast<double>().matrix());
  grads.neighbor2.noalias() += d_pre2.transpose() * t.neighbors;
  grads.self2.noalias() += d_pre2.transpose() * t.h1;
  const Matrix d_neighbors = d_pre2 * params.neighbor2;
  Matrix d_h1 = d_pre2 * params.self2;
  for (const auto& ed : t.graph.edges)
    if (ed.dst != ed.src) d_h1.row(idx(ed.src)) += d_neighbors.row(idx(ed.dst));

  // Stage 1.
  const Matrix d_pre1 = d_h1.cwiseProduct(t.mask1).cwiseProduct((t.pre1.array() > 0.0).cast<double>().matrix());
  std::array<Matrix, kTypedRelationCount> d_proj;
  for (auto& m : d_proj) m = Matrix::Zero(e.rows(), d_pre1.cols());
  Matrix d_proj_self = Matrix::Zero(e.rows(), d_pre1.cols());
  std::vector<double> d_weight(t.graph.edges.size(), 0.0);
  for (std::size_t k = 0; k < t.graph.edges.size(); ++k) {
    const auto& ed = t.graph.edges[k];
    const auto i = idx(ed.dst), j = idx(ed.src);
    if (ed.relation == Relation::Self) {
      d_proj_self.row(i) += ed.weight * d_pre1.row(i);
      d_weight[k] = d_pre1.row(i).dot(t.projected_self.row(i));
    } else {
      const auto r = typed_index(ed.relation);
      const double c = t.normalizers(i, idx(r));
      const double msg = d_pre1.row(i).dot(t.projected[r].row(j));
      d_proj[r].row(j) += (ed.weight / c) * d_pre1.row(i);
      d_weight[k] = msg / c;
      if (cfg.norm == NormMode::learned) grads.norm_log[idx(r)] -= ed.weight / c * msg;
    }
  }
  for (std::size_t r = 0; r < kTypedRelationCount; ++r) {
    grads.relation[r].noalias() += d_proj[r].transpose() * e;
    d_e.noalias() += d_proj[r] * params.relation[r];
  }
  grads.self1.noalias() += d_proj_self.transpose() * e;
  d_e.noalias() += d_proj_self * params.self1;

  // Attention softmax. Edges are sorted by destination, so each node's
  // incoming edges form one contiguous run.
  Matrix d_query = Matrix::Zero(e.rows(), d);
  for (std::size_t b = 0; b < t.graph.edges.size();) {
    std::size_t end = b;
    const std::size_t dst = t.graph.edges[b].dst;
    double inner = 0.0;
    while (end < t.graph.edges.size() && t.graph.edges[end].dst == dst) {
      inner += t.graph.edges[end].weight * d_weight[end];
      ++end;
    }
    const auto i = idx(dst);
    for (std::size_t k = b; k < end; ++k) {
      const auto& ed = t.graph.edges[k];
      const double d_logit = ed.weight * (d_weight[k] - inner);
      const auto j = idx(ed.src);
      d_query.row(i) += d_logit * e.row(j);
      d_e.row(j) += d_logit * t.query.row(i);
    }
    b = end;
  }
  grads.attention.noalias() += e.transpose() * d_query;
  d_e.noalias() += d_query * params.attention.transpose();

  // Contextualizer, one sequence per segment.
  for (std::size_t s = 0; s + 1 < t.graph.segments.size(); ++s) {
    const auto lo = idx(t.graph.segments[s]), n = idx(t.graph.segments[s + 1]) - lo;
    contextualize_backward(t.lstm[s], params.context, d_e.middleRows(lo, n), grads.context);
  }
}

double pair_loss(const std::vector<double>& scores, const std::vector<int>& labels, double margin,
                 std::vector<double>& d_scores) {
  if (scores.size() != 2 * labels.size()) throw std::invalid_argument("pair_loss: expected two scores per label");
  d_scores.assign(scores.size(), 0.0);
  if (labels.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double y = labels[k];
    const double l = margin_loss(scores[2 * k], scores[2 * k + 1], labels[k], margin);
    total += l;
    if (l > 0.0) {
      d_scores[2 * k] -= y * inv;
      d_scores[2 * k + 1] += y * inv;
    }
  }
  return total * inv;
}

}  // namespace dialgraph
