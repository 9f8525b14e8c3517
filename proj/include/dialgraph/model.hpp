#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dialgraph/encode.hpp"
#include "dialgraph/graph.hpp"

namespace dialgraph {

enum class Pooling { mean, norm_sum, max, mean_max };
/// How the relational normalizer c_{i,theta} is obtained.
enum class NormMode { by_count, learned };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view name);
std::string_view norm_mode_name(NormMode m);
NormMode parse_norm_mode(std::string_view name);

struct ModelConfig {
  std::size_t dim = 32;         // d: encoder / contextualizer width
  std::size_t stage1_dim = 32;  // d'
  std::size_t stage2_dim = 32;  // d''
  std::size_t window = 4;       // M
  Pooling pooling = Pooling::mean;
  NormMode norm = NormMode::by_count;
  double dropout = 0.5;

  /// Width of g_i = [h_i, e_i].
  std::size_t node_width() const { return stage2_dim + dim; }
  /// Width of the pooled vector fed to the score head.
  std::size_t head_width() const { return pooling == Pooling::mean_max ? 2 * node_width() : node_width(); }
  void validate() const;
};

/// All learnable tensors. The same layout doubles as the gradient and
/// optimizer-moment container.
struct ModelParams {
  ModelConfig config;
  Matrix attention;                                     // W_e, d x d
  std::array<Matrix, kTypedRelationCount> relation;     // W'_theta, d' x d
  Matrix self1;                                         // W'_0, d' x d
  Matrix neighbor2;                                     // W'', d'' x d'
  Matrix self2;                                         // W''_0, d'' x d'
  BiLstmParams context;
  Vector head_weight;                                   // head_width
  Vector head_bias;                                     // 1
  Vector norm_log;  // log c_theta per typed relation; used only under NormMode::learned

  static ModelParams zeros(const ModelConfig& config);
  /// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  /// Calls f(name, tensor_of_each...) for every tensor, in a fixed order.
  template <typename F, typename... P>
  static void zip(F&& f, P&... sets) {
    f("attention", sets.attention...);
    for (std::size_t r = 0; r < kTypedRelationCount; ++r)
      f(std::string("stage1.relation.") + std::string(relation_name(static_cast<Relation>(r + 1))),
        sets.relation[r]...);
    f("stage1.self", sets.self1...);
    f("stage1.norm_log", sets.norm_log...);
    f("stage2.neighbor", sets.neighbor2...);
    f("stage2.self", sets.self2...);
    f("context.forward.input", sets.context.forward.input_weight...);
    f("context.forward.recurrent", sets.context.forward.recurrent_weight...);
    f("context.forward.bias", sets.context.forward.bias...);
    f("context.backward.input", sets.context.backward.input_weight...);
    f("context.backward.recurrent", sets.context.backward.recurrent_weight...);
    f("context.backward.bias", sets.context.backward.bias...);
    f("head.weight", sets.head_weight...);
    f("head.bias", sets.head_bias...);
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    zip(f, *this);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    zip(f, *this);
  }

  bool all_finite() const;
  std::size_t parameter_count() const;
};

struct ScoreOutput {
  double score = 0.0;
  Vector dialogue_repr;  // o
  Matrix node_reprs;     // rows g_i = [h_i, e_i]
};

/// c_{i,theta}: by_count uses |S_i^theta|; learned uses exp(norm_log[theta]).
/// Returns an (n x 8) matrix; entries for empty relation sets are unused.
Matrix relation_normalizers(const DialogueGraph& graph, const ModelParams& params, NormMode mode);

/// Stage-1 pre-activation: sum_theta sum_j a_ij / c_{i,theta} W'_theta e_j + a_ii W'_0 e_i.
Matrix conv_stage1_pre(const DialogueGraph& graph, const ModelParams& params, NormMode mode);
/// ReLU of the above; n x d'.
Matrix conv_stage1(const DialogueGraph& graph, const ModelParams& params, NormMode mode);

/// Sum of h'_j over each node's windowed neighbors (self excluded).
Matrix neighbor_sum(const Matrix& h_prime, const DialogueGraph& graph);
Matrix conv_stage2_pre(const Matrix& h_prime, const DialogueGraph& graph, const ModelParams& params);
/// ReLU(sum_{j in N(i), j != i} W'' h'_j + W''_0 h'_i); n x d''.
Matrix conv_stage2(const Matrix& h_prime, const DialogueGraph& graph, const ModelParams& params);

/// Pools rows of g. For max pooling, `argmax` receives the winning row per column.
Vector pool_rows(const Matrix& g, Pooling pooling, std::vector<Eigen::Index>* argmax = nullptr);

/// g_i = [h_i, e_i], pooled, then head_weight . o + head_bias.
ScoreOutput pool_and_score(const Matrix& context, const Matrix& h, const ModelParams& params, Pooling pooling);

/// max(0, -y (s_first - s_second) + margin)
double margin_loss(double s_first, double s_second, int y, double margin = 1.0);

/// encode -> contextualize -> graph -> stage 1 -> stage 2 -> pool + head.
/// No dropout. Uses params.config for window, pooling and normalizer.
ScoreOutput score_dialogue(const Dialogue& d, const UtteranceEncoder& enc, const ModelParams& params);

/// Same as score_dialogue but starting from the encoder output.
ScoreOutput score_encoded(const Matrix& raw, const std::vector<Speaker>& speakers, const ModelParams& params);

}  // namespace dialgraph
