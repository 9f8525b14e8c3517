#include "dialgraph/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dialgraph/network.hpp"
#include "dialgraph/rng.hpp"

namespace dialgraph {

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::norm_sum: return "norm_sum";
    case Pooling::max: return "max";
    case Pooling::mean_max: return "mean_max";
  }
  return "mean";
}

Pooling parse_pooling(std::string_view name) {
  if (name == "mean") return Pooling::mean;
  if (name == "norm_sum") return Pooling::norm_sum;
  if (name == "max") return Pooling::max;
  if (name == "mean_max") return Pooling::mean_max;
  throw std::invalid_argument("unknown pooling '" + std::string(name) + "'");
}

std::string_view norm_mode_name(NormMode m) { return m == NormMode::by_count ? "by_count" : "learned"; }

NormMode parse_norm_mode(std::string_view name) {
  if (name == "by_count") return NormMode::by_count;
  if (name == "learned") return NormMode::learned;
  throw std::invalid_argument("unknown normalizer mode '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("model dim must be even and >= 2");
  if (stage1_dim == 0 || stage2_dim == 0) throw std::invalid_argument("stage widths must be positive");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto d1 = static_cast<Eigen::Index>(config.stage1_dim);
  const auto d2 = static_cast<Eigen::Index>(config.stage2_dim);
  ModelParams p;
  p.config = config;
  p.attention = Matrix::Zero(d, d);
  for (auto& w : p.relation) w = Matrix::Zero(d1, d);
  p.self1 = Matrix::Zero(d1, d);
  p.neighbor2 = Matrix::Zero(d2, d1);
  p.self2 = Matrix::Zero(d2, d1);
  p.context = make_bilstm(config.dim);
  p.head_weight = Vector::Zero(static_cast<Eigen::Index>(config.head_width()));
  p.head_bias = Vector::Zero(1);
  p.norm_log = Vector::Zero(kTypedRelationCount);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  Rng rng(seed);
  const double hidden = static_cast<double>(config.dim / 2);
  p.for_each_tensor([&](const std::string& name, auto& t) {
    if (name == "stage1.norm_log") return;
    double fan_in = static_cast<double>(t.cols());
    if (name.rfind("context.", 0) == 0 && name.find(".bias") != std::string::npos) fan_in = hidden;
    if (name == "head.bias") fan_in = static_cast<double>(p.head_weight.size());
    if (name == "head.weight") fan_in = static_cast<double>(t.rows());
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-bound, bound);
  });
  return p;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

Matrix relation_normalizers(const DialogueGraph& graph, const ModelParams& params, NormMode mode) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(graph.node_count()), kTypedRelationCount);
  if (mode == NormMode::learned) {
    for (std::size_t r = 0; r < kTypedRelationCount; ++r)
      c.col(static_cast<Eigen::Index>(r)).setConstant(std::exp(params.norm_log[static_cast<Eigen::Index>(r)]));
    return c;
  }
  for (const auto& e : graph.edges)
    if (e.relation != Relation::Self)
      c(static_cast<Eigen::Index>(e.dst), static_cast<Eigen::Index>(typed_index(e.relation))) += 1.0;
  return c;
}

Matrix conv_stage1_pre(const DialogueGraph& graph, const ModelParams& params, NormMode mode) {
  const Matrix& e = graph.nodes;
  const Matrix c = relation_normalizers(graph, params, mode);
  std::array<Matrix, kTypedRelationCount> projected;
  for (std::size_t r = 0; r < kTypedRelationCount; ++r) projected[r] = e * params.relation[r].transpose();
  const Matrix self = e * params.self1.transpose();

  Matrix pre = Matrix::Zero(e.rows(), params.self1.rows());
  for (const auto& ed : graph.edges) {
    const auto i = static_cast<Eigen::Index>(ed.dst), j = static_cast<Eigen::Index>(ed.src);
    if (ed.relation == Relation::Self) {
      pre.row(i) += ed.weight * self.row(i);
    } else {
      const auto r = typed_index(ed.relation);
      pre.row(i) += (ed.weight / c(i, static_cast<Eigen::Index>(r))) * projected[r].row(j);
    }
  }
  return pre;
}

Matrix conv_stage1(const DialogueGraph& graph, const ModelParams& params, NormMode mode) {
  return conv_stage1_pre(graph, params, mode).cwiseMax(0.0);
}

Matrix neighbor_sum(const Matrix& h_prime, const DialogueGraph& graph) {
  Matrix s = Matrix::Zero(h_prime.rows(), h_prime.cols());
  for (const auto& ed : graph.edges)
    if (ed.dst != ed.src) s.row(static_cast<Eigen::Index>(ed.dst)) += h_prime.row(static_cast<Eigen::Index>(ed.src));
  return s;
}

Matrix conv_stage2_pre(const Matrix& h_prime, const DialogueGraph& graph, const ModelParams& params) {
  return neighbor_sum(h_prime, graph) * params.neighbor2.transpose() + h_prime * params.self2.transpose();
}

Matrix conv_stage2(const Matrix& h_prime, const DialogueGraph& graph, const ModelParams& params) {
  return conv_stage2_pre(h_prime, graph, params).cwiseMax(0.0);
}

Vector pool_rows(const Matrix& g, Pooling pooling, std::vector<Eigen::Index>* argmax) {
  if (g.rows() == 0) throw std::invalid_argument("pooling over an empty dialogue");
  auto max_rows = [&]() {
    Vector m(g.cols());
    if (argmax) argmax->assign(static_cast<std::size_t>(g.cols()), 0);
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      Eigen::Index arg = 0;
      m[k] = g.col(k).maxCoeff(&arg);
      if (argmax) (*argmax)[static_cast<std::size_t>(k)] = arg;
    }
    return m;
  };
  switch (pooling) {
    case Pooling::mean: return g.colwise().mean().transpose();
    case Pooling::norm_sum: {
      Vector s = g.colwise().sum().transpose();
      const double norm = s.norm();
      return norm > 0.0 ? Vector(s / norm) : Vector(Vector::Zero(s.size()));
    }
    case Pooling::max: return max_rows();
    case Pooling::mean_max: {
      Vector out(2 * g.cols());
      out << g.colwise().mean().transpose(), max_rows();
      return out;
    }
  }
  throw std::logic_error("unreachable pooling mode");
}

ScoreOutput pool_and_score(const Matrix& context, const Matrix& h, const ModelParams& params, Pooling pooling) {
  if (context.rows() == 0) throw std::invalid_argument("pool_and_score: empty dialogue");
  if (context.rows() != h.rows()) throw std::invalid_argument("pool_and_score: row count mismatch");
  ScoreOutput out;
  out.node_reprs.resize(h.rows(), h.cols() + context.cols());
  out.node_reprs << h, context;
  out.dialogue_repr = pool_rows(out.node_reprs, pooling);
  if (out.dialogue_repr.size() != params.head_weight.size())
    throw std::invalid_argument("pool_and_score: pooled width does not match the score head");
  out.score = params.head_weight.dot(out.dialogue_repr) + params.head_bias[0];
  return out;
}

double margin_loss(double s_first, double s_second, int y, double margin) {
  return std::max(0.0, -static_cast<double>(y) * (s_first - s_second) + margin);
}

ScoreOutput score_encoded(const Matrix& raw, const std::vector<Speaker>& speakers, const ModelParams& params) {
  if (raw.rows() == 0) throw std::invalid_argument("score: dialogue has no utterances");
  const Matrix e = contextualize(raw, params.context);
  const DialogueGraph g = build_graph(e, speakers, params.attention, params.config.window);
  const Matrix h1 = conv_stage1(g, params, params.config.norm);
  const Matrix h2 = conv_stage2(h1, g, params);
  ScoreOutput out = pool_and_score(e, h2, params, params.config.pooling);
  if (!std::isfinite(out.score)) throw std::domain_error("score is not finite");
  return out;
}

ScoreOutput score_dialogue(const Dialogue& d, const UtteranceEncoder& enc, const ModelParams& params) {
  return score_encoded(encode_utterances(d, enc), d.speakers(), params);
}

}  // namespace dialgraph
