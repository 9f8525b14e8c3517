#include "dialgraph/graph.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace dialgraph {

std::string_view relation_name(Relation r) {
  static constexpr std::array<std::string_view, kRelationCount> names{
      "SELF",        "PAST_A_A",   "PAST_A_B",   "PAST_B_A",   "PAST_B_B",
      "FUTURE_A_A",  "FUTURE_A_B", "FUTURE_B_A", "FUTURE_B_B",
  };
  return names[static_cast<std::size_t>(r)];
}

Relation relation_of(std::size_t i, std::size_t j, Speaker speaker_i, Speaker speaker_j) {
  if (i == j) return Relation::Self;
  const int temporal = j < i ? 0 : 1;
  const int code = 1 + temporal * 4 + static_cast<int>(speaker_i) * 2 + static_cast<int>(speaker_j);
  return static_cast<Relation>(code);
}

std::pair<std::size_t, std::size_t> window_bounds(std::size_t i, std::size_t n, std::size_t window) {
  const std::size_t lo = i >= window ? i - window : 0;
  const std::size_t hi = std::min(n - 1, i + window);
  return {lo, hi};
}

std::vector<std::vector<double>> edge_weights(const Matrix& context, const Matrix& attention, std::size_t window) {
  if (window < 1) throw std::invalid_argument("edge_weights: window must be >= 1");
  const auto n = static_cast<std::size_t>(context.rows());
  const Matrix query = context * attention;  // row i = e_i^T W
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [lo, hi] = window_bounds(i, n, window);
    auto& w = out[i];
    w.resize(hi - lo + 1);
    const auto qi = query.row(static_cast<Eigen::Index>(i));
    double peak = -INFINITY;
    for (std::size_t j = lo; j <= hi; ++j) {
      w[j - lo] = qi.dot(context.row(static_cast<Eigen::Index>(j)));
      peak = std::max(peak, w[j - lo]);
    }
    double total = 0.0;
    for (auto& x : w) total += (x = std::exp(x - peak));
    for (auto& x : w) x /= total;
  }
  return out;
}

DialogueGraph build_graph(const Matrix& context, const std::vector<Speaker>& speakers, const Matrix& attention,
                          std::size_t window) {
  const auto n = static_cast<std::size_t>(context.rows());
  if (n == 0) throw std::invalid_argument("build_graph: dialogue has no utterances");
  if (speakers.size() != n) throw std::invalid_argument("build_graph: speaker count does not match node count");
  DialogueGraph g;
  g.nodes = context;
  g.window = window;
  g.segments = {0, n};
  auto weights = edge_weights(context, attention, window);
  for (std::size_t i = 0; i < n; ++i) {
    auto [lo, hi] = window_bounds(i, n, window);
    for (std::size_t j = lo; j <= hi; ++j)
      g.edges.push_back({i, j, weights[i][j - lo], relation_of(i, j, speakers[i], speakers[j])});
  }
  return g;
}

DialogueGraph disjoint_union(const std::vector<DialogueGraph>& graphs) {
  DialogueGraph u;
  Eigen::Index rows = 0, cols = 0;
  std::size_t edges = 0;
  for (const auto& g : graphs) {
    rows += g.nodes.rows();
    cols = g.nodes.cols();
    edges += g.edges.size();
  }
  u.nodes.resize(rows, cols);
  u.edges.reserve(edges);
  u.segments = {0};
  u.window = graphs.empty() ? 1 : graphs.front().window;
  std::size_t offset = 0;
  for (const auto& g : graphs) {
    const auto n = g.node_count();
    u.nodes.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n)) = g.nodes;
    for (const auto& e : g.edges) u.edges.push_back({e.dst + offset, e.src + offset, e.weight, e.relation});
    for (std::size_t s = 1; s < g.segments.size(); ++s) u.segments.push_back(offset + g.segments[s]);
    offset += n;
  }
  return u;
}

std::string graph_to_json(const DialogueGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"dst", e.dst + 1}, {"src", e.src + 1}, {"weight", e.weight},
                     {"relation", std::string(relation_name(e.relation))}});
  return nlohmann::json{{"window", g.window}, {"nodes", g.node_count()}, {"edges", std::move(edges)}}.dump(2);
}

}  // namespace dialgraph
