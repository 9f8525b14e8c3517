#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dialgraph/corpus.hpp"
#include "dialgraph/encode.hpp"

namespace dialgraph {

/// SELF plus (temporal order) x (speaker of dst) x (speaker of src).
/// PAST means the source utterance precedes the destination.
enum class Relation : std::uint8_t {
  Self = 0,
  PastAA, PastAB, PastBA, PastBB,
  FutureAA, FutureAB, FutureBA, FutureBB,
};

inline constexpr std::size_t kRelationCount = 9;
inline constexpr std::size_t kTypedRelationCount = 8;

/// Index into the 8 typed relations; Self has none.
inline std::size_t typed_index(Relation r) { return static_cast<std::size_t>(r) - 1; }

std::string_view relation_name(Relation r);

/// Relation of the edge src(j) -> dst(i). Positions may be 0- or 1-based.
Relation relation_of(std::size_t i, std::size_t j, Speaker speaker_i, Speaker speaker_j);

struct Edge {
  std::size_t dst = 0;  // i, 0-based node index
  std::size_t src = 0;  // j
  double weight = 0.0;  // a_ij
  Relation relation = Relation::Self;
};

/// Nodes are rows. Several dialogues may share one graph as a disjoint
/// union; `segments` holds the node offsets [s0=0, s1, ..., sk=n].
struct DialogueGraph {
  Matrix nodes;
  std::vector<Edge> edges;  // sorted by (dst, src)
  std::size_t window = 1;
  std::vector<std::size_t> segments;

  std::size_t node_count() const { return static_cast<std::size_t>(nodes.rows()); }
  std::size_t segment_count() const { return segments.empty() ? 0 : segments.size() - 1; }
};

/// Inclusive window [max(0, i-M), min(n-1, i+M)] for 0-based node i.
std::pair<std::size_t, std::size_t> window_bounds(std::size_t i, std::size_t n, std::size_t window);

/// Per node i, softmax over its window of e_i^T W e_j (max-subtracted).
/// Entry [i][k] is the weight of source lo_i + k.
std::vector<std::vector<double>> edge_weights(const Matrix& context, const Matrix& attention, std::size_t window);

DialogueGraph build_graph(const Matrix& context, const std::vector<Speaker>& speakers, const Matrix& attention,
                          std::size_t window);

/// Concatenates graphs; node and edge indices are offset, no edges are added.
DialogueGraph disjoint_union(const std::vector<DialogueGraph>& graphs);

/// Debug dump: {"window", "nodes", "edges": [{"dst","src","weight","relation"}]}
/// with 1-based positions.
std::string graph_to_json(const DialogueGraph& g);

}  // namespace dialgraph
