#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dialgraph/corpus.hpp"
#include "dialgraph/encode.hpp"
#include "dialgraph/rng.hpp"

namespace dialgraph::testing {

inline std::vector<Speaker> random_speakers(Rng& rng, std::size_t n) {
  std::vector<Speaker> s(n);
  for (auto& v : s) v = rng.coin() ? Speaker::A : Speaker::B;
  if (n >= 2 && std::count(s.begin(), s.end(), Speaker::A) == static_cast<long>(n)) s.back() = Speaker::B;
  return s;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-scale, scale);
  return m;
}

/// Dialogue of n turns with both speakers present; texts are random words
/// from a vocabulary of `vocab` entries, tagged with `tag` to keep them
/// distinct across dialogues.
inline Dialogue random_dialogue(Rng& rng, const std::string& id, std::size_t n, std::size_t vocab = 50,
                                const std::string& tag = "") {
  std::vector<std::pair<Speaker, std::string>> turns;
  const auto speakers = random_speakers(rng, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = tag + "u" + std::to_string(i);
    const std::size_t words = 1 + rng.uniform_index(5);
    for (std::size_t k = 0; k < words; ++k) text += " w" + std::to_string(rng.uniform_index(vocab));
    turns.emplace_back(i == 0 ? Speaker::A : speakers[i], text);
  }
  if (n >= 2) {
    bool has_b = false;
    for (const auto& t : turns) has_b |= t.first == Speaker::B;
    if (!has_b) turns.back().first = Speaker::B;
  }
  return make_dialogue(id, turns);
}

}  // namespace dialgraph::testing
