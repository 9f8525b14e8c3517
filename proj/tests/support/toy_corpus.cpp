#include "toy_corpus.hpp"

#include <string>

#include "dialgraph/rng.hpp"

namespace dialgraph::testing {

std::vector<Dialogue> make_toy_corpus(const ToyCorpusOptions& o) {
  Rng rng(o.seed);
  std::vector<Dialogue> out;
  out.reserve(o.dialogues);
  for (std::size_t d = 0; d < o.dialogues; ++d) {
    const std::string theme = "t" + std::to_string(rng.uniform_index(o.themes)) + "x";
    const std::size_t n = o.min_turns + rng.uniform_index(o.max_turns - o.min_turns + 1);
    std::vector<std::pair<Speaker, std::string>> turns;
    Speaker speaker = Speaker::A;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      const char* role = speaker == Speaker::A ? "ask" : "tell";
      for (std::size_t k = 0; k < o.role_tokens_per_utterance; ++k)
        text += role + std::to_string(rng.uniform_index(o.role_vocabulary)) + " ";
      for (std::size_t k = 0; k < o.topic_tokens_per_utterance; ++k)
        text += theme + std::to_string(rng.uniform_index(o.theme_vocabulary)) + " ";
      for (std::size_t k = 0; k < o.filler_tokens_per_utterance; ++k)
        text += "w" + std::to_string(rng.uniform_index(o.filler_vocabulary)) + " ";
      text.pop_back();
      turns.emplace_back(speaker, std::move(text));
      // Mostly alternating, with the occasional double turn.
      if (rng.uniform01() < 0.85 || i == 0) speaker = other(speaker);
    }
    out.push_back(make_dialogue("toy" + std::to_string(d), turns));
  }
  return out;
}

}  // namespace dialgraph::testing
