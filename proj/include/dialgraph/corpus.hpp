#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialgraph {

enum class Speaker { A = 0, B = 1 };

inline char speaker_char(Speaker s) { return s == Speaker::A ? 'A' : 'B'; }
inline Speaker other(Speaker s) { return s == Speaker::A ? Speaker::B : Speaker::A; }

struct Utterance {
  std::size_t position = 1;  // 1-based
  Speaker speaker = Speaker::A;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const noexcept { return utterances.size(); }
  std::vector<Speaker> speakers() const;
  /// First `n` utterances; positions are unchanged, so they stay contiguous.
  Dialogue prefix(std::size_t n) const;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Builds a dialogue from (speaker, text) pairs; positions are assigned 1..n.
Dialogue make_dialogue(std::string id, const std::vector<std::pair<Speaker, std::string>>& turns);

struct AnnotatedDialogue {
  Dialogue dialogue;
  std::map<std::string, double> dialogue_ratings;
  /// Keyed by (1-based position, aspect).
  std::map<std::pair<std::size_t, std::string>, double> turn_ratings;
  /// Aspect names in first-appearance order in the file (reports follow it).
  std::vector<std::string> dialogue_aspect_order;
  std::vector<std::string> turn_aspect_order;
};

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t words = 0;
  double avg_turns = 0.0;
  double avg_words = 0.0;
};

enum class CorpusFormat { jsonl, plain };

CorpusFormat parse_corpus_format(std::string_view name);

/// Malformed input (bad JSON, missing field). Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

template <typename T>
struct Loaded {
  std::vector<T> items;
  std::vector<std::string> warnings;
};

/// Trims ASCII whitespace from both ends.
std::string trim(std::string_view s);

/// Whitespace-separated tokens.
std::vector<std::string_view> split_words(std::string_view s);

// Loading never aborts on a structurally valid record that violates a
// dialogue invariant (monologue, empty text, >2 speakers): the record is
// dropped and a warning is appended. Syntax errors throw ParseError.
Loaded<Dialogue> parse_corpus(std::string_view content, CorpusFormat format);
Loaded<Dialogue> load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Keeps dialogues with min_turns <= n <= max_turns, in order.
std::vector<Dialogue> filter_corpus(const std::vector<Dialogue>& dialogues, std::size_t min_turns = 4,
                                    std::size_t max_turns = 30);

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues);

/// One JSONL record, no trailing newline.
std::string dialogue_to_json_line(const Dialogue& d);

Loaded<AnnotatedDialogue> parse_annotations(std::string_view content);
Loaded<AnnotatedDialogue> load_annotations(const std::filesystem::path& path);

}  // namespace dialgraph
