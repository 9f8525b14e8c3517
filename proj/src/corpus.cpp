#include "dialgraph/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "dialgraph/hashing.hpp"
#include "json.hpp"

namespace dialgraph {

using json = nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct RawTurn {
  std::string speaker;
  std::string text;
};

// Applies the dialogue invariants to raw turns. Returns nullopt and sets
// `why` when the record must be dropped.
std::optional<Dialogue> validate_dialogue(std::string id, const std::vector<RawTurn>& turns, std::string& why) {
  if (turns.empty()) {
    why = "dialogue has no turns";
    return std::nullopt;
  }
  std::vector<std::string> seen;
  Dialogue d;
  d.id = std::move(id);
  d.utterances.reserve(turns.size());
  for (std::size_t i = 0; i < turns.size(); ++i) {
    std::string text = trim(turns[i].text);
    if (text.empty()) {
      why = "empty text at position " + std::to_string(i + 1);
      return std::nullopt;
    }
    std::string spk = trim(turns[i].speaker);
    auto it = std::find(seen.begin(), seen.end(), spk);
    if (it == seen.end()) {
      if (seen.size() == 2) {
        why = "more than two speakers (\"" + spk + "\" at position " + std::to_string(i + 1) + ")";
        return std::nullopt;
      }
      seen.push_back(spk);
      it = seen.end() - 1;
    }
    Speaker s = it == seen.begin() ? Speaker::A : Speaker::B;
    d.utterances.push_back(Utterance{i + 1, s, std::move(text)});
  }
  if (seen.size() < 2) {
    why = "single speaker (not dyadic)";
    return std::nullopt;
  }
  return d;
}

template <typename J>
std::vector<RawTurn> parse_turns(const J& rec, std::size_t line) {
  if (!rec.contains("turns") || !rec["turns"].is_array()) throw ParseError(line, "missing array field 'turns'");
  std::vector<RawTurn> out;
  for (const auto& t : rec["turns"]) {
    if (!t.is_object() || !t.contains("speaker") || !t.contains("text") || !t["speaker"].is_string() ||
        !t["text"].is_string())
      throw ParseError(line, "turn must be an object with string fields 'speaker' and 'text'");
    out.push_back({t["speaker"].template get<std::string>(), t["text"].template get<std::string>()});
  }
  return out;
}

template <typename J>
std::string record_id(const J& rec, std::size_t line, std::size_t index) {
  if (!rec.contains("id")) return "dialogue-" + std::to_string(index + 1);
  const auto& id = rec["id"];
  if (id.is_string()) return id.template get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.template get<long long>());
  throw ParseError(line, "field 'id' must be a string");
}

json parse_json_line(std::string_view text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
}

Loaded<Dialogue> parse_jsonl(std::string_view content) {
  Loaded<Dialogue> out;
  std::size_t line_no = 0, record = 0;
  std::istringstream in{std::string(content)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = parse_json_line(line, line_no);
    if (!rec.is_object()) throw ParseError(line_no, "record must be a JSON object");
    std::string id = record_id(rec, line_no, record++);
    std::string why;
    if (auto d = validate_dialogue(id, parse_turns(rec, line_no), why))
      out.items.push_back(std::move(*d));
    else
      out.warnings.push_back("line " + std::to_string(line_no) + ": record '" + id + "' skipped: " + why);
  }
  return out;
}

// Blocks separated by blank lines; "### <id>" optionally names a block;
// every other line is "<speaker>: <text>".
Loaded<Dialogue> parse_plain(std::string_view content) {
  Loaded<Dialogue> out;
  std::istringstream in{std::string(content)};
  std::vector<RawTurn> turns;
  std::string id;
  std::size_t line_no = 0, block_start = 0, record = 0;
  auto flush = [&] {
    if (turns.empty() && id.empty()) return;
    if (id.empty()) id = "dialogue-" + std::to_string(record + 1);
    ++record;
    std::string why;
    if (auto d = validate_dialogue(id, turns, why))
      out.items.push_back(std::move(*d));
    else
      out.warnings.push_back("line " + std::to_string(block_start) + ": record '" + id + "' skipped: " + why);
    turns.clear();
    id.clear();
  };
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    if (turns.empty() && id.empty()) block_start = line_no;
    if (line.rfind("###", 0) == 0) {
      if (!turns.empty() || !id.empty()) throw ParseError(line_no, "'###' header must start a block");
      id = trim(std::string_view(line).substr(3));
      if (id.empty()) throw ParseError(line_no, "empty dialogue id after '###'");
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string::npos || colon == 0) throw ParseError(line_no, "expected '<speaker>: <text>'");
    turns.push_back({line.substr(0, colon), line.substr(colon + 1)});
  }
  flush();
  return out;
}

template <typename J>
double rating_value(const J& v, std::size_t line, const std::string& aspect) {
  if (!v.is_number()) throw ParseError(line, "rating for aspect '" + aspect + "' is not a number");
  return v.template get<double>();
}

void note_aspect(std::vector<std::string>& order, const std::string& aspect) {
  if (std::find(order.begin(), order.end(), aspect) == order.end()) order.push_back(aspect);
}

// Returns nullopt with `why` set when a rating references a missing turn.
// Takes ordered_json so aspects keep their file order.
std::optional<AnnotatedDialogue> parse_annotated(const nlohmann::ordered_json& rec, std::size_t line, std::size_t index,
                                                 std::string& why) {
  if (!rec.is_object()) throw ParseError(line, "annotation record must be a JSON object");
  std::string id = record_id(rec, line, index);
  auto dialogue = validate_dialogue(id, parse_turns(rec, line), why);
  if (!dialogue) return std::nullopt;

  AnnotatedDialogue ad;
  ad.dialogue = std::move(*dialogue);
  if (rec.contains("dialog_ratings")) {
    const auto& dr = rec["dialog_ratings"];
    if (!dr.is_object()) throw ParseError(line, "'dialog_ratings' must be an object");
    for (const auto& [aspect, v] : dr.items()) {
      ad.dialogue_ratings[aspect] = rating_value(v, line, aspect);
      note_aspect(ad.dialogue_aspect_order, aspect);
    }
  }
  if (rec.contains("turn_ratings")) {
    const auto& tr = rec["turn_ratings"];
    if (!tr.is_array()) throw ParseError(line, "'turn_ratings' must be an array");
    const std::size_t n = ad.dialogue.size();
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const auto& entry = tr[k];
      if (entry.is_null()) continue;
      if (!entry.is_object()) throw ParseError(line, "turn_ratings entries must be objects or null");
      // Either aligned to turns ({aspect: value}) or explicit
      // ({"position": p, "ratings": {aspect: value}}).
      std::size_t position = k + 1;
      const nlohmann::ordered_json* ratings = &entry;
      if (entry.contains("position") && entry.contains("ratings")) {
        if (!entry["position"].is_number_integer() || entry["position"].get<long long>() < 1)
          throw ParseError(line, "turn rating 'position' must be a positive integer");
        position = entry["position"].get<std::size_t>();
        ratings = &entry["ratings"];
        if (!ratings->is_object()) throw ParseError(line, "turn rating 'ratings' must be an object");
      }
      if (ratings->empty()) continue;
      if (position > n) {
        why = "turn rating references position " + std::to_string(position) + " of a " + std::to_string(n) +
              "-turn dialogue";
        return std::nullopt;
      }
      for (const auto& [aspect, v] : ratings->items()) {
        ad.turn_ratings[{position, aspect}] = rating_value(v, line, aspect);
        note_aspect(ad.turn_aspect_order, aspect);
      }
    }
  }
  return ad;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<Speaker> Dialogue::speakers() const {
  std::vector<Speaker> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.speaker);
  return out;
}

Dialogue Dialogue::prefix(std::size_t n) const {
  Dialogue p;
  p.id = id;
  n = std::min(n, utterances.size());
  p.utterances.assign(utterances.begin(), utterances.begin() + static_cast<std::ptrdiff_t>(n));
  return p;
}

Dialogue make_dialogue(std::string id, const std::vector<std::pair<Speaker, std::string>>& turns) {
  Dialogue d;
  d.id = std::move(id);
  for (std::size_t i = 0; i < turns.size(); ++i) d.utterances.push_back({i + 1, turns[i].first, turns[i].second});
  return d;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "plain") return CorpusFormat::plain;
  throw std::invalid_argument("unknown corpus format '" + std::string(name) + "' (expected jsonl or plain)");
}

Loaded<Dialogue> parse_corpus(std::string_view content, CorpusFormat format) {
  return format == CorpusFormat::jsonl ? parse_jsonl(content) : parse_plain(content);
}

Loaded<Dialogue> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  return parse_corpus(read_file(path), format);
}

std::vector<Dialogue> filter_corpus(const std::vector<Dialogue>& dialogues, std::size_t min_turns,
                                    std::size_t max_turns) {
  if (min_turns < 1 || max_turns < min_turns)
    throw std::invalid_argument("filter_corpus: require 1 <= min_turns <= max_turns");
  std::vector<Dialogue> out;
  std::copy_if(dialogues.begin(), dialogues.end(), std::back_inserter(out),
               [&](const Dialogue& d) { return d.size() >= min_turns && d.size() <= max_turns; });
  return out;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues) {
  CorpusStats s;
  s.dialogues = dialogues.size();
  for (const auto& d : dialogues) {
    s.utterances += d.size();
    for (const auto& u : d.utterances) s.words += split_words(u.text).size();
  }
  if (s.dialogues > 0) {
    s.avg_turns = static_cast<double>(s.utterances) / static_cast<double>(s.dialogues);
    s.avg_words = static_cast<double>(s.words) / static_cast<double>(s.dialogues);
  }
  return s;
}

std::string dialogue_to_json_line(const Dialogue& d) {
  json turns = json::array();
  for (const auto& u : d.utterances) turns.push_back({{"speaker", std::string(1, speaker_char(u.speaker))}, {"text", u.text}});
  return json{{"id", d.id}, {"turns", std::move(turns)}}.dump();
}

Loaded<AnnotatedDialogue> parse_annotations(std::string_view content) {
  Loaded<AnnotatedDialogue> out;
  std::string text = trim(content);
  if (text.empty()) return out;

  auto parse = [](std::string_view body, std::size_t line) {
    try {
      return nlohmann::ordered_json::parse(body);
    } catch (const nlohmann::ordered_json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
  };
  auto handle = [&](const nlohmann::ordered_json& rec, std::size_t line, std::size_t index) {
    std::string why;
    if (auto ad = parse_annotated(rec, line, index, why)) {
      out.items.push_back(std::move(*ad));
    } else {
      std::string id = rec.is_object() && rec.contains("id") ? rec["id"].dump() : std::to_string(index + 1);
      out.warnings.push_back("line " + std::to_string(line) + ": conversation " + id + " rejected: " + why);
    }
  };

  if (text.front() == '[') {
    auto all = parse(text, 1);
    if (!all.is_array()) throw ParseError(1, "expected a JSON array of conversations");
    for (std::size_t i = 0; i < all.size(); ++i) handle(all[i], 1, i);
    return out;
  }
  std::istringstream in{std::string(content)};
  std::size_t line_no = 0, index = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    handle(parse(line, line_no), line_no, index++);
  }
  return out;
}

Loaded<AnnotatedDialogue> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

}  // namespace dialgraph
