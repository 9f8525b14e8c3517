#include "dialgraph/perturb.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dialgraph/hashing.hpp"
#include "json.hpp"

namespace dialgraph {

using json = nlohmann::json;

namespace {

// Replacement redraws are bounded; with a feasible pool every attempt has
// success probability >= 1 / (|pool| * max donor length * n).
constexpr int kMaxReplacementDraws = 100000;

json dialogue_json(const Dialogue& d) {
  json turns = json::array();
  for (const auto& u : d.utterances) turns.push_back({{"speaker", std::string(1, speaker_char(u.speaker))}, {"text", u.text}});
  return {{"id", d.id}, {"turns", std::move(turns)}};
}

Dialogue dialogue_from_json(const json& j, std::size_t line) {
  if (!j.is_object() || !j.contains("turns") || !j["turns"].is_array())
    throw ParseError(line, "pair member must be a dialogue object with 'turns'");
  Dialogue d;
  d.id = j.value("id", std::string{});
  std::size_t pos = 0;
  for (const auto& t : j["turns"]) {
    std::string spk = t.value("speaker", std::string{});
    if (spk != "A" && spk != "B") throw ParseError(line, "pair dialogues must use speaker tags A/B");
    d.utterances.push_back({++pos, spk == "A" ? Speaker::A : Speaker::B, t.value("text", std::string{})});
  }
  if (d.utterances.empty()) throw ParseError(line, "pair dialogue has no turns");
  return d;
}

}  // namespace

std::string_view strategy_name(Strategy s) { return s == Strategy::UR ? "ur" : "ss"; }

Strategy parse_strategy(std::string_view name) {
  if (name == "ur" || name == "UR") return Strategy::UR;
  if (name == "ss" || name == "SS") return Strategy::SS;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "' (expected ur or ss)");
}

Dialogue perturb_ur(const Dialogue& d, const std::vector<Dialogue>& donor_pool, Rng& rng) {
  if (d.utterances.empty()) throw PerturbError("UR infeasible: empty dialogue");
  std::unordered_set<std::string_view> own;
  for (const auto& u : d.utterances) own.insert(u.text);

  std::vector<const Dialogue*> donors;
  bool feasible = false;
  for (const auto& cand : donor_pool) {
    if (cand.id == d.id || cand.utterances.empty()) continue;
    donors.push_back(&cand);
    if (!feasible)
      feasible = std::any_of(cand.utterances.begin(), cand.utterances.end(),
                             [&](const Utterance& u) { return !own.contains(u.text); });
  }
  if (!feasible) throw PerturbError("UR infeasible: no donor dialogue offers a foreign utterance for '" + d.id + "'");

  for (int attempt = 0; attempt < kMaxReplacementDraws; ++attempt) {
    const std::size_t pos = rng.uniform_index(d.size());
    const Dialogue& donor = *donors[rng.uniform_index(donors.size())];
    const std::string& text = donor.utterances[rng.uniform_index(donor.size())].text;
    if (text == d.utterances[pos].text) continue;
    Dialogue out = d;
    out.utterances[pos].text = text;
    return out;
  }
  throw PerturbError("UR infeasible: replacement draws exhausted for '" + d.id + "'");
}

Dialogue perturb_ss(const Dialogue& d, Rng& rng, int max_attempts) {
  std::vector<std::size_t> slots[2];
  for (std::size_t i = 0; i < d.size(); ++i) slots[static_cast<int>(d.utterances[i].speaker)].push_back(i);

  int chosen = rng.coin() ? 1 : 0;
  if (slots[chosen].size() < 2) chosen = 1 - chosen;
  if (slots[chosen].size() < 2) throw PerturbError("SS infeasible: neither speaker has two utterances in '" + d.id + "'");

  const auto& idx = slots[chosen];
  std::vector<std::string> texts;
  for (auto i : idx) texts.push_back(d.utterances[i].text);
  const std::vector<std::string> original = texts;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    rng.shuffle(texts);
    if (texts == original) continue;
    Dialogue out = d;
    for (std::size_t k = 0; k < idx.size(); ++k) out.utterances[idx[k]].text = texts[k];
    return out;
  }
  throw PerturbError("SS produced only identity orderings after " + std::to_string(max_attempts) + " attempts for '" +
                     d.id + "'");
}

PairDataset build_pair_dataset(const std::vector<Dialogue>& dialogues, Strategy strategy,
                               std::size_t perturbations_per_dialogue, const Rng& rng) {
  PairDataset out;
  out.pairs.reserve(2 * perturbations_per_dialogue * dialogues.size());
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const Dialogue& d = dialogues[i];
    Rng local = rng.derive(i);
    std::vector<Dialogue> negatives;
    try {
      for (std::size_t k = 0; k < perturbations_per_dialogue; ++k) {
        Dialogue neg = strategy == Strategy::UR ? perturb_ur(d, dialogues, local) : perturb_ss(d, local);
        neg.id = d.id + "#" + std::string(strategy_name(strategy)) + std::to_string(k + 1);
        negatives.push_back(std::move(neg));
      }
    } catch (const PerturbError& e) {
      out.warnings.push_back("dialogue '" + d.id + "' skipped: " + e.what());
      continue;
    }
    for (auto& neg : negatives) {
      out.pairs.push_back({d, neg, +1, strategy, d.id});
      out.pairs.push_back({std::move(neg), d, -1, strategy, d.id});
    }
  }
  return out;
}

std::string pair_to_json_line(const DialoguePair& p) {
  json j{{"source_id", p.source_id},
         {"strategy", std::string(strategy_name(p.strategy))},
         {"label", p.label},
         {"first", dialogue_json(p.first)},
         {"second", dialogue_json(p.second)}};
  return j.dump();
}

std::vector<DialoguePair> parse_pairs(std::string_view content) {
  std::vector<DialoguePair> out;
  std::istringstream in{std::string(content)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("label") || !j["label"].is_number_integer())
      throw ParseError(line_no, "pair record needs integer 'label'");
    DialoguePair p;
    p.label = j["label"].get<int>();
    if (p.label != 1 && p.label != -1) throw ParseError(line_no, "label must be +1 or -1");
    p.first = dialogue_from_json(j.value("first", json{}), line_no);
    p.second = dialogue_from_json(j.value("second", json{}), line_no);
    if (p.first.size() != p.second.size() || p.first.speakers() != p.second.speakers())
      throw ParseError(line_no, "pair members must share length and speaker sequence");
    try {
      p.strategy = parse_strategy(j.value("strategy", std::string("ur")));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    p.source_id = j.value("source_id", p.original().id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DialoguePair> load_pairs(const std::filesystem::path& path) { return parse_pairs(read_file(path)); }

void save_pairs(const std::filesystem::path& path, const std::vector<DialoguePair>& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : pairs) out << pair_to_json_line(p) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace dialgraph
