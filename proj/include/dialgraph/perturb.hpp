#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dialgraph/corpus.hpp"
#include "dialgraph/rng.hpp"

namespace dialgraph {

enum class Strategy { UR, SS };

std::string_view strategy_name(Strategy s);  // "ur" / "ss"
Strategy parse_strategy(std::string_view name);

/// A contrastive example. label = +1 when `first` is the original dialogue,
/// -1 when `second` is.
struct DialoguePair {
  Dialogue first;
  Dialogue second;
  int label = 1;
  Strategy strategy = Strategy::UR;
  std::string source_id;

  const Dialogue& original() const { return label > 0 ? first : second; }
  const Dialogue& perturbed() const { return label > 0 ? second : first; }
};

/// Thrown when a negative cannot be built for a dialogue.
class PerturbError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Utterance replacement: one uniformly chosen position gets the text of a
/// uniformly chosen utterance from a uniformly chosen other dialogue. The
/// speaker tag stays; a draw equal to the current text is redrawn.
Dialogue perturb_ur(const Dialogue& d, const std::vector<Dialogue>& donor_pool, Rng& rng);

/// Speaker-level shuffling: one speaker's texts are permuted among that
/// speaker's positions, never reproducing the input.
Dialogue perturb_ss(const Dialogue& d, Rng& rng, int max_attempts = 32);

struct PairDataset {
  std::vector<DialoguePair> pairs;
  std::vector<std::string> warnings;
};

/// k perturbations per dialogue, each emitted as (D, D', +1) and (D', D, -1).
/// Dialogue i draws from rng.derive(i), so results do not depend on how the
/// work is split. UR donors are the other dialogues of the input list.
PairDataset build_pair_dataset(const std::vector<Dialogue>& dialogues, Strategy strategy,
                               std::size_t perturbations_per_dialogue, const Rng& rng);

std::string pair_to_json_line(const DialoguePair& p);
/// Parses the JSONL written by pair_to_json_line. Dialogues are taken as-is
/// (speaker tags must already be "A"/"B").
std::vector<DialoguePair> parse_pairs(std::string_view content);
std::vector<DialoguePair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::filesystem::path& path, const std::vector<DialoguePair>& pairs);

}  // namespace dialgraph
