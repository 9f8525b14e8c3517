#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dialgraph/corpus.hpp"
#include "dialgraph/encode.hpp"
#include "dialgraph/perturb.hpp"

namespace dialgraph {

using DialogueScorer = std::function<double(const Dialogue&)>;

/// A pair counts as correct iff y * (s_first - s_second) > 0; ties are wrong.
double pair_accuracy(const std::vector<double>& first_scores, const std::vector<double>& second_scores,
                     const std::vector<int>& labels);

double discrimination_accuracy(const std::vector<DialoguePair>& pairs, const DialogueScorer& scorer);

/// Coin flip per pair (heads = "first is the original").
double random_baseline(const std::vector<DialoguePair>& pairs, std::uint64_t seed);

/// Mean cosine similarity of adjacent utterance encodings. A pair with a
/// zero-norm vector contributes 0 and adds a warning.
double cosim_baseline(const Dialogue& d, const UtteranceEncoder& enc, std::vector<std::string>* warnings = nullptr);
double cosim_of_rows(const Matrix& rows, std::vector<std::string>* warnings = nullptr);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Raised when a rank correlation is undefined (constant input).
class UndefinedCorrelation : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& v);

/// Pearson correlation of average ranks. The two-sided p-value uses the
/// t approximation t = rho sqrt((n-2)/(1-rho^2)) with n-2 degrees of
/// freedom (p = 0 when |rho| = 1; p = 1 when n = 2).
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

enum class Level { dialogue, turn };
std::string_view level_name(Level l);
Level parse_level(std::string_view name);

struct CorrelationRow {
  std::string aspect;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n_samples = 0;
};

struct CorrelationReport {
  Level level = Level::dialogue;
  std::vector<CorrelationRow> rows;
  std::vector<std::string> warnings;
};

/// Dialogue level: one score per dialogue against each dialogue aspect.
/// Turn level: the score of the prefix ending at each rated turn against
/// each turn aspect. Aspects with fewer than two samples or constant
/// values are skipped with a warning. Row order follows first appearance.
CorrelationReport correlate(const std::vector<AnnotatedDialogue>& annotated, const DialogueScorer& scorer, Level level);

/// Same, but dialogue-level scores are supplied by id (external metrics).
CorrelationReport correlate_scores(const std::vector<AnnotatedDialogue>& annotated,
                                   const std::vector<std::pair<std::string, double>>& scores_by_id);

enum class Aggregation { mean, sum, max, prod };
std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

double aggregate_turn_scores(const std::vector<double>& scores, Aggregation strategy);

std::string report_to_json(const CorrelationReport& r);
std::string report_to_csv(const CorrelationReport& r);

}  // namespace dialgraph
