#include "dialgraph/evaluate.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "dialgraph/rng.hpp"
#include "json.hpp"

namespace dialgraph {

double pair_accuracy(const std::vector<double>& first_scores, const std::vector<double>& second_scores,
                     const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy over an empty pair set");
  if (first_scores.size() != labels.size() || second_scores.size() != labels.size())
    throw std::invalid_argument("accuracy: score/label count mismatch");
  std::size_t correct = 0;
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (static_cast<double>(labels[k]) * (first_scores[k] - second_scores[k]) > 0.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double discrimination_accuracy(const std::vector<DialoguePair>& pairs, const DialogueScorer& scorer) {
  if (pairs.empty()) throw std::invalid_argument("discrimination_accuracy: no pairs");
  std::vector<double> a, b;
  std::vector<int> labels;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    try {
      a.push_back(scorer(pairs[k].first));
      b.push_back(scorer(pairs[k].second));
    } catch (const std::exception& e) {
      throw std::runtime_error("scoring failed for pair " + std::to_string(k + 1) + " (source '" +
                               pairs[k].source_id + "'): " + e.what());
    }
    labels.push_back(pairs[k].label);
  }
  return pair_accuracy(a, b, labels);
}

double random_baseline(const std::vector<DialoguePair>& pairs, std::uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("random_baseline: no pairs");
  Rng rng(seed);
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const int guess = rng.coin() ? 1 : -1;
    if (guess == p.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double cosim_of_rows(const Matrix& rows, std::vector<std::string>* warnings) {
  if (rows.rows() < 2) throw std::invalid_argument("cosim needs at least two utterances");
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < rows.rows(); ++i) {
    const double na = rows.row(i).norm(), nb = rows.row(i + 1).norm();
    if (na == 0.0 || nb == 0.0) {
      if (warnings)
        warnings->push_back("zero-norm embedding in adjacent pair (" + std::to_string(i + 1) + "," +
                            std::to_string(i + 2) + "); similarity set to 0");
      continue;
    }
    total += rows.row(i).dot(rows.row(i + 1)) / (na * nb);
  }
  return total / static_cast<double>(rows.rows() - 1);
}

double cosim_baseline(const Dialogue& d, const UtteranceEncoder& enc, std::vector<std::string>* warnings) {
  return cosim_of_rows(encode_utterances(d, enc), warnings);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: inputs differ in length");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two samples");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman: an input has zero rank variance");
  SpearmanResult r;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (x.size() == 2) {
    r.p_value = 1.0;
  } else if (std::abs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double dof = n - 2.0;
    const double t = r.rho * std::sqrt(dof / ((1.0 - r.rho) * (1.0 + r.rho)));
    boost::math::students_t dist(dof);
    r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return r;
}

std::string_view level_name(Level l) { return l == Level::dialogue ? "dialogue" : "turn"; }

Level parse_level(std::string_view name) {
  if (name == "dialogue") return Level::dialogue;
  if (name == "turn") return Level::turn;
  throw std::invalid_argument("unknown level '" + std::string(name) + "' (expected dialogue or turn)");
}

namespace {

struct AspectSamples {
  std::vector<double> scores, ratings;
};

void finish_report(CorrelationReport& report, const std::vector<std::string>& order,
                   std::map<std::string, AspectSamples>& samples) {
  for (const auto& aspect : order) {
    auto& s = samples[aspect];
    if (s.scores.size() < 2) {
      report.warnings.push_back("aspect '" + aspect + "' skipped: " + std::to_string(s.scores.size()) + " sample(s)");
      continue;
    }
    try {
      auto r = spearman(s.scores, s.ratings);
      report.rows.push_back({aspect, r.rho, r.p_value, s.scores.size()});
    } catch (const UndefinedCorrelation&) {
      report.warnings.push_back("aspect '" + aspect + "' skipped: constant scores or ratings");
    }
  }
}

void note(std::vector<std::string>& order, const std::string& aspect) {
  if (std::find(order.begin(), order.end(), aspect) == order.end()) order.push_back(aspect);
}

}  // namespace

CorrelationReport correlate(const std::vector<AnnotatedDialogue>& annotated, const DialogueScorer& scorer,
                            Level level) {
  CorrelationReport report;
  report.level = level;
  std::vector<std::string> order;
  std::map<std::string, AspectSamples> samples;
  for (const auto& ad : annotated) {
    if (level == Level::dialogue) {
      if (ad.dialogue_ratings.empty()) continue;
      const double s = scorer(ad.dialogue);
      for (const auto& aspect : ad.dialogue_aspect_order) {
        note(order, aspect);
        samples[aspect].scores.push_back(s);
        samples[aspect].ratings.push_back(ad.dialogue_ratings.at(aspect));
      }
    } else {
      // Prefix scores are cached per position; several aspects share one turn.
      std::map<std::size_t, double> prefix_scores;
      for (const auto& [key, rating] : ad.turn_ratings) {
        const auto& [position, aspect] = key;
        auto it = prefix_scores.find(position);
        if (it == prefix_scores.end()) it = prefix_scores.emplace(position, scorer(ad.dialogue.prefix(position))).first;
        samples[aspect].scores.push_back(it->second);
        samples[aspect].ratings.push_back(rating);
      }
      for (const auto& aspect : ad.turn_aspect_order) note(order, aspect);
    }
  }
  if (order.empty()) report.warnings.push_back(std::string("no ") + std::string(level_name(level)) + "-level annotations");
  finish_report(report, order, samples);
  return report;
}

CorrelationReport correlate_scores(const std::vector<AnnotatedDialogue>& annotated,
                                   const std::vector<std::pair<std::string, double>>& scores_by_id) {
  std::map<std::string, double> lookup(scores_by_id.begin(), scores_by_id.end());
  CorrelationReport report;
  std::vector<std::string> order;
  std::map<std::string, AspectSamples> samples;
  for (const auto& ad : annotated) {
    auto it = lookup.find(ad.dialogue.id);
    if (it == lookup.end()) {
      report.warnings.push_back("no score for dialogue '" + ad.dialogue.id + "'");
      continue;
    }
    for (const auto& aspect : ad.dialogue_aspect_order) {
      note(order, aspect);
      samples[aspect].scores.push_back(it->second);
      samples[aspect].ratings.push_back(ad.dialogue_ratings.at(aspect));
    }
  }
  finish_report(report, order, samples);
  return report;
}

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::sum: return "sum";
    case Aggregation::max: return "max";
    case Aggregation::prod: return "prod";
  }
  return "mean";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::mean;
  if (name == "sum") return Aggregation::sum;
  if (name == "max") return Aggregation::max;
  if (name == "prod") return Aggregation::prod;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "' (expected mean, sum, max or prod)");
}

double aggregate_turn_scores(const std::vector<double>& scores, Aggregation strategy) {
  if (scores.empty()) throw std::invalid_argument("aggregate_turn_scores: empty score list");
  switch (strategy) {
    case Aggregation::mean: return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    case Aggregation::sum: return std::accumulate(scores.begin(), scores.end(), 0.0);
    case Aggregation::max: return *std::max_element(scores.begin(), scores.end());
    case Aggregation::prod: return std::accumulate(scores.begin(), scores.end(), 1.0, std::multiplies<>());
  }
  throw std::logic_error("unreachable aggregation");
}

std::string report_to_json(const CorrelationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"aspect", row.aspect}, {"rho", row.rho}, {"p_value", row.p_value}, {"n_samples", row.n_samples}});
  return nlohmann::json{{"level", std::string(level_name(r.level))}, {"rows", std::move(rows)}, {"warnings", r.warnings}}
      .dump(2);
}

std::string report_to_csv(const CorrelationReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "level,aspect,rho,p_value,n_samples\n";
  for (const auto& row : r.rows) {
    std::string aspect = row.aspect;
    if (aspect.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : aspect) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      aspect = quoted + "\"";
    }
    out << level_name(r.level) << ',' << aspect << ',' << row.rho << ',' << row.p_value << ',' << row.n_samples
        << '\n';
  }
  return out.str();
}

}  // namespace dialgraph
