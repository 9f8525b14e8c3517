// Command-line driver: corpus -> perturb -> train -> evaluate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dialgraph/config.hpp"
#include "dialgraph/corpus.hpp"
#include "dialgraph/evaluate.hpp"
#include "dialgraph/graph.hpp"
#include "dialgraph/hashing.hpp"
#include "dialgraph/model.hpp"
#include "dialgraph/perturb.hpp"
#include "dialgraph/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dialgraph;

namespace {

/// Reported as {"error": kind, ...} with exit code 1.
struct CliError : std::runtime_error {
  CliError(std::string kind, const std::string& what) : std::runtime_error(what), kind(std::move(kind)) {}
  std::string kind;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("io", "cannot write " + path.string());
  out << text;
  if (!out) throw CliError("io", "write failed for " + path.string());
}

/// Reproducibility record written next to a command's outputs. It holds no
/// timestamps so reruns with the same inputs produce the same bytes.
class Manifest {
public:
  Manifest(std::string command, json options) : command_(std::move(command)), options_(std::move(options)) {}
  void input(const fs::path& p) { inputs_[p.string()] = file_digest(p); }
  void output(const fs::path& p) { outputs_[p.string()] = file_digest(p); }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }
  void write(const fs::path& path) const {
    json doc{{"tool", "dialgraph"},
             {"version", DIALGRAPH_VERSION},
             {"command", command_},
             {"options", options_},
             {"config_hash", config_hash(options_)},
             {"inputs", inputs_},
             {"outputs", outputs_}};
    for (const auto& [k, v] : extra_.items()) doc[k] = v;
    write_text(path, doc.dump(2) + "\n");
  }

private:
  std::string command_;
  json options_;
  json inputs_ = json::object();
  json outputs_ = json::object();
  json extra_ = json::object();
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) return;
  if (!fs::is_regular_file(path)) throw CliError("validation", std::string(flag) + ": file does not exist: " + path);
}

fs::path manifest_beside(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

std::vector<Dialogue> read_corpus(const fs::path& path, const std::string& format) {
  auto loaded = load_corpus(path, parse_corpus_format(format));
  for (const auto& w : loaded.warnings) warn(path.string() + ": " + w);
  return std::move(loaded.items);
}

std::vector<AnnotatedDialogue> read_annotations(const fs::path& path) {
  auto loaded = load_annotations(path);
  for (const auto& w : loaded.warnings) warn(path.string() + ": " + w);
  return std::move(loaded.items);
}

struct LoadedModel {
  Checkpoint checkpoint;
  std::unique_ptr<UtteranceEncoder> encoder;
};

LoadedModel open_model(const fs::path& path) {
  LoadedModel m{load_checkpoint(path), nullptr};
  m.encoder = make_encoder(m.checkpoint.encoder);
  if (m.encoder->dim() != m.checkpoint.params.config.dim)
    throw CliError("validation", "encoder width " + std::to_string(m.encoder->dim()) +
                                     " does not match checkpoint width " +
                                     std::to_string(m.checkpoint.params.config.dim));
  return m;
}

DialogueScorer scorer_for(const LoadedModel& m) {
  return [&m](const Dialogue& d) { return score_dialogue(d, *m.encoder, m.checkpoint.params).score; };
}

json graph_record(const Dialogue& d, const LoadedModel& m) {
  const auto& params = m.checkpoint.params;
  const Matrix context = contextualize(encode_utterances(d, *m.encoder), params.context);
  const auto graph = build_graph(context, d.speakers(), params.attention, params.config.window);
  return {{"id", d.id}, {"graph", json::parse(graph_to_json(graph))}};
}

// ---------------------------------------------------------------------------

struct PerturbArgs {
  std::string input, format = "jsonl", strategy = "ur", out;
  std::size_t k = 20, min_turns = 4, max_turns = 30;
  std::uint64_t seed = 1;
  bool no_filter = false;
};

int run_perturb(const PerturbArgs& a) {
  const Strategy strategy = parse_strategy(a.strategy);
  auto corpus = read_corpus(a.input, a.format);
  if (!a.no_filter) corpus = filter_corpus(corpus, a.min_turns, a.max_turns);
  if (corpus.empty()) throw CliError("validation", "no dialogues left after loading and filtering " + a.input);
  if (a.k < 1) throw CliError("validation", "--k must be >= 1");
  auto data = build_pair_dataset(corpus, strategy, a.k, Rng(a.seed));
  for (const auto& w : data.warnings) warn(w);
  save_pairs(a.out, data.pairs);

  Manifest manifest("perturb", {{"format", a.format},
                                {"strategy", a.strategy},
                                {"k", a.k},
                                {"seed", a.seed},
                                {"filter", a.no_filter ? json(nullptr) : json{a.min_turns, a.max_turns}}});
  manifest.set("seed", a.seed);
  manifest.set("dialogues", corpus.size());
  manifest.set("pairs", data.pairs.size());
  manifest.input(a.input);
  manifest.output(a.out);
  manifest.write(manifest_beside(a.out));
  std::cout << json{{"dialogues", corpus.size()}, {"pairs", data.pairs.size()}, {"out", a.out}}.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, train, val, out;
};

/// Average turns over the distinct original dialogues of a pair set.
double average_original_turns(const std::vector<DialoguePair>& pairs) {
  std::set<std::string> seen;
  std::vector<Dialogue> originals;
  for (const auto& p : pairs)
    if (seen.insert(p.source_id).second) originals.push_back(p.original());
  return corpus_stats(originals).avg_turns;
}

int run_train(const TrainArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig::from_json(json::object()) : RunConfig::load(a.config);
  rc.validate();
  const auto train_pairs = load_pairs(a.train);
  const auto val_pairs = load_pairs(a.val);
  if (train_pairs.empty()) throw CliError("validation", "training pair file is empty: " + a.train);
  if (val_pairs.empty()) throw CliError("validation", "validation pair file is empty: " + a.val);

  EncoderSpec spec = rc.encoder;
  if (spec.kind != EncoderKind::stub && spec.digest.empty()) spec.digest = file_digest(spec.path);
  auto encoder = make_encoder(spec);
  ModelConfig model_cfg = rc.model;
  model_cfg.dim = encoder->dim();
  if (rc.window_from_data) model_cfg.window = default_window(average_original_turns(train_pairs));
  model_cfg.dropout = rc.train.dropout;
  model_cfg.validate();

  const auto train_data = encode_pairs(train_pairs, *encoder);
  const auto val_data = encode_pairs(val_pairs, *encoder);
  ModelParams params = ModelParams::init(model_cfg, rc.train.seed);

  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  const fs::path checkpoint = out_dir / "checkpoint.json";
  auto report = train(params, train_data, val_data, rc.train, spec, checkpoint, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " lr " << format_double(r.learning_rate) << " loss "
              << format_double(r.mean_loss) << " val_acc " << format_double(r.val_accuracy) << '\n';
  });
  const fs::path report_path = out_dir / "train_report.json";
  write_text(report_path, report_to_json(report) + "\n");

  json effective = rc.to_json();
  effective["encoder"] = to_json(spec);
  effective["model"] = to_json(model_cfg);
  effective.erase("output_dir");
  effective.erase("corpus");
  Manifest manifest("train", effective);
  manifest.set("seed", rc.train.seed);
  manifest.set("checkpoint_config_hash", load_checkpoint(checkpoint).config_hash);
  if (!a.config.empty()) manifest.input(a.config);
  manifest.input(a.train);
  manifest.input(a.val);
  if (spec.kind != EncoderKind::stub) manifest.input(spec.path);
  manifest.output(checkpoint);
  manifest.output(report_path);
  manifest.write(out_dir / "manifest.json");
  std::cout << report_to_json(report) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string checkpoint, input, format = "jsonl", out, dump_graph;
  bool turns = false;
};

int run_score(const ScoreArgs& a) {
  const auto model = open_model(a.checkpoint);
  const auto corpus = read_corpus(a.input, a.format);
  const auto scorer = scorer_for(model);
  std::ostringstream lines;
  for (const auto& d : corpus) {
    if (a.turns) {
      for (std::size_t n = 1; n <= d.size(); ++n)
        lines << d.id << ',' << n << ',' << format_double(scorer(d.prefix(n))) << '\n';
    } else {
      lines << d.id << ',' << format_double(scorer(d)) << '\n';
    }
  }
  if (!a.dump_graph.empty()) {
    std::string dump;
    for (const auto& d : corpus) dump += graph_record(d, model).dump() + "\n";
    write_text(a.dump_graph, dump);
  }
  if (a.out.empty()) {
    std::cout << lines.str();
    return 0;
  }
  write_text(a.out, lines.str());
  Manifest manifest("score", {{"format", a.format}, {"turns", a.turns}});
  manifest.set("checkpoint_config_hash", model.checkpoint.config_hash);
  manifest.set("seed", model.checkpoint.train.seed);
  manifest.input(a.checkpoint);
  manifest.input(a.input);
  manifest.output(a.out);
  if (!a.dump_graph.empty()) manifest.output(a.dump_graph);
  manifest.write(manifest_beside(a.out));
  return 0;
}

// ---------------------------------------------------------------------------

struct DiscriminateArgs {
  std::string pairs, checkpoint, out;
  std::uint64_t seed = 1;
};

int run_discriminate(const DiscriminateArgs& a) {
  const auto model = open_model(a.checkpoint);
  const auto pairs = load_pairs(a.pairs);
  if (pairs.empty()) throw CliError("validation", "pair file is empty: " + a.pairs);
  std::vector<std::string> cosim_warnings;
  const double accuracy = discrimination_accuracy(pairs, scorer_for(model));
  const double cosim = discrimination_accuracy(
      pairs, [&](const Dialogue& d) { return cosim_baseline(d, *model.encoder, &cosim_warnings); });
  for (const auto& w : cosim_warnings) warn("cosim: " + w);
  const json report{{"pairs", pairs.size()},
                    {"accuracy", accuracy},
                    {"baselines", {{"random", random_baseline(pairs, a.seed)}, {"cosim", cosim}}}};
  std::cout << report.dump(2) << '\n';
  if (!a.out.empty()) {
    write_text(a.out, report.dump(2) + "\n");
    Manifest manifest("discriminate", {{"seed", a.seed}});
    manifest.set("seed", a.seed);
    manifest.set("checkpoint_config_hash", model.checkpoint.config_hash);
    manifest.input(a.pairs);
    manifest.input(a.checkpoint);
    manifest.output(a.out);
    manifest.write(manifest_beside(a.out));
  }
  return 0;
}

// ---------------------------------------------------------------------------

void emit_report(const CorrelationReport& report, const std::string& out, Manifest& manifest) {
  for (const auto& w : report.warnings) warn(w);
  std::cout << report_to_json(report) << '\n';
  if (out.empty()) return;
  const fs::path dir = out;
  fs::create_directories(dir);
  write_text(dir / "correlation.json", report_to_json(report) + "\n");
  write_text(dir / "correlation.csv", report_to_csv(report));
  manifest.output(dir / "correlation.json");
  manifest.output(dir / "correlation.csv");
  manifest.write(dir / "manifest.json");
}

struct CorrelateArgs {
  std::string annotations, checkpoint, level = "dialogue", out;
};

int run_correlate(const CorrelateArgs& a) {
  const Level level = parse_level(a.level);
  const auto model = open_model(a.checkpoint);
  const auto annotated = read_annotations(a.annotations);
  const auto report = correlate(annotated, scorer_for(model), level);
  Manifest manifest("correlate", {{"level", a.level}});
  manifest.set("checkpoint_config_hash", model.checkpoint.config_hash);
  manifest.set("seed", model.checkpoint.train.seed);
  manifest.input(a.annotations);
  manifest.input(a.checkpoint);
  emit_report(report, a.out, manifest);
  return 0;
}

// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string scores, strategy = "mean", annotations, out;
};

/// Reads "id,score" or "id,position,score" rows (an optional header is
/// skipped). Rows of one id keep file order; ids keep first-appearance order.
std::vector<std::pair<std::string, std::vector<double>>> read_score_rows(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 2 && fields.size() != 3)
      throw ParseError(line_no, "expected 'id,score' or 'id,position,score'");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(fields.back(), &used);
      if (used != fields.back().size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header
      throw ParseError(line_no, "score '" + fields.back() + "' is not a number");
    }
    auto [it, fresh] = index.try_emplace(fields.front(), out.size());
    if (fresh) out.emplace_back(fields.front(), std::vector<double>{});
    out[it->second].second.push_back(value);
  }
  return out;
}

int run_aggregate(const AggregateArgs& a) {
  const Aggregation strategy = parse_aggregation(a.strategy);
  const auto rows = read_score_rows(a.scores);
  std::vector<std::pair<std::string, double>> aggregated;
  std::string csv;
  for (const auto& [id, values] : rows) {
    aggregated.emplace_back(id, aggregate_turn_scores(values, strategy));
    csv += id + "," + format_double(aggregated.back().second) + "\n";
  }
  Manifest manifest("aggregate", {{"strategy", a.strategy}});
  manifest.input(a.scores);
  if (a.annotations.empty()) {
    std::cout << csv;
    if (!a.out.empty()) {
      write_text(a.out, csv);
      manifest.output(a.out);
      manifest.write(manifest_beside(a.out));
    }
    return 0;
  }
  manifest.input(a.annotations);
  const auto report = correlate_scores(read_annotations(a.annotations), aggregated);
  emit_report(report, a.out, manifest);
  return 0;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string input, format = "jsonl";
  bool filter = false;
  std::size_t min_turns = 4, max_turns = 30;
};

int run_stats(const StatsArgs& a) {
  auto corpus = read_corpus(a.input, a.format);
  if (a.filter) corpus = filter_corpus(corpus, a.min_turns, a.max_turns);
  const auto s = corpus_stats(corpus);
  std::cout << json{{"dialogues", s.dialogues},
                    {"utterances", s.utterances},
                    {"words", s.words},
                    {"avg_turns", s.avg_turns},
                    {"avg_words", s.avg_words},
                    {"default_window", default_window(s.avg_turns)}}
                   .dump(2)
            << '\n';
  return 0;
}

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue coherence scoring with relational graph convolutions"};
  app.set_version_flag("--version", DIALGRAPH_VERSION);
  app.require_subcommand(1);

  PerturbArgs perturb;
  auto* p = app.add_subcommand("perturb", "Build contrastive pairs from a corpus");
  p->add_option("--input", perturb.input, "Corpus file")->required();
  p->add_option("--format", perturb.format, "Corpus format: jsonl or plain")->capture_default_str();
  p->add_option("--strategy", perturb.strategy, "ur or ss")->capture_default_str();
  p->add_option("--k", perturb.k, "Perturbations per dialogue")->capture_default_str();
  p->add_option("--seed", perturb.seed, "Random seed")->capture_default_str();
  p->add_option("--out", perturb.out, "Output pair JSONL")->required();
  p->add_option("--min-turns", perturb.min_turns, "Drop dialogues shorter than this")->capture_default_str();
  p->add_option("--max-turns", perturb.max_turns, "Drop dialogues longer than this")->capture_default_str();
  p->add_flag("--no-filter", perturb.no_filter, "Keep every dialogue regardless of length");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train a model on pair files");
  t->add_option("--config", train_args.config, "Run configuration JSON");
  t->add_option("--train", train_args.train, "Training pairs")->required();
  t->add_option("--val", train_args.val, "Validation pairs")->required();
  t->add_option("--out", train_args.out, "Output directory");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score dialogues with a checkpoint");
  s->add_option("--checkpoint", score.checkpoint)->required();
  s->add_option("--input", score.input, "Corpus file")->required();
  s->add_option("--format", score.format, "Corpus format: jsonl or plain")->capture_default_str();
  s->add_option("--out", score.out, "Write scores here instead of stdout");
  s->add_flag("--turns", score.turns, "Score every prefix (id,position,score rows)");
  s->add_option("--dump-graph", score.dump_graph, "Write each dialogue's graph as JSONL (debugging)");

  DiscriminateArgs disc;
  auto* d = app.add_subcommand("discriminate", "Pair discrimination accuracy with baselines");
  d->add_option("--pairs", disc.pairs)->required();
  d->add_option("--checkpoint", disc.checkpoint)->required();
  d->add_option("--seed", disc.seed, "Seed of the random baseline")->capture_default_str();
  d->add_option("--out", disc.out, "Also write the JSON report here");

  CorrelateArgs corr;
  auto* c = app.add_subcommand("correlate", "Spearman correlation with human ratings");
  c->add_option("--annotations", corr.annotations)->required();
  c->add_option("--checkpoint", corr.checkpoint)->required();
  c->add_option("--level", corr.level, "dialogue or turn")->capture_default_str();
  c->add_option("--out", corr.out, "Directory for correlation.json/.csv");

  AggregateArgs agg;
  auto* g = app.add_subcommand("aggregate", "Aggregate turn scores into dialogue scores");
  g->add_option("--scores", agg.scores, "CSV of id,score or id,position,score")->required();
  g->add_option("--strategy", agg.strategy, "mean, sum, max or prod")->capture_default_str();
  g->add_option("--annotations", agg.annotations, "Correlate the aggregates with dialogue ratings")
      ;
  g->add_option("--out", agg.out, "Output CSV, or report directory with --annotations");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Corpus statistics");
  st->add_option("--input", stats.input, "Corpus file")->required();
  st->add_option("--format", stats.format, "Corpus format: jsonl or plain")->capture_default_str();
  st->add_flag("--filter", stats.filter, "Apply the turn-count filter first");
  st->add_option("--min-turns", stats.min_turns)->capture_default_str();
  st->add_option("--max-turns", stats.max_turns)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& [path, flag] : std::vector<std::pair<std::string, const char*>>{
             {perturb.input, "--input"}, {train_args.config, "--config"}, {train_args.train, "--train"},
             {train_args.val, "--val"}, {score.checkpoint, "--checkpoint"}, {score.input, "--input"},
             {disc.pairs, "--pairs"}, {disc.checkpoint, "--checkpoint"}, {corr.annotations, "--annotations"},
             {corr.checkpoint, "--checkpoint"}, {agg.scores, "--scores"}, {agg.annotations, "--annotations"},
             {stats.input, "--input"}})
      require_file(path, flag);
    if (train_args.out.empty()) {
      const char* env = std::getenv("DIALGRAPH_OUTPUT_DIR");
      train_args.out = env && *env ? env : "runs";
    }
    if (*p) return run_perturb(perturb);
    if (*t) return run_train(train_args);
    if (*s) return run_score(score);
    if (*d) return run_discriminate(disc);
    if (*c) return run_correlate(corr);
    if (*g) return run_aggregate(agg);
    if (*st) return run_stats(stats);
  } catch (const CliError& e) {
    return report_error(e.kind, e.what());
  } catch (const ParseError& e) {
    return report_error("parse", e.what());
  } catch (const CheckpointError& e) {
    return report_error("checkpoint", e.what());
  } catch (const std::invalid_argument& e) {
    return report_error("validation", e.what());
  } catch (const EncodeError& e) {
    return report_error("encode", e.what());
  } catch (const TrainError& e) {
    return report_error("train", e.what());
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
  return 2;
}
