#include "dialgraph/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <initializer_list>

#include "dialgraph/hashing.hpp"

namespace dialgraph {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw std::invalid_argument("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown key '" + key + "' in config section '" + std::string(section) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

EncoderKind parse_encoder_kind(std::string_view s) {
  if (s == "stub") return EncoderKind::stub;
  if (s == "table") return EncoderKind::table;
  if (s == "precomputed") return EncoderKind::precomputed;
  throw std::invalid_argument("unknown encoder type '" + std::string(s) + "' (expected stub, table or precomputed)");
}

std::string_view encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::stub: return "stub";
    case EncoderKind::table: return "table";
    case EncoderKind::precomputed: return "precomputed";
  }
  return "stub";
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"stage1_dim", c.stage1_dim},
          {"stage2_dim", c.stage2_dim},
          {"window", c.window},
          {"pooling", std::string(pooling_name(c.pooling))},
          {"norm", std::string(norm_mode_name(c.norm))},
          {"dropout", c.dropout}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"lr_decay_per_epoch", c.lr_decay_per_epoch},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"dropout", c.dropout},             {"margin", c.margin},
          {"seed", c.seed},                   {"grad_clip", c.grad_clip},
          {"freeze_encoder", c.freeze_encoder}, {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},       {"adam_epsilon", c.adam_epsilon}};
}

json to_json(const EncoderSpec& e) {
  json j{{"type", std::string(encoder_kind_name(e.kind))}};
  if (e.kind == EncoderKind::stub) {
    j["dim"] = e.dim;
    j["seed"] = e.seed;
  } else {
    j["path"] = e.path.string();
    if (!e.digest.empty()) j["digest"] = e.digest;
  }
  return j;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  reject_unknown(j, "model", {"dim", "stage1_dim", "stage2_dim", "window", "pooling", "norm", "dropout"});
  read(j, "dim", c.dim);
  read(j, "stage1_dim", c.stage1_dim);
  read(j, "stage2_dim", c.stage2_dim);
  read(j, "window", c.window);
  read(j, "dropout", c.dropout);
  if (j.contains("pooling")) c.pooling = parse_pooling(j["pooling"].get<std::string>());
  if (j.contains("norm")) c.norm = parse_norm_mode(j["norm"].get<std::string>());
  return c;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j, "train",
                 {"learning_rate", "lr_decay_per_epoch", "epochs", "batch_size", "dropout", "margin", "seed",
                  "grad_clip", "freeze_encoder", "adam_beta1", "adam_beta2", "adam_epsilon"});
  read(j, "learning_rate", c.learning_rate);
  read(j, "lr_decay_per_epoch", c.lr_decay_per_epoch);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "dropout", c.dropout);
  read(j, "margin", c.margin);
  read(j, "seed", c.seed);
  read(j, "grad_clip", c.grad_clip);
  read(j, "freeze_encoder", c.freeze_encoder);
  read(j, "adam_beta1", c.adam_beta1);
  read(j, "adam_beta2", c.adam_beta2);
  read(j, "adam_epsilon", c.adam_epsilon);
  return c;
}

EncoderSpec encoder_spec_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, "encoder", {"type", "dim", "seed", "path", "digest"});
  EncoderSpec e;
  if (j.contains("type")) e.kind = parse_encoder_kind(j["type"].get<std::string>());
  read(j, "dim", e.dim);
  read(j, "seed", e.seed);
  std::string path;
  read(j, "path", path);
  e.path = resolve(base_dir, path);
  read(j, "digest", e.digest);
  if (e.kind != EncoderKind::stub && e.path.empty())
    throw std::invalid_argument("encoder type '" + std::string(encoder_kind_name(e.kind)) + "' needs a 'path'");
  return e;
}

std::size_t default_window(double avg_turns) { return avg_turns < 10.0 ? 4 : 2; }

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, "<root>",
                 {"seed", "corpus", "corpus_format", "encoder", "model", "train", "strategy", "perturbations",
                  "output_dir"});
  RunConfig rc;
  read(j, "seed", rc.seed);
  if (j.contains("corpus")) {
    const auto& c = j["corpus"];
    if (c.is_string()) rc.corpus.push_back(resolve(base_dir, c.get<std::string>()));
    else if (c.is_array())
      for (const auto& p : c) rc.corpus.push_back(resolve(base_dir, p.get<std::string>()));
    else throw std::invalid_argument("config key 'corpus' must be a path or list of paths");
  }
  if (j.contains("corpus_format")) rc.corpus_format = parse_corpus_format(j["corpus_format"].get<std::string>());
  if (j.contains("encoder")) rc.encoder = encoder_spec_from_json(j["encoder"], base_dir);
  if (j.contains("model")) {
    rc.model = model_config_from_json(j["model"]);
    rc.window_from_data = !j["model"].contains("window");
  }
  if (rc.encoder.kind == EncoderKind::stub) rc.model.dim = rc.encoder.dim;
  rc.train.seed = rc.seed;
  if (j.contains("train")) rc.train = train_config_from_json(j["train"], rc.train);
  rc.model.dropout = rc.train.dropout;
  if (j.contains("strategy")) rc.strategy = parse_strategy(j["strategy"].get<std::string>());
  read(j, "perturbations", rc.perturbations);
  std::string out;
  read(j, "output_dir", out);
  if (out.empty()) {
    const char* env = std::getenv("DIALGRAPH_OUTPUT_DIR");
    out = env && *env ? env : "runs";
    rc.output_dir = out;
  } else {
    rc.output_dir = resolve(base_dir, out);
  }
  return rc;
}

RunConfig RunConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  RunConfig rc = from_json(j, path.parent_path());
  rc.validate();
  return rc;
}

json RunConfig::to_json() const {
  json corpus_paths = json::array();
  for (const auto& p : corpus) corpus_paths.push_back(p.string());
  return {{"seed", seed},
          {"corpus", std::move(corpus_paths)},
          {"corpus_format", corpus_format == CorpusFormat::jsonl ? "jsonl" : "plain"},
          {"encoder", dialgraph::to_json(encoder)},
          {"model", dialgraph::to_json(model)},
          {"train", dialgraph::to_json(train)},
          {"strategy", std::string(strategy_name(strategy))},
          {"perturbations", perturbations},
          {"output_dir", output_dir.string()}};
}

void RunConfig::validate() const {
  for (const auto& p : corpus)
    if (!fs::exists(p)) throw std::invalid_argument("corpus path does not exist: " + p.string());
  if (encoder.kind != EncoderKind::stub && !fs::exists(encoder.path))
    throw std::invalid_argument("encoder artifact does not exist: " + encoder.path.string());
  if (encoder.kind == EncoderKind::stub && encoder.dim == 0) throw std::invalid_argument("encoder dim must be >= 1");
  if (perturbations == 0) throw std::invalid_argument("perturbations must be >= 1");
  ModelConfig probe = model;
  if (encoder.kind != EncoderKind::stub) probe.dim = 2;  // artifact width is only known after loading
  probe.validate();
  train.validate();
}

std::string config_hash(const json& j) { return hex64(fnv1a(j.dump())); }

}  // namespace dialgraph
