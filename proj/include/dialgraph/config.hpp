#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dialgraph/corpus.hpp"
#include "dialgraph/encode.hpp"
#include "dialgraph/model.hpp"
#include "dialgraph/perturb.hpp"
#include "dialgraph/train.hpp"
#include "json.hpp"

namespace dialgraph {

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const EncoderSpec& e);

// Missing keys keep their defaults; unknown keys are rejected so typos do
// not silently fall back to defaults.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
EncoderSpec encoder_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Window used when the config leaves it unset: 4 for corpora averaging
/// fewer than 10 turns per dialogue, 2 otherwise.
std::size_t default_window(double avg_turns);

/// The structured run configuration (see docs/config.md).
struct RunConfig {
  std::vector<std::filesystem::path> corpus;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  EncoderSpec encoder;
  ModelConfig model;
  bool window_from_data = true;  // true unless "model.window" is given
  TrainConfig train;
  Strategy strategy = Strategy::UR;
  std::size_t perturbations = 20;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;

  /// Relative paths resolve against `base_dir` (the config file's directory).
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// Throws std::invalid_argument naming the first missing path or bad value.
  void validate() const;
};

/// Hex FNV-1a of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& j);

}  // namespace dialgraph
