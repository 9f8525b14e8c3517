#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dialgraph/encode.hpp"
#include "dialgraph/model.hpp"
#include "dialgraph/network.hpp"
#include "dialgraph/perturb.hpp"
#include "dialgraph/rng.hpp"

namespace dialgraph {

struct TrainConfig {
  double learning_rate = 0.002;
  double lr_decay_per_epoch = 0.5;
  std::size_t epochs = 20;
  std::size_t batch_size = 512;
  double dropout = 0.5;  // overrides the model's dropout for the run
  double margin = 1.0;
  std::uint64_t seed = 1;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  bool freeze_encoder = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::filesystem::path checkpoint_path;
};

class TrainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction.
class Adam {
public:
  Adam(const ModelParams& shape, double beta1, double beta2, double epsilon);
  void step(ModelParams& params, const ModelParams& grads, double learning_rate);
  long steps() const { return t_; }

private:
  ModelParams m_, v_;
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
};

/// Shuffled index batches over [0, n); the last batch may be short.
std::vector<std::vector<std::size_t>> batch_pairs(std::size_t n, std::size_t batch_size, Rng& rng);

/// Pre-encoded pair set; identical dialogues share one encoding.
struct EncodedPairs {
  std::vector<EncodedInput> inputs;
  std::vector<std::size_t> first, second;  // indices into inputs
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

EncodedPairs encode_pairs(const std::vector<DialoguePair>& pairs, const UtteranceEncoder& enc);

/// Scores of every input with dropout disabled, batched as disjoint unions.
std::vector<double> score_inputs(const std::vector<EncodedInput>& inputs, const ModelParams& params,
                                 std::size_t batch_size = 256);

double evaluate_pairs(const EncodedPairs& data, const ModelParams& params);

/// Per-pair margin losses computed in one batched forward pass (no dropout).
std::vector<double> batched_pair_losses(const EncodedPairs& data, const std::vector<std::size_t>& batch,
                                        const ModelParams& params, double margin);

/// Called after each epoch; useful for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place. On return `model` holds the parameters of the epoch
/// with the best validation accuracy (earliest on ties). When
/// `checkpoint_path` is non-empty the selected parameters are saved there.
TrainReport train(ModelParams& model, const EncodedPairs& train_pairs, const EncodedPairs& val_pairs,
                  const TrainConfig& cfg, const EncoderSpec& encoder = {},
                  const std::filesystem::path& checkpoint_path = {}, const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Checkpoints: a single JSON document with every tensor, the model and
// training configuration, the encoder reference, and a checksum over the
// tensor bits.

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  TrainConfig train;
  EncoderSpec encoder;
  std::string config_hash;
};

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const TrainConfig& cfg,
                     const EncoderSpec& encoder = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string report_to_json(const TrainReport& report);

}  // namespace dialgraph
