#include "dialgraph/train.hpp"

#include <cmath>
#include <map>

#include "dialgraph/config.hpp"
#include "dialgraph/evaluate.hpp"

namespace dialgraph {

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  return learning_rate * std::pow(lr_decay_per_epoch, static_cast<double>(epoch));
}

void TrainConfig::validate() const {
  // A zero rate is accepted so a run can be used as a frozen-parameter baseline.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be a finite value >= 0");
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0))
    throw std::invalid_argument("lr_decay_per_epoch must be in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
  if (!freeze_encoder)
    throw std::invalid_argument("freeze_encoder=false is not supported: the available encoders have no trainable "
                                "parameters");
}

Adam::Adam(const ModelParams& shape, double beta1, double beta2, double epsilon)
    : m_(ModelParams::zeros(shape.config)),
      v_(ModelParams::zeros(shape.config)),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void Adam::step(ModelParams& params, const ModelParams& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  ModelParams::zip(
      [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          const double gk = g.data()[k];
          double& mk = m.data()[k];
          double& vk = v.data()[k];
          mk = beta1_ * mk + (1.0 - beta1_) * gk;
          vk = beta2_ * vk + (1.0 - beta2_) * gk * gk;
          p.data()[k] -= learning_rate * (mk / c1) / (std::sqrt(vk / c2) + epsilon_);
        }
      },
      params, grads, m_, v_);
}

std::vector<std::vector<std::size_t>> batch_pairs(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  return out;
}

EncodedPairs encode_pairs(const std::vector<DialoguePair>& pairs, const UtteranceEncoder& enc) {
  EncodedPairs out;
  std::map<std::string, std::size_t> seen;  // keyed by serialized content
  auto intern = [&](const Dialogue& d) {
    Dialogue key = d;
    key.id.clear();
    auto [it, fresh] = seen.try_emplace(dialogue_to_json_line(key), out.inputs.size());
    if (fresh) out.inputs.push_back(encode_input(d, enc));
    return it->second;
  };
  for (const auto& p : pairs) {
    out.first.push_back(intern(p.first));
    out.second.push_back(intern(p.second));
    out.labels.push_back(p.label);
  }
  return out;
}

std::vector<double> score_inputs(const std::vector<EncodedInput>& inputs, const ModelParams& params,
                                 std::size_t batch_size) {
  std::vector<double> scores;
  scores.reserve(inputs.size());
  std::vector<const EncodedInput*> batch;
  for (std::size_t i = 0; i < inputs.size(); i += batch_size) {
    batch.clear();
    for (std::size_t k = i; k < std::min(inputs.size(), i + batch_size); ++k) batch.push_back(&inputs[k]);
    auto tape = forward_batch(batch, params);
    scores.insert(scores.end(), tape.scores.begin(), tape.scores.end());
  }
  return scores;
}

double evaluate_pairs(const EncodedPairs& data, const ModelParams& params) {
  const auto scores = score_inputs(data.inputs, params);
  std::vector<double> a, b;
  a.reserve(data.size());
  b.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    a.push_back(scores[data.first[k]]);
    b.push_back(scores[data.second[k]]);
  }
  return pair_accuracy(a, b, data.labels);
}

namespace {

std::vector<const EncodedInput*> gather(const EncodedPairs& data, const std::vector<std::size_t>& batch) {
  std::vector<const EncodedInput*> out;
  out.reserve(2 * batch.size());
  for (auto k : batch) {
    out.push_back(&data.inputs[data.first[k]]);
    out.push_back(&data.inputs[data.second[k]]);
  }
  return out;
}

void clip_gradients(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_tensor([&](const std::string&, const auto& t) { sq += t.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  grads.for_each_tensor([&](const std::string&, auto& t) { t *= scale; });
}

}  // namespace

std::vector<double> batched_pair_losses(const EncodedPairs& data, const std::vector<std::size_t>& batch,
                                        const ModelParams& params, double margin) {
  auto tape = forward_batch(gather(data, batch), params);
  std::vector<double> out;
  for (std::size_t k = 0; k < batch.size(); ++k)
    out.push_back(margin_loss(tape.scores[2 * k], tape.scores[2 * k + 1], data.labels[batch[k]], margin));
  return out;
}

TrainReport train(ModelParams& model, const EncodedPairs& train_pairs, const EncodedPairs& val_pairs,
                  const TrainConfig& cfg, const EncoderSpec& encoder, const std::filesystem::path& checkpoint_path,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_pairs.size() == 0) throw std::invalid_argument("train: empty training set");
  if (val_pairs.size() == 0) throw std::invalid_argument("train: empty validation set");
  model.config.dropout = cfg.dropout;

  Rng root(cfg.seed);
  Rng shuffle_rng = root.derive(1);
  Rng dropout_rng = root.derive(2);
  Adam adam(model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  ModelParams grads = ModelParams::zeros(model.config);
  ModelParams best = model;

  TrainReport report;
  report.best_val_accuracy = -1.0;
  std::vector<double> d_scores;
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = cfg.learning_rate_at(epoch);
    double loss_sum = 0.0;
    const auto batches = batch_pairs(train_pairs.size(), cfg.batch_size, shuffle_rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      BatchTape tape;
      try {
        tape = forward_batch(gather(train_pairs, batch), model, &dropout_rng);
      } catch (const std::domain_error& e) {
        throw TrainError("non-finite activations at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                         ": " + e.what());
      }
      labels.clear();
      for (auto k : batch) labels.push_back(train_pairs.labels[k]);
      const double loss = pair_loss(tape.scores, labels, cfg.margin, d_scores);
      if (!std::isfinite(loss))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                         " (" + std::to_string(batch.size()) + " pairs)");
      loss_sum += loss * static_cast<double>(batch.size());
      grads.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
      backward_batch(tape, model, d_scores, grads);
      if (cfg.grad_clip > 0.0) clip_gradients(grads, cfg.grad_clip);
      adam.step(model, grads, rec.learning_rate);
    }
    if (!model.all_finite()) throw TrainError("parameters diverged to NaN/Inf in epoch " + std::to_string(epoch));
    rec.mean_loss = loss_sum / static_cast<double>(train_pairs.size());
    rec.val_accuracy = evaluate_pairs(val_pairs, model);
    if (rec.val_accuracy > report.best_val_accuracy) {
      report.best_val_accuracy = rec.val_accuracy;
      report.best_epoch = epoch;
      best = model;
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model = std::move(best);
  if (!checkpoint_path.empty()) {
    save_checkpoint(checkpoint_path, model, cfg, encoder);
    report.checkpoint_path = checkpoint_path;
  }
  return report;
}

std::string report_to_json(const TrainReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"learning_rate", e.learning_rate},
                      {"mean_loss", e.mean_loss},
                      {"val_accuracy", e.val_accuracy}});
  return nlohmann::json{{"epochs", std::move(epochs)},
                        {"best_epoch", report.best_epoch},
                        {"best_val_accuracy", report.best_val_accuracy},
                        {"checkpoint_path", report.checkpoint_path.string()}}
      .dump(2);
}

}  // namespace dialgraph
