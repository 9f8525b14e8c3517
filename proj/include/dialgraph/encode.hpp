#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialgraph/corpus.hpp"

namespace dialgraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class EncodeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Maps an utterance text to a fixed-width vector. Implementations are
/// immutable after construction and deterministic per instance.
class UtteranceEncoder {
public:
  virtual ~UtteranceEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector encode(std::string_view text) const = 0;
};

/// Average of token rows; rows = tokens. Empty input gives a zero vector.
Vector mean_pool(const Matrix& token_embeddings);

/// Lower-cased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Test/CI encoder: every token gets a pseudo-random vector derived from
/// (seed, token), and an utterance is the mean of its token vectors. Texts
/// that share tokens land closer in cosine terms.
class HashingEncoder final : public UtteranceEncoder {
public:
  HashingEncoder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  Vector encode(std::string_view text) const override;
  Vector token_vector(std::string_view token) const;

private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Mean pooling over a fixed token-embedding table (word2vec text layout:
/// "<token> v1 ... vd" per line, optional "<count> <dim>" header).
/// Out-of-vocabulary tokens map to the "<unk>" row if present, else are dropped.
class TokenTableEncoder final : public UtteranceEncoder {
public:
  explicit TokenTableEncoder(const std::filesystem::path& table);
  std::size_t dim() const override { return dim_; }
  Vector encode(std::string_view text) const override;

private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> table_;
};

/// Sentence vectors exported by an external encoder (e.g. a fine-tuned
/// transformer with token mean pooling), one JSONL record per text:
/// {"text": "...", "vector": [...]}. Unknown texts are an error.
class PrecomputedEncoder final : public UtteranceEncoder {
public:
  explicit PrecomputedEncoder(const std::filesystem::path& vectors);
  std::size_t dim() const override { return dim_; }
  Vector encode(std::string_view text) const override;

private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> vectors_;
};

enum class EncoderKind { stub, table, precomputed };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::stub;
  std::size_t dim = 32;        // stub only; artifacts define their own width
  std::uint64_t seed = 17;     // stub only
  std::filesystem::path path;  // table / precomputed artifact
  std::string digest;          // artifact content hash, checked on load when set
};

std::unique_ptr<UtteranceEncoder> make_stub_encoder(std::size_t dim, std::uint64_t seed);
std::unique_ptr<UtteranceEncoder> make_encoder(const EncoderSpec& spec);

/// n x d, row i = encoding of utterance i. Throws EncodeError naming the
/// position on failure or on a non-finite/ill-sized vector.
Matrix encode_utterances(const Dialogue& d, const UtteranceEncoder& enc);

// ---------------------------------------------------------------------------
// Bidirectional LSTM contextualizer. Each direction has hidden width d/2;
// row i of the output is [forward_i, backward_i], so width stays d.

/// Gate rows are ordered input, forget, cell, output.
struct LstmParams {
  Matrix input_weight;      // 4h x d
  Matrix recurrent_weight;  // 4h x h
  Vector bias;              // 4h
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

/// Per-step values kept for backpropagation.
struct LstmTrace {
  std::vector<std::size_t> order;  // processing order of rows
  Matrix gates;                    // n x 4h post-activation, indexed by row
  Matrix cells;                    // n x h
  Matrix hidden;                   // n x h
};

struct BiLstmTrace {
  Matrix input;
  LstmTrace forward;
  LstmTrace backward;
};

BiLstmParams make_bilstm(std::size_t dim);  // zero-initialized

Matrix contextualize(const Matrix& raw, const BiLstmParams& params, BiLstmTrace* trace = nullptr);

/// Accumulates parameter gradients into `grads`; writes d(raw) when asked.
void contextualize_backward(const BiLstmTrace& trace, const BiLstmParams& params, const Matrix& d_context,
                            BiLstmParams& grads, Matrix* d_raw = nullptr);

}  // namespace dialgraph
