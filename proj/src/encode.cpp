#include "dialgraph/encode.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dialgraph/hashing.hpp"
#include "dialgraph/rng.hpp"
#include "json.hpp"

namespace dialgraph {

using json = nlohmann::json;

Vector mean_pool(const Matrix& token_embeddings) {
  if (token_embeddings.rows() == 0) return Vector::Zero(token_embeddings.cols());
  return token_embeddings.colwise().mean().transpose();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto w : split_words(text)) {
    std::string t(w);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(t));
  }
  return out;
}

HashingEncoder::HashingEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw std::invalid_argument("stub encoder dim must be >= 1");
}

Vector HashingEncoder::token_vector(std::string_view token) const {
  std::uint64_t state = mix64(fnv1a(token) ^ mix64(seed_));
  Vector v(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    state = mix64(state);
    v[k] = static_cast<double>(state >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
  }
  return v;
}

Vector HashingEncoder::encode(std::string_view text) const {
  auto tokens = tokenize(text);
  Matrix rows(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < tokens.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = token_vector(tokens[i]).transpose();
  return mean_pool(rows);
}

TokenTableEncoder::TokenTableEncoder(const std::filesystem::path& table) {
  std::ifstream in(table);
  if (!in) throw EncodeError("cannot open token table " + table.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    for (double x; fields >> x;) values.push_back(x);
    if (line_no == 1 && values.size() == 1) continue;  // "<count> <dim>" header
    if (values.empty()) throw EncodeError(table.string() + ":" + std::to_string(line_no) + ": row has no values");
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_)
      throw EncodeError(table.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim_) +
                        " values, got " + std::to_string(values.size()));
    table_[token] = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (dim_ == 0) throw EncodeError("token table " + table.string() + " is empty");
}

Vector TokenTableEncoder::encode(std::string_view text) const {
  std::vector<const Vector*> rows;
  const auto unk = table_.find("<unk>");
  for (const auto& tok : tokenize(text)) {
    auto it = table_.find(tok);
    if (it != table_.end())
      rows.push_back(&it->second);
    else if (unk != table_.end())
      rows.push_back(&unk->second);
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i]->transpose();
  return mean_pool(m);
}

PrecomputedEncoder::PrecomputedEncoder(const std::filesystem::path& vectors) {
  std::ifstream in(vectors);
  if (!in) throw EncodeError("cannot open sentence vectors " + vectors.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw EncodeError(vectors.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("text") || !j.contains("vector") || !j["vector"].is_array())
      throw EncodeError(vectors.string() + ":" + std::to_string(line_no) + ": need 'text' and 'vector'");
    auto values = j["vector"].get<std::vector<double>>();
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_ || dim_ == 0)
      throw EncodeError(vectors.string() + ":" + std::to_string(line_no) + ": inconsistent vector width");
    vectors_[trim(j["text"].get<std::string>())] =
        Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (dim_ == 0) throw EncodeError("sentence vector file " + vectors.string() + " is empty");
}

Vector PrecomputedEncoder::encode(std::string_view text) const {
  auto it = vectors_.find(trim(text));
  if (it == vectors_.end()) throw EncodeError("no precomputed vector for text \"" + std::string(text) + "\"");
  return it->second;
}

std::unique_ptr<UtteranceEncoder> make_stub_encoder(std::size_t dim, std::uint64_t seed) {
  return std::make_unique<HashingEncoder>(dim, seed);
}

std::unique_ptr<UtteranceEncoder> make_encoder(const EncoderSpec& spec) {
  if (spec.kind == EncoderKind::stub) return make_stub_encoder(spec.dim, spec.seed);
  if (!spec.digest.empty()) {
    std::string actual = file_digest(spec.path);
    if (actual != spec.digest)
      throw EncodeError("encoder artifact " + spec.path.string() + " changed: digest " + actual + ", expected " +
                        spec.digest);
  }
  if (spec.kind == EncoderKind::table) return std::make_unique<TokenTableEncoder>(spec.path);
  return std::make_unique<PrecomputedEncoder>(spec.path);
}

Matrix encode_utterances(const Dialogue& d, const UtteranceEncoder& enc) {
  const auto dim = static_cast<Eigen::Index>(enc.dim());
  Matrix out(static_cast<Eigen::Index>(d.size()), dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& u = d.utterances[i];
    Vector v;
    try {
      v = enc.encode(u.text);
    } catch (const std::exception& e) {
      throw EncodeError("encoding failed at position " + std::to_string(u.position) + " of '" + d.id + "': " + e.what());
    }
    if (v.size() != dim || !v.allFinite())
      throw EncodeError("encoder returned an invalid vector at position " + std::to_string(u.position) + " of '" + d.id +
                        "'");
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

}  // namespace dialgraph
