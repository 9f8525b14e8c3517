#include <cstring>
#include <fstream>

#include "dialgraph/config.hpp"
#include "dialgraph/hashing.hpp"
#include "dialgraph/train.hpp"

namespace dialgraph {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "dialgraph-checkpoint";

template <typename T>
std::uint64_t hash_tensor(const T& t, std::uint64_t h) {
  std::string_view bytes(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
  return fnv1a(bytes, h);
}

json config_block(const ModelParams& params, const TrainConfig& cfg, const EncoderSpec& encoder) {
  return {{"model", to_json(params.config)}, {"train", to_json(cfg)}, {"encoder", to_json(encoder)}};
}

}  // namespace

void save_checkpoint(const fs::path& path, const ModelParams& params, const TrainConfig& cfg,
                     const EncoderSpec& encoder) {
  if (!params.all_finite()) throw CheckpointError("refusing to save non-finite parameters");
  json tensors = json::array();
  std::uint64_t checksum = kFnvOffset;
  params.for_each_tensor([&](const std::string& name, const auto& t) {
    std::vector<double> data(t.data(), t.data() + t.size());
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}});
    checksum = hash_tensor(t, checksum);
  });
  json config = config_block(params, cfg, encoder);
  json doc{{"format", kFormat},
           {"version", kCheckpointVersion},
           {"config", config},
           {"config_hash", config_hash(config)},
           {"seed", cfg.seed},
           {"producer", std::string("dialgraph ") + DIALGRAPH_VERSION},
           {"tensors", std::move(tensors)},
           {"checksum", hex64(checksum)}};

  // Write then rename so a crash never leaves a half-written checkpoint.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out << doc.dump() << '\n';
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string{}) != kFormat)
      throw CheckpointError(path.string() + " is not a dialgraph checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint version " + std::to_string(version) + " in " + path.string() +
                            ", this build reads version " + std::to_string(kCheckpointVersion));

    const json& config = doc.at("config");
    Checkpoint ck;
    ModelConfig model_cfg = model_config_from_json(config.at("model"));
    ck.train = train_config_from_json(config.at("train"));
    ck.encoder = encoder_spec_from_json(config.at("encoder"));
    ck.config_hash = doc.at("config_hash").get<std::string>();
    if (ck.config_hash != config_hash(config)) throw CheckpointError("config hash mismatch in " + path.string());

    ModelParams params = ModelParams::zeros(model_cfg);
    const json& tensors = doc.at("tensors");
    std::size_t index = 0;
    std::uint64_t checksum = kFnvOffset;
    params.for_each_tensor([&](const std::string& name, auto& t) {
      if (index >= tensors.size()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
      const json& entry = tensors[index++];
      if (entry.at("name").get<std::string>() != name)
        throw CheckpointError("expected tensor '" + name + "', found '" + entry.at("name").get<std::string>() + "'");
      if (entry.at("rows").get<Eigen::Index>() != t.rows() || entry.at("cols").get<Eigen::Index>() != t.cols())
        throw CheckpointError("tensor '" + name + "' has the wrong shape");
      const auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(t.size()))
        throw CheckpointError("tensor '" + name + "' has the wrong element count");
      std::memcpy(t.data(), data.data(), data.size() * sizeof(double));
      checksum = hash_tensor(t, checksum);
    });
    if (index != tensors.size()) throw CheckpointError("checkpoint has unexpected extra tensors");
    if (hex64(checksum) != doc.at("checksum").get<std::string>())
      throw CheckpointError("tensor checksum mismatch in " + path.string());
    ck.params = std::move(params);
    return ck;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("invalid configuration in checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace dialgraph
