#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dialgraph/config.hpp"

using namespace dialgraph;
namespace fs = std::filesystem;
using nlohmann::json;

TEST_CASE("sections reject unknown keys and keep defaults for missing ones") {
  CHECK_THROWS_WITH_AS(model_config_from_json(json{{"widow", 3}}), doctest::Contains("widow"), std::invalid_argument);
  CHECK_THROWS_AS(train_config_from_json(json{{"lr", 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"modle", json::object()}}), std::invalid_argument);
  CHECK_THROWS_AS(model_config_from_json(json{{"window", "two"}}), std::invalid_argument);
  const auto m = model_config_from_json(json{{"window", 3}, {"pooling", "max"}});
  CHECK(m.window == 3);
  CHECK(m.pooling == Pooling::max);
  CHECK(m.stage1_dim == ModelConfig{}.stage1_dim);
  const auto t = train_config_from_json(json{{"epochs", 4}});
  CHECK(t.epochs == 4);
  CHECK(t.learning_rate == 0.002);
  CHECK(t.batch_size == 512);
}

TEST_CASE("config round-trips through JSON") {
  ModelConfig m;
  m.window = 5;
  m.norm = NormMode::learned;
  CHECK(to_json(model_config_from_json(to_json(m))) == to_json(m));
  TrainConfig t;
  t.seed = 99;
  t.grad_clip = 2.5;
  CHECK(to_json(train_config_from_json(to_json(t))) == to_json(t));
}

TEST_CASE("run config: paths resolve against the config directory") {
  const fs::path dir = fs::temp_directory_path() / "dialgraph_cfg";
  fs::remove_all(dir);
  fs::create_directories(dir / "data");
  std::ofstream(dir / "data" / "c.jsonl") << "";
  std::ofstream(dir / "run.json") << R"({"corpus": "data/c.jsonl", "output_dir": "out", "seed": 5,
    "encoder": {"type": "stub", "dim": 16}, "train": {"epochs": 2}})";
  const auto rc = RunConfig::load(dir / "run.json");
  REQUIRE(rc.corpus.size() == 1);
  CHECK(rc.corpus[0] == dir / "data" / "c.jsonl");
  CHECK(rc.output_dir == dir / "out");
  CHECK(rc.model.dim == 16);
  CHECK(rc.train.seed == 5);
  CHECK(rc.train.epochs == 2);
  CHECK(rc.window_from_data);

  std::ofstream(dir / "missing.json") << R"({"corpus": ["nope.jsonl"]})";
  CHECK_THROWS_WITH_AS(RunConfig::load(dir / "missing.json"), doctest::Contains("nope.jsonl"), std::invalid_argument);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("output directory falls back to the environment, then to runs") {
  ::setenv("DIALGRAPH_OUTPUT_DIR", "/tmp/dialgraph_env_out", 1);
  CHECK(RunConfig::from_json(json::object()).output_dir == "/tmp/dialgraph_env_out");
  ::unsetenv("DIALGRAPH_OUTPUT_DIR");
  CHECK(RunConfig::from_json(json::object()).output_dir == "runs");
  CHECK(RunConfig::from_json(json{{"output_dir", "/abs"}}).output_dir == "/abs");
}

TEST_CASE("explicit window disables the data-derived default") {
  CHECK_FALSE(RunConfig::from_json(json{{"model", {{"window", 2}}}}).window_from_data);
  CHECK(default_window(6.5) == 4);
  CHECK(default_window(9.99) == 4);
  CHECK(default_window(10.0) == 2);
  CHECK(default_window(14.2) == 2);
}

TEST_CASE("config hash is stable and key-order independent") {
  const json a = json::parse(R"({"b": 1, "a": [1, 2], "c": {"y": true, "x": null}})");
  const json b = json::parse(R"({"c": {"x": null, "y": true}, "a": [1, 2], "b": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json::parse(R"({"b": 2, "a": [1, 2], "c": {"y": true, "x": null}})")));
  CHECK(config_hash(json::object()) == config_hash(json::object()));
}
