// Behavioral acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dialgraph/evaluate.hpp"
#include "dialgraph/graph.hpp"
#include "dialgraph/model.hpp"
#include "dialgraph/network.hpp"
#include "dialgraph/perturb.hpp"
#include "dialgraph/train.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "toy_corpus.hpp"

using namespace dialgraph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

// 1. Nine relation types on an alternating 6-turn dialogue with M=5.
Outcome relation_taxonomy() {
  Rng rng(1);
  std::vector<Speaker> speakers;
  for (int i = 0; i < 6; ++i) speakers.push_back(i % 2 == 0 ? Speaker::A : Speaker::B);
  const auto g = build_graph(testing::random_matrix(rng, 6, 4), speakers, Matrix::Identity(4, 4), 5);
  std::set<Relation> seen;
  for (const auto& e : g.edges) seen.insert(e.relation);
  return {seen.size() == 9, std::to_string(seen.size()) + " distinct relation types"};
}

// 2. Incoming weights sum to one for 1000 random graph builds.
Outcome edge_weight_normalization() {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30), window = 1 + rng.uniform_index(6);
    const auto dim = static_cast<Eigen::Index>(2 + 2 * rng.uniform_index(8));
    Rng build(rng.next());
    const auto g = build_graph(testing::random_matrix(build, static_cast<Eigen::Index>(n), dim),
                               testing::random_speakers(build, n), testing::random_matrix(build, dim, dim, 2.0), window);
    std::vector<double> sums(n, 0.0);
    for (const auto& e : g.edges) sums[e.dst] += e.weight;
    for (double s : sums) worst = std::max(worst, std::abs(s - 1.0));
  }
  return {worst <= 1e-6, "max |sum - 1| = " + fmt("%.3g", worst)};
}

// 3. Vectorized convolutions against the scalar-loop oracle.
Outcome convolution_oracle() {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    ModelConfig c;
    c.dim = 2;
    c.stage1_dim = 2;
    c.stage2_dim = 2;
    c.window = 1 + rng.uniform_index(5);
    c.norm = trial % 2 == 0 ? NormMode::by_count : NormMode::learned;
    ModelParams p = ModelParams::zeros(c);
    p.for_each_tensor([&](const std::string&, auto& t) {
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-1, 1);
    });
    const std::size_t n = 1 + rng.uniform_index(6);
    const auto speakers = testing::random_speakers(rng, n);
    const Matrix e = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 2);
    const auto g = build_graph(e, speakers, p.attention, c.window);
    const Matrix h1 = conv_stage1(g, p, c.norm);
    const Matrix h2 = conv_stage2(h1, g, p);
    const auto r1 = oracle::stage1(oracle::to_grid(e), speakers, p);
    const auto r2 = oracle::stage2(r1, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 2; ++k) {
        const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
        worst = std::max({worst, std::abs(h1(ii, kk) - r1[i][k]), std::abs(h2(ii, kk) - r2[i][k])});
      }
  }
  return {worst <= 1e-5, "max abs diff = " + fmt("%.3g", worst)};
}

// 4. Finite-difference gradient check on a 4-turn original/negative pair.
Outcome gradient_check() {
  const auto original = make_dialogue("g", {{Speaker::A, "where did you go on holiday"},
                                            {Speaker::B, "we went to the coast for a week"},
                                            {Speaker::A, "how was the weather there"},
                                            {Speaker::B, "sunny nearly every day"}});
  const auto donor = make_dialogue("h", {{Speaker::A, "my printer is jammed again"}, {Speaker::B, "try turning it off"}});
  Rng rng(4);
  const auto negative = perturb_ur(original, {original, donor}, rng);
  HashingEncoder enc(4, 17);
  const std::vector<EncodedInput> inputs{encode_input(original, enc), encode_input(negative, enc)};
  double worst = 0.0;
  std::size_t checked = 0, groups = 0;
  bool vacuous = false;
  for (NormMode norm : {NormMode::by_count, NormMode::learned}) {
    ModelConfig c;
    c.dim = 4;
    c.stage1_dim = 3;
    c.stage2_dim = 3;
    c.window = 2;
    c.norm = norm;
    auto params = ModelParams::init(c, 4);
    if (norm == NormMode::learned) params.norm_log = testing::random_matrix(rng, kTypedRelationCount, 1, 0.5);
    for (const auto& g : testing::gradient_check(inputs, {1}, params, 1.0, 1e-4)) {
      if (norm == NormMode::by_count && g.name == "stage1.norm_log") continue;
      ++groups;
      checked += g.checked;
      worst = std::max(worst, g.max_rel_error);
      // The head bias cancels in a score difference, so its gradient is exactly zero.
      if (g.checked == 0 || (g.analytic_norm == 0.0 && g.name != "head.bias")) vacuous = true;
    }
  }
  return {!vacuous && worst <= 1e-3, std::to_string(groups) + " groups, " + std::to_string(checked) +
                                         " entries, max rel error = " + fmt("%.3g", worst)};
}

// 5. UR edits exactly one position; SS keeps one speaker fixed and changes the dialogue.
Outcome perturbation_invariants() {
  Rng gen(5), rng(6);
  std::size_t ur_bad = 0, ss_bad = 0, ss_draws = 0;
  std::vector<Dialogue> pool;
  for (int k = 0; k < 20; ++k) pool.push_back(testing::random_dialogue(gen, "p" + std::to_string(k), 6, 50, "p"));
  for (int k = 0; k < 10000; ++k) {
    const auto d = testing::random_dialogue(gen, "d", 2 + gen.uniform_index(12), 50, "d");
    pool[0] = d;
    const auto out = perturb_ur(d, pool, rng);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < d.size(); ++i) diff += out.utterances[i].text != d.utterances[i].text;
    if (diff != 1 || out.speakers() != d.speakers()) ++ur_bad;
  }
  while (ss_draws < 10000) {
    const auto d = testing::random_dialogue(gen, "d", 3 + gen.uniform_index(12), 50, "d");
    Dialogue out;
    try {
      out = perturb_ss(d, rng);
    } catch (const PerturbError&) {
      continue;
    }
    ++ss_draws;
    bool fixed[2] = {true, true};
    for (std::size_t i = 0; i < d.size(); ++i)
      if (out.utterances[i].text != d.utterances[i].text) fixed[static_cast<int>(d.utterances[i].speaker)] = false;
    if (!(fixed[0] || fixed[1]) || out == d || out.speakers() != d.speakers()) ++ss_bad;
  }
  return {ur_bad == 0 && ss_bad == 0,
          "UR violations " + std::to_string(ur_bad) + "/10000, SS violations " + std::to_string(ss_bad) + "/10000"};
}

// 6. Hinge loss on a grid plus the worked examples.
Outcome loss_contract() {
  bool ok = margin_loss(3, 1, 1) == 0.0 && margin_loss(1, 1, 1) == 1.0 && margin_loss(0.5, 1.0, -1) == 0.5;
  std::size_t cases = 3;
  for (int a = -12; a <= 12; ++a)
    for (int b = -12; b <= 12; ++b)
      for (int y : {1, -1}) {
        const double sa = a * 0.25, sb = b * 0.25;
        const double expected = std::max(0.0, -y * (sa - sb) + 1.0);
        const double l = margin_loss(sa, sb, y);
        ok = ok && l == expected && (l == 0.0) == (y * (sa - sb) >= 1.0);
        ++cases;
      }
  return {ok, std::to_string(cases) + " cases"};
}

// 7. Ten dialogues and k=20 give 400 balanced pairs.
Outcome protocol_counts() {
  Rng gen(7);
  std::vector<Dialogue> ds;
  for (int k = 0; k < 10; ++k) ds.push_back(testing::random_dialogue(gen, "d" + std::to_string(k), 6, 50, "t" + std::to_string(k)));
  std::string detail;
  bool ok = true;
  for (Strategy s : {Strategy::UR, Strategy::SS}) {
    const auto data = build_pair_dataset(ds, s, 20, Rng(8));
    const auto positive = std::count_if(data.pairs.begin(), data.pairs.end(), [](const DialoguePair& p) { return p.label == 1; });
    ok = ok && data.pairs.size() == 400 && positive == 200;
    detail += std::string(strategy_name(s)) + ": " + std::to_string(data.pairs.size()) + " pairs, " +
              std::to_string(positive) + " positive; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// 8. Toy corpus: training beats CoSim, which beats random.
Outcome learnability() {
  const auto corpus = testing::make_toy_corpus();
  const std::vector<Dialogue> tr(corpus.begin(), corpus.begin() + 400), va(corpus.begin() + 400, corpus.end());
  const auto train_pairs = build_pair_dataset(tr, Strategy::UR, 20, Rng(3)).pairs;
  const auto val_pairs = build_pair_dataset(va, Strategy::UR, 20, Rng(4)).pairs;
  HashingEncoder enc(32, 17);
  const double random = random_baseline(val_pairs, 5);
  const double cosim = discrimination_accuracy(val_pairs, [&](const Dialogue& d) { return cosim_baseline(d, enc); });
  ModelConfig mc;
  mc.dim = 32;
  auto model = ModelParams::init(mc, 1);
  TrainConfig tc;
  tc.batch_size = 32;
  const auto report = train(model, encode_pairs(train_pairs, enc), encode_pairs(val_pairs, enc), tc);
  const double acc = report.best_val_accuracy;
  const bool ok = acc >= 0.95 && std::abs(random - 0.5) <= 0.03 && random < cosim && cosim < acc;
  return {ok, "model " + fmt("%.4f", acc) + " (epoch " + std::to_string(report.best_epoch + 1) + "), CoSim " +
                  fmt("%.4f", cosim) + ", random " + fmt("%.4f", random)};
}

// 9. Spearman against the rank-difference formula.
Outcome spearman_oracle() {
  std::vector<double> x{1, 2, 3, 4, 5, 6}, y = x;
  double worst = 0.0;
  int count = 0;
  do {
    worst = std::max(worst, std::abs(spearman(x, y).rho - oracle::rank_formula_rho(x, y)));
    ++count;
  } while (std::next_permutation(y.begin(), y.end()));
  const double example = spearman({1, 2, 3, 4}, {1, 3, 2, 4}).rho;
  return {worst <= 1e-12 && std::abs(example - 0.8) <= 1e-15,
          std::to_string(count) + " permutations, max diff " + fmt("%.3g", worst) + "; example rho = " +
              fmt("%.17g", example)};
}

// 10. perturb -> train -> discriminate twice from the same seeds.
struct PipelineResult {
  std::string pairs_file, train_report, discrimination, checkpoint;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineResult run_pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  testing::ToyCorpusOptions o;
  o.dialogues = 60;
  const auto corpus = testing::make_toy_corpus(o);
  const std::vector<Dialogue> tr(corpus.begin(), corpus.begin() + 48), va(corpus.begin() + 48, corpus.end());
  auto write_pairs = [&](const std::vector<Dialogue>& ds, std::uint64_t seed, const std::string& name) {
    std::ofstream out(dir / name);
    for (const auto& p : build_pair_dataset(ds, Strategy::SS, 5, Rng(seed)).pairs) out << pair_to_json_line(p) << '\n';
  };
  write_pairs(tr, 11, "train.jsonl");
  write_pairs(va, 12, "val.jsonl");
  const auto train_pairs = parse_pairs(slurp(dir / "train.jsonl"));
  const auto val_pairs = parse_pairs(slurp(dir / "val.jsonl"));
  EncoderSpec spec;
  spec.dim = 16;
  spec.seed = 17;
  const auto enc = make_encoder(spec);
  ModelConfig mc;
  mc.dim = 16;
  mc.stage1_dim = 8;
  mc.stage2_dim = 8;
  auto model = ModelParams::init(mc, 9);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  tc.seed = 13;
  const auto report = train(model, encode_pairs(train_pairs, *enc), encode_pairs(val_pairs, *enc), tc, spec,
                            dir / "checkpoint.json");
  const auto ck = load_checkpoint(dir / "checkpoint.json");
  nlohmann::json disc{
      {"accuracy", discrimination_accuracy(val_pairs, [&](const Dialogue& d) { return score_dialogue(d, *enc, ck.params).score; })},
      {"random", random_baseline(val_pairs, 13)},
      {"cosim", discrimination_accuracy(val_pairs, [&](const Dialogue& d) { return cosim_baseline(d, *enc); })}};
  auto report_json = nlohmann::json::parse(report_to_json(report));
  report_json.erase("checkpoint_path");
  return {slurp(dir / "train.jsonl") + slurp(dir / "val.jsonl"), report_json.dump(), disc.dump(),
          slurp(dir / "checkpoint.json")};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "dialgraph_acceptance_determinism";
  fs::remove_all(root);
  const auto a = run_pipeline(root / "a");
  const auto b = run_pipeline(root / "b");
  fs::remove_all(root);
  const bool pairs = a.pairs_file == b.pairs_file, report = a.train_report == b.train_report,
             disc = a.discrimination == b.discrimination, ck = a.checkpoint == b.checkpoint;
  auto yn = [](bool v) { return v ? "identical" : "DIFFERENT"; };
  return {pairs && report && disc && ck && !a.checkpoint.empty(),
          std::string("pairs ") + yn(pairs) + ", train report " + yn(report) + ", discrimination " + yn(disc) +
              ", checkpoint " + yn(ck) + " (" + std::to_string(a.checkpoint.size()) + " bytes)"};
}

// 11. Disjoint-union batching against one-dialogue-at-a-time scoring.
Outcome batching_invariance() {
  testing::ToyCorpusOptions o;
  o.dialogues = 200;
  o.max_turns = 20;
  const auto corpus = testing::make_toy_corpus(o);
  HashingEncoder enc(32, 17);
  std::vector<EncodedInput> inputs;
  for (const auto& d : corpus) inputs.push_back(encode_input(d, enc));
  double worst = 0.0;
  for (Pooling pooling : {Pooling::mean, Pooling::norm_sum, Pooling::max, Pooling::mean_max}) {
    ModelConfig mc;
    mc.pooling = pooling;
    mc.norm = pooling == Pooling::max ? NormMode::learned : NormMode::by_count;
    const auto params = ModelParams::init(mc, 21);
    const auto batched = score_inputs(inputs, params, 64);
    for (std::size_t k = 0; k < inputs.size(); ++k)
      worst = std::max(worst, std::abs(batched[k] - forward_batch({&inputs[k]}, params).scores[0]));
  }
  return {worst <= 1e-5, "800 dialogue scores, max abs diff = " + fmt("%.3g", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "relation taxonomy", 1, relation_taxonomy},
      {2, "edge-weight normalization", 10, edge_weight_normalization},
      {3, "convolution oracle", 30, convolution_oracle},
      {4, "gradient check", 60, gradient_check},
      {5, "perturbation invariants", 30, perturbation_invariants},
      {6, "loss contract", 0, loss_contract},
      {7, "protocol counts", 0, protocol_counts},
      {8, "end-to-end learnability", 600, learnability},
      {9, "spearman oracle", 0, spearman_oracle},
      {10, "determinism", 0, determinism},
      {11, "batching invariance", 0, batching_invariance},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = out.pass;
    std::string timing = fmt("%.2fs", seconds);
    if (c.limit_seconds > 0) {
      timing += fmt(" of %.0fs", c.limit_seconds);
      if (seconds > c.limit_seconds) pass = false;
    }
    failures += pass ? 0 : 1;
    std::printf("%s [%2d] %s: %s (%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
