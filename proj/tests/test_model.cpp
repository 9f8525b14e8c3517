#include "doctest.h"
#include "dialgraph/model.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dialgraph;

namespace {

ModelConfig small_config(std::size_t window, Pooling pooling = Pooling::mean, NormMode norm = NormMode::by_count) {
  ModelConfig c;
  c.dim = 2;
  c.stage1_dim = 2;
  c.stage2_dim = 2;
  c.window = window;
  c.pooling = pooling;
  c.norm = norm;
  return c;
}

ModelParams random_params(Rng& rng, const ModelConfig& c, double scale = 1.0) {
  ModelParams p = ModelParams::zeros(c);
  p.for_each_tensor([&](const std::string&, auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-scale, scale);
  });
  return p;
}

void check_close(const Matrix& got, const oracle::Grid& ref, double tol) {
  REQUIRE(static_cast<std::size_t>(got.rows()) == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t c = 0; c < ref[i].size(); ++c)
      CHECK(std::abs(got(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) - ref[i][c]) <= tol);
}

}  // namespace

TEST_CASE("single node: self path only") {
  Rng rng(1);
  const auto c = small_config(2);
  const auto p = random_params(rng, c);
  Matrix e(1, 2);
  e << 0.3, -0.7;
  const auto g = build_graph(e, {Speaker::A}, p.attention, c.window);
  REQUIRE(g.edges.size() == 1);
  const Vector expected1 = (p.self1 * e.row(0).transpose()).cwiseMax(0.0);
  const Matrix h1 = conv_stage1(g, p, NormMode::by_count);
  CHECK((h1.row(0).transpose() - expected1).norm() < 1e-15);
  const Vector expected2 = (p.self2 * h1.row(0).transpose()).cwiseMax(0.0);
  CHECK((conv_stage2(h1, g, p).row(0).transpose() - expected2).norm() < 1e-15);
}

TEST_CASE("zero weights give zero stage outputs") {
  Rng rng(2);
  const auto c = small_config(2);
  const auto p = ModelParams::zeros(c);
  const auto g = build_graph(testing::random_matrix(rng, 5, 2), testing::random_speakers(rng, 5), p.attention, 2);
  CHECK(conv_stage1(g, p, NormMode::by_count).isZero(0.0));
  CHECK(conv_stage2(testing::random_matrix(rng, 5, 2), g, p).isZero(0.0));
}

TEST_CASE("stage 1 and stage 2 match the scalar-loop oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const auto norm = trial % 2 == 0 ? NormMode::by_count : NormMode::learned;
    const auto c = small_config(1 + rng.uniform_index(3), Pooling::mean, norm);
    const auto p = random_params(rng, c);
    const auto speakers = testing::random_speakers(rng, n);
    const Matrix e = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 2);
    const auto g = build_graph(e, speakers, p.attention, c.window);
    const Matrix h1 = conv_stage1(g, p, norm);
    const auto ref1 = oracle::stage1(oracle::to_grid(e), speakers, p);
    check_close(h1, ref1, 1e-5);
    const Matrix h2 = conv_stage2(h1, g, p);
    check_close(h2, oracle::stage2(ref1, p), 1e-5);
    CHECK((h1.array() >= 0.0).all());
    CHECK((h2.array() >= 0.0).all());
  }
}

TEST_CASE("stage 2 with identity weights sums the neighborhood") {
  Rng rng(4);
  auto c = small_config(1);
  auto p = ModelParams::zeros(c);
  p.neighbor2 = Matrix::Identity(2, 2);
  p.self2 = Matrix::Identity(2, 2);
  const Matrix h1 = testing::random_matrix(rng, 4, 2).cwiseAbs();
  const auto g = build_graph(testing::random_matrix(rng, 4, 2), {Speaker::A, Speaker::B, Speaker::A, Speaker::B},
                             p.attention, 1);
  const Matrix h2 = conv_stage2(h1, g, p);
  CHECK((h2.row(0) - (h1.row(0) + h1.row(1))).norm() < 1e-15);
  CHECK((h2.row(2) - (h1.row(1) + h1.row(2) + h1.row(3))).norm() < 1e-15);
}

TEST_CASE("score_encoded matches the oracle pipeline for every pooling") {
  Rng rng(5);
  for (Pooling pooling : {Pooling::mean, Pooling::norm_sum, Pooling::max, Pooling::mean_max})
    for (NormMode norm : {NormMode::by_count, NormMode::learned})
      for (int trial = 0; trial < 10; ++trial) {
        ModelConfig c;
        c.dim = 4;
        c.stage1_dim = 3;
        c.stage2_dim = 5;
        c.window = 1 + rng.uniform_index(4);
        c.pooling = pooling;
        c.norm = norm;
        const auto p = random_params(rng, c, 0.7);
        const std::size_t n = 1 + rng.uniform_index(7);
        const auto speakers = testing::random_speakers(rng, n);
        const Matrix raw = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 4);
        const double got = score_encoded(raw, speakers, p).score;
        CHECK(got == doctest::Approx(oracle::score(oracle::to_grid(raw), speakers, p)).epsilon(1e-10));
      }
}

TEST_CASE("pooling arithmetic") {
  Matrix g(2, 2);
  g << 3, 0, 1, 0;
  CHECK(pool_rows(g, Pooling::mean) == Vector((Vector(2) << 2, 0).finished()));
  CHECK(pool_rows(g, Pooling::norm_sum) == Vector((Vector(2) << 1, 0).finished()));
  CHECK(pool_rows(g, Pooling::max) == Vector((Vector(2) << 3, 0).finished()));
  CHECK(pool_rows(g, Pooling::mean_max) == Vector((Vector(4) << 2, 0, 3, 0).finished()));
  CHECK(pool_rows(Matrix::Zero(3, 2), Pooling::norm_sum).isZero(0.0));
  const Matrix same = Matrix::Constant(4, 3, 0.25);
  CHECK((pool_rows(same, Pooling::mean) - same.row(0).transpose()).norm() < 1e-15);
  CHECK_THROWS_AS(pool_rows(Matrix(0, 2), Pooling::mean), std::invalid_argument);
}

TEST_CASE("zero head weights give the bias as score") {
  Rng rng(6);
  ModelConfig c;
  c.dim = 4;
  auto p = ModelParams::init(c, 3);
  p.head_weight.setZero();
  p.head_bias[0] = 0.75;
  for (int k = 0; k < 5; ++k) {
    const std::size_t n = 1 + rng.uniform_index(8);
    CHECK(score_encoded(testing::random_matrix(rng, static_cast<Eigen::Index>(n), 4),
                        testing::random_speakers(rng, n), p)
              .score == 0.75);
  }
}

TEST_CASE("margin loss examples and properties") {
  CHECK(margin_loss(3, 1, 1) == 0.0);
  CHECK(margin_loss(2, 2, 1) == 1.0);
  CHECK(margin_loss(0.5, 1.0, -1) == doctest::Approx(0.5));
  Rng rng(7);
  for (int k = 0; k < 2000; ++k) {
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    const int y = rng.coin() ? 1 : -1;
    const double l = margin_loss(a, b, y);
    CHECK(l >= 0.0);
    CHECK((l == 0.0) == (y * (a - b) >= 1.0));
    CHECK(margin_loss(b, a, -y) == l);
  }
}

TEST_CASE("score_dialogue: determinism, single utterance, order sensitivity") {
  ModelConfig c;
  c.dim = 8;
  c.window = 2;
  const auto p = ModelParams::init(c, 11);
  HashingEncoder enc(8, 5);
  const auto d = make_dialogue("d", {{Speaker::A, "hello there"},
                                     {Speaker::B, "hi how are you"},
                                     {Speaker::A, "fine thanks"},
                                     {Speaker::B, "good to hear"},
                                     {Speaker::A, "what are you doing"},
                                     {Speaker::B, "reading a book"}});
  const double s = score_dialogue(d, enc, p).score;
  CHECK(s == score_dialogue(d, enc, p).score);
  auto permuted = d;
  std::swap(permuted.utterances[1].text, permuted.utterances[4].text);
  CHECK(score_dialogue(permuted, enc, p).score != s);
  const auto one = make_dialogue("one", {{Speaker::A, "alone"}});
  const auto out = score_dialogue(one, enc, p);
  CHECK(std::isfinite(out.score));
  CHECK(out.node_reprs.rows() == 1);
  CHECK(static_cast<std::size_t>(out.node_reprs.cols()) == c.node_width());
}

TEST_CASE("config validation and names") {
  ModelConfig c;
  c.dim = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.window = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.stage1_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  for (Pooling p : {Pooling::mean, Pooling::norm_sum, Pooling::max, Pooling::mean_max})
    CHECK(parse_pooling(pooling_name(p)) == p);
  CHECK_THROWS_AS(parse_pooling("sum"), std::invalid_argument);
  CHECK(parse_norm_mode("learned") == NormMode::learned);
  c = {};
  c.pooling = Pooling::mean_max;
  CHECK(c.head_width() == 2 * (c.dim + c.stage2_dim));
  const auto p = ModelParams::init(c, 1);
  CHECK(p.all_finite());
  CHECK(static_cast<std::size_t>(p.head_weight.size()) == c.head_width());
}
