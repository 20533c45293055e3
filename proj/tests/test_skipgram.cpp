#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "motifnet/errors.hpp"
#include "motifnet/experiment.hpp"
#include "motifnet/skipgram.hpp"

using namespace motif;
using motif::testing::kGradientTolerance;
using motif::testing::max_gradient_error;

namespace {

VectorXd random_vector(Rng& rng, Eigen::Index n, double scale) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

RowMatrixXd random_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  RowMatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

std::vector<std::vector<std::size_t>> encode_all(const Vocabulary& v,
                                                 const std::vector<TokenSequence>& corpus) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : corpus) out.push_back(v.encode(s));
  return out;
}

SkipGramConfig small_config() {
  SkipGramConfig c;
  c.dim = 16;
  c.window = 2;
  c.negatives = 3;
  c.epochs = 30;
  c.seed = 0;
  return c;
}

}  // namespace

TEST_CASE("pair loss at the zero point is 2 ln 2") {
  const VectorXd w = VectorXd::Zero(4);
  const VectorXd c = VectorXd::Zero(4);
  const RowMatrixXd neg = RowMatrixXd::Zero(1, 4);
  CHECK(-sgns_objective(w, c, neg) == doctest::Approx(1.3862944).epsilon(1e-7));
}

TEST_CASE("log_sigmoid is finite in the tails") {
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid(800.0) == doctest::Approx(0.0));
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("SGNS gradient matches central differences") {
  Rng rng(0);
  for (int point = 0; point < 3; ++point) {
    VectorXd w = random_vector(rng, 6, 0.8);
    VectorXd c = random_vector(rng, 6, 0.8);
    RowMatrixXd neg = random_rows(rng, 4, 6, 0.8);
    const auto g = sgns_gradient(w, c, neg);
    auto objective = [&] { return sgns_objective(w, c, neg); };
    CHECK(max_gradient_error(w, g.target, objective) < kGradientTolerance);
    CHECK(max_gradient_error(c, g.context, objective) < kGradientTolerance);
    CHECK(max_gradient_error(neg, g.negatives, objective) < kGradientTolerance);
  }
}

TEST_CASE("one training update is an ascent step along the checked gradient") {
  Rng rng(1);
  RowMatrixXd input = random_rows(rng, 5, 4, 0.5);
  RowMatrixXd output = random_rows(rng, 5, 4, 0.5);
  const std::vector<std::size_t> negatives{3, 4, 3};
  RowMatrixXd neg_rows(3, 4);
  for (int i = 0; i < 3; ++i) neg_rows.row(i) = output.row(static_cast<Eigen::Index>(negatives[i]));
  const VectorXd w = input.row(1).transpose();
  const VectorXd c = output.row(2).transpose();
  const auto g = sgns_gradient(w, c, neg_rows);

  const double lr = 0.1;
  RowMatrixXd expected_out = output;
  expected_out.row(2) += lr * g.context.transpose();
  for (int i = 0; i < 3; ++i) {
    expected_out.row(static_cast<Eigen::Index>(negatives[i])) += lr * g.negatives.row(i);
  }
  VectorXd scratch;
  const double obj = sgns_update<double>(input.row(1), output, 2, negatives, lr, scratch);
  CHECK(obj == doctest::Approx(g.objective));
  CHECK((input.row(1).transpose() - (w + lr * g.target)).norm() < 1e-12);
  CHECK((output - expected_out).norm() < 1e-12);
}

TEST_CASE("cosine") {
  using V = Eigen::Vector2d;
  CHECK(cosine(V(1, 0), V(0, 1)) == doctest::Approx(0.0));
  CHECK(cosine(V(1, 2), V(2, 4)) == doctest::Approx(1.0));
  CHECK(cosine(V(1, 1), V(1, 0)) == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK_THROWS_AS(cosine(V(0, 0), V(1, 0)), DataError);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const VectorXd a = random_vector(rng, 5, 1.0);
    const VectorXd b = random_vector(rng, 5, 1.0);
    const double lambda = rng.uniform(0.01, 50.0);
    CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)).epsilon(1e-12));
    CHECK(cosine(VectorXd(lambda * a), b) == doctest::Approx(cosine(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("most_similar") {
  KeyedVectors kv;
  kv.keys = {"a", "b", "c"};
  kv.vectors.resize(3, 2);
  kv.vectors << 1, 0, 0.9, 0.1, -1, 0;
  const auto top = most_similar(kv, "a", 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].token == "b");
  CHECK(top[0].cosine == doctest::Approx(0.9938837).epsilon(1e-7));

  const auto all = most_similar(kv, "a", 2);
  REQUIRE(all.size() == 2);
  CHECK(all[1].token == "c");
  CHECK(all[1].cosine == doctest::Approx(-1.0));

  // ties keep row order
  KeyedVectors tied{{"q", "x", "y"}, RowMatrixXd(3, 2)};
  tied.vectors << 1, 0, 2, 0, 3, 0;
  const auto t = most_similar(tied, "q", 2);
  CHECK(t[0].token == "x");
  CHECK(t[1].token == "y");

  KeyedVectors near{{"21_20", "20_21", "50_71"}, RowMatrixXd::Identity(3, 3)};
  CHECK_THROWS_WITH_AS(most_similar(near, "21_21", 2),
                       "unknown token '21_21'; did you mean: 21_20 20_21", DataError);
}

TEST_CASE("skip-gram separates co-occurring from non-co-occurring tokens") {
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < 40; ++i) {
    corpus.push_back({"p", "q", "p", "q", "p", "q"});
    corpus.push_back({"r", "s", "r", "s", "r", "s"});
  }
  const Vocabulary v = Vocabulary::build(corpus, 1);
  const auto emb = train_skipgram(encode_all(v, corpus), v, small_config());
  auto row = [&](const char* t) { return VectorXd(emb.input.row(static_cast<Eigen::Index>(*v.find(t))).transpose()); };
  CHECK(cosine(row("p"), row("q")) > cosine(row("p"), row("r")));
  CHECK(emb.input.allFinite());
  CHECK(emb.output.allFinite());
  CHECK(emb.rows() == 4);
}

TEST_CASE("deterministic mode is bit-reproducible") {
  std::vector<TokenSequence> corpus = {{"a", "b", "c", "a", "d"}, {"b", "c", "d", "a"}, {"c", "a", "b"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  const auto one = train_skipgram(encode_all(v, corpus), v, small_config());
  const auto two = train_skipgram(encode_all(v, corpus), v, small_config());
  CHECK(write_keyed_vectors(to_keyed(v, one.input)) == write_keyed_vectors(to_keyed(v, two.input)));
  auto other = small_config();
  other.seed = 1;
  const auto three = train_skipgram(encode_all(v, corpus), v, other);
  CHECK((three.input - one.input).norm() > 0.0);
}

TEST_CASE("epoch objective is non-decreasing over the first five epochs on the fixtures") {
  const auto corpus = load_corpus({{std::filesystem::path(MOTIFNET_FIXTURE_DIR) / "german", "german"},
                                   {std::filesystem::path(MOTIFNET_FIXTURE_DIR) / "chinese", "chinese"}});
  const auto songs = tokenize_corpus(corpus.melodies, {TokenMode::intervallic, 2});
  SkipGramConfig config;
  config.dim = 50;
  config.epochs = 5;
  const EmbeddingRun run = train_embeddings(songs, config);
  REQUIRE(run.log.epoch_objective.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) {
    CHECK(run.log.epoch_objective[e] >= run.log.epoch_objective[e - 1]);
  }
}

TEST_CASE("parallel mode trains and stays finite") {
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < 20; ++i) corpus.push_back({"a", "b", "c", "d", "a", "c"});
  const Vocabulary v = Vocabulary::build(corpus, 1);
  auto config = small_config();
  config.deterministic = false;
  config.threads = 3;
  TrainingLog log;
  const auto emb = train_skipgram(encode_all(v, corpus), v, config, &log);
  CHECK(emb.input.allFinite());
  CHECK(log.epoch_objective.size() == config.epochs);
}

TEST_CASE("training errors") {
  std::vector<TokenSequence> corpus = {{"a", "b", "a", "b"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  auto config = small_config();
  config.lr_start = 1e200;
  config.lr_end = 1e200;
  CHECK_THROWS_AS(train_skipgram(encode_all(v, corpus), v, config), DivergenceError);
  auto bad = small_config();
  bad.window = 0;
  CHECK_THROWS_AS(train_skipgram(encode_all(v, corpus), v, bad), std::invalid_argument);
}

TEST_CASE("PV-DBOW gradient matches central differences") {
  Rng rng(3);
  for (int point = 0; point < 3; ++point) {
    VectorXd doc = random_vector(rng, 5, 0.7);
    RowMatrixXd output = random_rows(rng, 6, 5, 0.7);
    const std::vector<std::size_t> tokens{0, 2, 2, 5};
    const std::vector<std::vector<std::size_t>> negatives{{1, 3}, {4, 0}, {1, 1}, {3, 2}};
    const auto g = pvdbow_gradient(doc, output, tokens, negatives);
    auto objective = [&] { return pvdbow_objective(doc, output, tokens, negatives); };
    CHECK(max_gradient_error(doc, g.doc, objective) < kGradientTolerance);
    CHECK(max_gradient_error(output, g.output, objective) < kGradientTolerance);
  }
}

TEST_CASE("PV-DBOW places identical songs together") {
  std::vector<TokenSequence> corpus = {{"a", "b", "c", "a", "b", "c", "a", "b"},
                                       {"a", "b", "c", "a", "b", "c", "a", "b"},
                                       {"x", "y", "z", "x", "y", "z", "x", "y"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  auto config = small_config();
  config.epochs = 100;
  const DocVectors dv = train_pvdbow(encode_all(v, corpus), v, config);
  CHECK(dv.vectors.rows() == 3);
  CHECK(dv.vectors.cols() == 16);
  const VectorXd s1 = dv.vectors.row(0).transpose();
  const VectorXd s2 = dv.vectors.row(1).transpose();
  const VectorXd s3 = dv.vectors.row(2).transpose();
  CHECK(cosine(s1, s2) > cosine(s1, s3));

  const std::vector<std::size_t> like_first = v.encode({"a", "b", "c", "a"});
  const VectorXd inferred = infer_pvdbow(like_first, dv.output, v, config);
  CHECK(cosine(inferred, s1) > cosine(inferred, s3));
}
