#include "motifnet/skipgram.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

#include "motifnet/errors.hpp"
#include "motifnet/random.hpp"

namespace motif {

namespace {

void check_config(const SkipGramConfig& config) {
  if (config.dim == 0) throw std::invalid_argument("embedding dim must be >= 1");
  if (config.window == 0) throw std::invalid_argument("window must be >= 1");
  if (config.negatives == 0 || config.negatives > kMaxNegatives) {
    throw std::invalid_argument("negatives must be in 1.." + std::to_string(kMaxNegatives));
  }
  if (config.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
}

RowMatrixXd uniform_init(std::size_t rows, std::size_t dim, Rng& rng) {
  const double half = 0.5 / static_cast<double>(dim);
  RowMatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-half, half);
  }
  return m;
}

std::size_t total_positions(const std::vector<std::vector<std::size_t>>& corpus) {
  std::size_t n = 0;
  for (const auto& s : corpus) n += s.size();
  return n;
}

double learning_rate(const SkipGramConfig& c, double progress) {
  return std::max(c.lr_end, c.lr_start - (c.lr_start - c.lr_end) * progress);
}

// Fills `out` with k negatives, skipping draws equal to `positive`. With a
// single-token vocabulary no valid negative exists and `out` stays short.
void draw_negatives(const SamplingDist& dist, Rng& rng, std::size_t positive, std::size_t k,
                    std::vector<std::size_t>& out) {
  out.clear();
  if (dist.size() < 2) return;
  while (out.size() < k) {
    const std::size_t n = dist.draw(rng);
    if (n != positive) out.push_back(n);
  }
}

struct WorkerStats {
  double objective = 0.0;
  std::size_t pairs = 0;
};

// Runs skip-gram over songs [begin, end) for one epoch.
void skipgram_epoch(const std::vector<std::vector<std::size_t>>& corpus, std::size_t begin,
                    std::size_t end, EmbeddingMatrix<double>& emb, const SamplingDist& dist,
                    const SkipGramConfig& config, Rng& rng, std::atomic<std::size_t>& processed,
                    std::size_t total, WorkerStats& stats) {
  VectorXd scratch(emb.dim());
  std::vector<std::size_t> negatives;
  negatives.reserve(config.negatives);
  for (std::size_t s = begin; s < end; ++s) {
    const auto& song = corpus[s];
    const double lr = learning_rate(
        config, static_cast<double>(processed.load(std::memory_order_relaxed)) /
                    static_cast<double>(total));
    for (std::size_t i = 0; i < song.size(); ++i) {
      const std::size_t span =
          config.shrink_window ? 1 + rng.index(config.window) : config.window;
      const std::size_t lo = i >= span ? i - span : 0;
      const std::size_t hi = std::min(song.size() - 1, i + span);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        draw_negatives(dist, rng, song[j], config.negatives, negatives);
        const double obj = sgns_update<double>(emb.input.row(static_cast<Eigen::Index>(song[i])),
                                               emb.output, song[j], negatives, lr, scratch);
        stats.objective += obj;
        ++stats.pairs;
      }
    }
    processed.fetch_add(song.size(), std::memory_order_relaxed);
  }
}

}  // namespace

EmbeddingMatrix<double> train_skipgram(const std::vector<std::vector<std::size_t>>& corpus,
                                       const Vocabulary& vocab, const SkipGramConfig& config,
                                       TrainingLog* log, EpochCallback on_epoch) {
  check_config(config);
  const std::size_t positions = total_positions(corpus);
  if (positions == 0) throw DataError("skip-gram corpus has no in-vocabulary tokens");
  for (const auto& song : corpus) {
    for (auto id : song) {
      if (id >= vocab.size()) throw DataError("token index outside the vocabulary");
    }
  }

  Rng init_rng(config.seed);
  EmbeddingMatrix<double> emb;
  emb.input = uniform_init(vocab.size(), config.dim, init_rng);
  emb.output = RowMatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()),
                                 static_cast<Eigen::Index>(config.dim));
  const SamplingDist dist(vocab, config.power);

  const std::size_t workers = config.deterministic ? 1 : std::max<std::size_t>(1, config.threads);
  std::vector<Rng> rngs;
  for (std::size_t w = 0; w < workers; ++w) rngs.emplace_back(config.seed * 7919 + 17 + w);

  const std::size_t total = positions * config.epochs;
  std::atomic<std::size_t> processed{0};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<WorkerStats> stats(workers);
    if (workers == 1) {
      skipgram_epoch(corpus, 0, corpus.size(), emb, dist, config, rngs[0], processed, total,
                     stats[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = corpus.size() * w / workers;
        const std::size_t end = corpus.size() * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
          skipgram_epoch(corpus, begin, end, emb, dist, config, rngs[w], processed, total,
                         stats[w]);
        });
      }
      for (auto& t : pool) t.join();
    }
    WorkerStats sum;
    for (const auto& s : stats) {
      sum.objective += s.objective;
      sum.pairs += s.pairs;
    }
    const double mean = sum.pairs ? sum.objective / static_cast<double>(sum.pairs) : 0.0;
    if (!std::isfinite(mean) || !emb.input.allFinite() || !emb.output.allFinite()) {
      throw DivergenceError("skip-gram objective became non-finite in epoch " +
                            std::to_string(epoch + 1) + "; lower the learning rate");
    }
    if (log) log->epoch_objective.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return emb;
}

double pvdbow_objective(const VectorXd& doc, const RowMatrixXd& output,
                        std::span<const std::size_t> tokens,
                        const std::vector<std::vector<std::size_t>>& negatives) {
  double obj = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    obj += log_sigmoid(output.row(static_cast<Eigen::Index>(tokens[t])).dot(doc));
    for (auto n : negatives[t]) {
      obj += log_sigmoid(-output.row(static_cast<Eigen::Index>(n)).dot(doc));
    }
  }
  return obj;
}

PvdbowGradient pvdbow_gradient(const VectorXd& doc, const RowMatrixXd& output,
                               std::span<const std::size_t> tokens,
                               const std::vector<std::vector<std::size_t>>& negatives) {
  PvdbowGradient g;
  g.objective = pvdbow_objective(doc, output, tokens, negatives);
  g.doc = VectorXd::Zero(doc.size());
  g.output = RowMatrixXd::Zero(output.rows(), output.cols());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto c = static_cast<Eigen::Index>(tokens[t]);
    const double pos = 1.0 - sigmoid(output.row(c).dot(doc));
    g.doc += pos * output.row(c).transpose();
    g.output.row(c) += pos * doc.transpose();
    for (auto n : negatives[t]) {
      const auto r = static_cast<Eigen::Index>(n);
      const double neg = -sigmoid(output.row(r).dot(doc));
      g.doc += neg * output.row(r).transpose();
      g.output.row(r) += neg * doc.transpose();
    }
  }
  return g;
}

DocVectors train_pvdbow(const std::vector<std::vector<std::size_t>>& corpus,
                        const Vocabulary& vocab, const SkipGramConfig& config, TrainingLog* log) {
  check_config(config);
  const std::size_t positions = total_positions(corpus);
  if (positions == 0) throw DataError("PV-DBOW corpus has no in-vocabulary tokens");

  Rng rng(config.seed);
  DocVectors dv;
  dv.vectors = uniform_init(corpus.size(), config.dim, rng);
  dv.output = RowMatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()),
                                static_cast<Eigen::Index>(config.dim));
  const SamplingDist dist(vocab, config.power);
  VectorXd scratch(static_cast<Eigen::Index>(config.dim));
  std::vector<std::size_t> negatives;

  const double total = static_cast<double>(positions * config.epochs);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double objective = 0.0;
    std::size_t pairs = 0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const double lr = learning_rate(config, static_cast<double>(processed) / total);
      for (auto token : corpus[d]) {
        draw_negatives(dist, rng, token, config.negatives, negatives);
        objective += sgns_update<double>(dv.vectors.row(static_cast<Eigen::Index>(d)), dv.output,
                                         token, negatives, lr, scratch);
        ++pairs;
      }
      processed += corpus[d].size();
    }
    const double mean = objective / static_cast<double>(std::max<std::size_t>(pairs, 1));
    if (!std::isfinite(mean) || !dv.vectors.allFinite()) {
      throw DivergenceError("PV-DBOW objective became non-finite in epoch " +
                            std::to_string(epoch + 1));
    }
    if (log) log->epoch_objective.push_back(mean);
  }
  return dv;
}

VectorXd infer_pvdbow(std::span<const std::size_t> tokens, const RowMatrixXd& output,
                      const Vocabulary& vocab, const SkipGramConfig& config) {
  check_config(config);
  if (tokens.empty()) throw DataError("cannot infer a document vector without tokens");
  Rng rng(config.seed);
  RowMatrixXd doc = uniform_init(1, config.dim, rng);
  RowMatrixXd frozen = output;
  const SamplingDist dist(vocab, config.power);
  VectorXd scratch(static_cast<Eigen::Index>(config.dim));
  std::vector<std::size_t> negatives;
  const double total = static_cast<double>(tokens.size() * config.epochs);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (auto token : tokens) {
      const double lr = learning_rate(config, static_cast<double>(processed++) / total);
      draw_negatives(dist, rng, token, config.negatives, negatives);
      sgns_update<double, false>(doc.row(0), frozen, token, negatives, lr, scratch);
    }
  }
  return doc.row(0).transpose();
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<Neighbor> most_similar(const KeyedVectors& vectors, std::string_view token,
                                   std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  const auto query = vectors.find(token);
  if (!query) {
    std::vector<std::pair<std::size_t, std::size_t>> close;  // (distance, row)
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const std::size_t d = edit_distance(token, vectors.keys[i]);
      if (d <= 2) close.emplace_back(d, i);
    }
    std::sort(close.begin(), close.end());
    std::string msg = "unknown token '" + std::string(token) + "'";
    if (!close.empty()) {
      msg += "; did you mean:";
      for (std::size_t i = 0; i < std::min<std::size_t>(close.size(), 5); ++i) {
        msg += " " + vectors.keys[close[i].second];
      }
    }
    throw DataError(msg);
  }
  const auto q = vectors.vectors.row(static_cast<Eigen::Index>(*query));
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (i == *query) continue;
    const auto row = vectors.vectors.row(static_cast<Eigen::Index>(i));
    const double c = row.norm() == 0.0 ? 0.0 : cosine(q, row);
    scored.emplace_back(c, i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
    out.push_back({vectors.keys[scored[i].second], scored[i].first});
  }
  return out;
}

KeyedVectors to_keyed(const Vocabulary& vocab, const RowMatrixXd& rows) {
  return {vocab.tokens(), rows};
}

}  // namespace motif
