#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motifnet/errors.hpp"
#include "motifnet/linalg.hpp"
#include "motifnet/text_io.hpp"
#include "motifnet/vocabulary.hpp"

namespace motif {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

/// Input (target) and output (context) embedding tables.
template <typename Scalar = double>
struct EmbeddingMatrix {
  RowMatrix<Scalar> input;
  RowMatrix<Scalar> output;

  Eigen::Index rows() const noexcept { return input.rows(); }
  Eigen::Index dim() const noexcept { return input.cols(); }
};

/// Negative-sampling objective of one (target, context) pair:
/// log sigma(c . w) + sum_i log sigma(-n_i . w). Rows of `negatives` are n_i.
template <typename W, typename C, typename N>
typename W::Scalar sgns_objective(const Eigen::MatrixBase<W>& w, const Eigen::MatrixBase<C>& c,
                                  const Eigen::MatrixBase<N>& negatives) {
  using Scalar = typename W::Scalar;
  Scalar obj = log_sigmoid<Scalar>(c.dot(w));
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) {
    obj += log_sigmoid<Scalar>(-negatives.row(i).dot(w.transpose()));
  }
  return obj;
}

template <typename Scalar>
struct SgnsGradient {
  Scalar objective{};
  Vector<Scalar> target;
  Vector<Scalar> context;
  RowMatrix<Scalar> negatives;
};

/// Gradient of sgns_objective (ascent direction) w.r.t. target, context and
/// every negative row.
template <typename W, typename C, typename N>
SgnsGradient<typename W::Scalar> sgns_gradient(const Eigen::MatrixBase<W>& w,
                                               const Eigen::MatrixBase<C>& c,
                                               const Eigen::MatrixBase<N>& negatives) {
  using Scalar = typename W::Scalar;
  SgnsGradient<Scalar> g;
  g.objective = sgns_objective(w, c, negatives);
  const Scalar pos = Scalar(1) - sigmoid<Scalar>(c.dot(w));
  g.target = pos * c;
  g.context = pos * w;
  g.negatives.resize(negatives.rows(), negatives.cols());
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) {
    const Scalar neg = -sigmoid<Scalar>(negatives.row(i).dot(w.transpose()));
    g.target += neg * negatives.row(i).transpose();
    g.negatives.row(i) = neg * w.transpose();
  }
  return g;
}

/// In-place SGD ascent on one pair: rows of `output` at `context` and
/// `negatives` move by lr * gradient, as does `target` (a row of the input or
/// document table). Gradients are evaluated at the pre-update point, so
/// repeated negative indices accumulate. Returns the pre-update objective.
/// With UpdateOutput false only the target moves.
template <typename Scalar, bool UpdateOutput = true, typename TargetRow>
Scalar sgns_update(TargetRow&& target, RowMatrix<Scalar>& output, std::size_t context,
                   std::span<const std::size_t> negatives, Scalar lr, Vector<Scalar>& scratch) {
  const auto ctx = static_cast<Eigen::Index>(context);
  scratch.setZero(target.size());
  const Scalar pos_dot = output.row(ctx).dot(target);
  Scalar objective = log_sigmoid<Scalar>(pos_dot);
  const Scalar pos = lr * (Scalar(1) - sigmoid<Scalar>(pos_dot));
  scratch.noalias() += pos * output.row(ctx).transpose();
  // Negative-row updates use the pre-update target; collect the scales first.
  Scalar neg_scale[64];
  const std::size_t k = negatives.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = static_cast<Eigen::Index>(negatives[i]);
    const Scalar d = output.row(row).dot(target);
    objective += log_sigmoid<Scalar>(-d);
    neg_scale[i] = -lr * sigmoid<Scalar>(d);
    scratch.noalias() += neg_scale[i] * output.row(row).transpose();
  }
  if constexpr (UpdateOutput) {
    output.row(ctx) += pos * target.transpose();
    for (std::size_t i = 0; i < k; ++i) {
      output.row(static_cast<Eigen::Index>(negatives[i])) += neg_scale[i] * target.transpose();
    }
  }
  target += scratch;
  return objective;
}

inline constexpr std::size_t kMaxNegatives = 64;

struct SkipGramConfig {
  std::size_t dim = 150;
  std::size_t window = 4;
  std::size_t negatives = 5;
  std::size_t epochs = 10;
  std::size_t min_count = 1;
  double power = 0.75;
  double lr_start = 0.025;
  double lr_end = 0.0001;
  /// Draw the effective window uniformly from 1..window per target position.
  bool shrink_window = true;
  std::uint64_t seed = 0;
  /// Single worker with a fixed draw order; bit-reproducible.
  bool deterministic = true;
  /// Lock-free (Hogwild) workers when not deterministic.
  std::size_t threads = 1;
};

struct TrainingLog {
  /// Mean per-pair objective of each epoch (higher is better).
  std::vector<double> epoch_objective;
};

using EpochCallback = std::function<void(std::size_t epoch, double objective)>;

/// Skip-gram with negative sampling over index-encoded songs. Throws
/// DivergenceError on a non-finite objective.
EmbeddingMatrix<double> train_skipgram(const std::vector<std::vector<std::size_t>>& corpus,
                                       const Vocabulary& vocab, const SkipGramConfig& config,
                                       TrainingLog* log = nullptr, EpochCallback on_epoch = {});

/// PV-DBOW: document vectors trained to predict each document's tokens with the
/// same negative-sampling objective, sharing one output table.
struct DocVectors {
  RowMatrixXd vectors;  // one row per document
  RowMatrixXd output;   // V x d
};

/// Sum of per-token negative-sampling objectives for one document vector:
/// sum_t [log sigma(o_{c_t} . doc) + sum_i log sigma(-o_{n_ti} . doc)].
double pvdbow_objective(const VectorXd& doc, const RowMatrixXd& output,
                        std::span<const std::size_t> tokens,
                        const std::vector<std::vector<std::size_t>>& negatives);

struct PvdbowGradient {
  double objective = 0.0;
  VectorXd doc;
  RowMatrixXd output;  // dense V x d gradient
};

PvdbowGradient pvdbow_gradient(const VectorXd& doc, const RowMatrixXd& output,
                               std::span<const std::size_t> tokens,
                               const std::vector<std::vector<std::size_t>>& negatives);

DocVectors train_pvdbow(const std::vector<std::vector<std::size_t>>& corpus,
                        const Vocabulary& vocab, const SkipGramConfig& config,
                        TrainingLog* log = nullptr);

/// Fits a fresh document vector against a frozen output table.
VectorXd infer_pvdbow(std::span<const std::size_t> tokens, const RowMatrixXd& output,
                      const Vocabulary& vocab, const SkipGramConfig& config);

/// a . b / (|a| |b|). Throws DataError for a zero vector.
template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw DataError("cosine of a zero vector");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

struct Neighbor {
  std::string token;
  double cosine = 0.0;
};

/// Top-k rows by cosine to `token`, excluding the token itself; ties by row
/// order. Unknown tokens raise DataError naming close spellings (edit
/// distance <= 2).
std::vector<Neighbor> most_similar(const KeyedVectors& vectors, std::string_view token,
                                   std::size_t k);

std::size_t edit_distance(std::string_view a, std::string_view b);

KeyedVectors to_keyed(const Vocabulary& vocab, const RowMatrixXd& rows);

}  // namespace motif
