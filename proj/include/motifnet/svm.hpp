#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motifnet/linalg.hpp"
#include "motifnet/vocabulary.hpp"

namespace motif {

/// Unweighted mean of the embedding rows of the in-vocabulary tokens.
/// Throws DataError when no token is in the vocabulary.
VectorXd average_embedding(const TokenSequence& tokens, const Vocabulary& vocab,
                           const RowMatrixXd& embeddings);

struct SvmConfig {
  double lambda = 0.01;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear SVM; row c of `weights` scores class c.
struct LinearSvmModel {
  MatrixXd weights;  // L x d
  VectorXd bias;     // L
  double lambda = 0.01;

  std::size_t classes() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

/// Binary objective lambda/2 |w|^2 + mean_i max(0, 1 - y_i (w . x_i + b)),
/// y in {-1, +1}; rows of `x` are examples.
double svm_objective(const VectorXd& w, double b, const MatrixXd& x, const VectorXd& y,
                     double lambda);

struct SvmSubgradient {
  VectorXd w;
  double b = 0.0;
};

/// Subgradient of svm_objective (the gradient wherever no margin equals 1).
SvmSubgradient svm_subgradient(const VectorXd& w, double b, const MatrixXd& x, const VectorXd& y,
                               double lambda);

/// Pegasos: step 1/(lambda t), one pass over a seeded permutation per epoch,
/// projection onto the 1/sqrt(lambda) ball. The bias is unregularized.
/// Throws DataError when fewer than two classes are present.
LinearSvmModel train_linear_svm(const MatrixXd& x, std::span<const std::size_t> labels,
                                std::size_t classes, const SvmConfig& config);

/// Argmax of w_c . x + b_c, lowest index on ties.
std::size_t predict_svm(const LinearSvmModel& model, const VectorXd& x);

}  // namespace motif
