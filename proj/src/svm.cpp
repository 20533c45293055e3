#include "motifnet/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "motifnet/errors.hpp"
#include "motifnet/random.hpp"

namespace motif {

VectorXd average_embedding(const TokenSequence& tokens, const Vocabulary& vocab,
                           const RowMatrixXd& embeddings) {
  VectorXd sum = VectorXd::Zero(embeddings.cols());
  std::size_t n = 0;
  for (const auto& tok : tokens) {
    if (auto idx = vocab.find(tok)) {
      sum += embeddings.row(static_cast<Eigen::Index>(*idx)).transpose();
      ++n;
    }
  }
  if (n == 0) throw DataError("song has no in-vocabulary tokens to average");
  return sum / static_cast<double>(n);
}

double svm_objective(const VectorXd& w, double b, const MatrixXd& x, const VectorXd& y,
                     double lambda) {
  const VectorXd margins = y.cwiseProduct((x * w).array().matrix() + VectorXd::Constant(x.rows(), b));
  const double hinge = (1.0 - margins.array()).max(0.0).sum() / static_cast<double>(x.rows());
  return 0.5 * lambda * w.squaredNorm() + hinge;
}

SvmSubgradient svm_subgradient(const VectorXd& w, double b, const MatrixXd& x, const VectorXd& y,
                               double lambda) {
  SvmSubgradient g{lambda * w, 0.0};
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double margin = y(i) * (x.row(i).dot(w) + b);
    if (margin < 1.0) {
      g.w -= inv_n * y(i) * x.row(i).transpose();
      g.b -= inv_n * y(i);
    }
  }
  return g;
}

LinearSvmModel train_linear_svm(const MatrixXd& x, std::span<const std::size_t> labels,
                                std::size_t classes, const SvmConfig& config) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw DataError("feature/label count mismatch");
  }
  if (config.lambda <= 0.0 || config.epochs == 0) {
    throw std::invalid_argument("lambda must be > 0 and epochs >= 1");
  }
  const std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("linear SVM needs at least two classes in the data");
  for (auto l : labels) {
    if (l >= classes) throw DataError("label index outside the class list");
  }

  LinearSvmModel model;
  model.lambda = config.lambda;
  model.weights = MatrixXd::Zero(static_cast<Eigen::Index>(classes), x.cols());
  model.bias = VectorXd::Zero(static_cast<Eigen::Index>(classes));
  const double radius = 1.0 / std::sqrt(config.lambda);

  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(config.seed + c);
    VectorXd w = VectorXd::Zero(x.cols());
    double b = 0.0;
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      rng.shuffle(std::span(order));
      for (auto i : order) {
        ++t;
        const double eta = 1.0 / (config.lambda * static_cast<double>(t));
        const double y = labels[i] == c ? 1.0 : -1.0;
        const auto xi = x.row(static_cast<Eigen::Index>(i));
        const double margin = y * (xi.dot(w) + b);
        w *= 1.0 - eta * config.lambda;
        if (margin < 1.0) {
          w += eta * y * xi.transpose();
          b += eta * y;
        }
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
      }
    }
    if (!w.allFinite() || !std::isfinite(b)) throw DivergenceError("SVM weights became non-finite");
    model.weights.row(static_cast<Eigen::Index>(c)) = w.transpose();
    model.bias(static_cast<Eigen::Index>(c)) = b;
  }
  return model;
}

std::size_t predict_svm(const LinearSvmModel& model, const VectorXd& x) {
  if (x.size() != model.weights.cols()) {
    throw DataError("SVM input has dimension " + std::to_string(x.size()) + ", model expects " +
                    std::to_string(model.weights.cols()));
  }
  const VectorXd scores = model.weights * x + model.bias;
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores(c) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(c);
  }
  return best;
}

}  // namespace motif
