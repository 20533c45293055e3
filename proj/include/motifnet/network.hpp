#pragma once

// Bidirectional-GRU encoder, learned-query attention and softmax classifier.
// All kernels are templates on the scalar type so the gradient checks can run
// in double precision against the exact code used for training.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motifnet/linalg.hpp"
#include "motifnet/random.hpp"

namespace motif {

struct NetworkShape {
  Eigen::Index input_dim = 150;      // embedding dimension d
  Eigen::Index hidden = 200;         // GRU units per direction H
  Eigen::Index attention_dim = 100;  // scorer width A
  Eigen::Index classes = 2;          // L

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// One GRU direction: update gate, reset gate and candidate, each with an
/// input projection (H x d), recurrent projection (H x H) and bias (H).
template <typename Scalar>
struct GruDirection {
  Matrix<Scalar> update_in, reset_in, cand_in;
  Matrix<Scalar> update_rec, reset_rec, cand_rec;
  Vector<Scalar> update_bias, reset_bias, cand_bias;

  static GruDirection zeros(Eigen::Index input_dim, Eigen::Index hidden) {
    GruDirection g;
    for (auto* m : {&g.update_in, &g.reset_in, &g.cand_in}) m->setZero(hidden, input_dim);
    for (auto* m : {&g.update_rec, &g.reset_rec, &g.cand_rec}) m->setZero(hidden, hidden);
    for (auto* v : {&g.update_bias, &g.reset_bias, &g.cand_bias}) v->setZero(hidden);
    return g;
  }

  Eigen::Index hidden() const { return update_rec.rows(); }
};

template <typename Scalar>
struct GruParams {
  GruDirection<Scalar> forward;
  GruDirection<Scalar> backward;
};

/// Scorer e_j = query . tanh(proj * h_j + proj_bias).
template <typename Scalar>
struct AttentionParams {
  Matrix<Scalar> proj;       // A x 2H
  Vector<Scalar> proj_bias;  // A
  Vector<Scalar> query;      // A
};

template <typename Scalar>
struct ClassifierParams {
  Matrix<Scalar> weight;  // L x 2H
  Vector<Scalar> bias;    // L
};

template <typename Scalar>
struct NetworkParams {
  GruParams<Scalar> gru;
  AttentionParams<Scalar> attention;
  ClassifierParams<Scalar> classifier;

  static NetworkParams zeros(const NetworkShape& s) {
    NetworkParams p;
    p.gru.forward = GruDirection<Scalar>::zeros(s.input_dim, s.hidden);
    p.gru.backward = GruDirection<Scalar>::zeros(s.input_dim, s.hidden);
    p.attention.proj.setZero(s.attention_dim, 2 * s.hidden);
    p.attention.proj_bias.setZero(s.attention_dim);
    p.attention.query.setZero(s.attention_dim);
    p.classifier.weight.setZero(s.classes, 2 * s.hidden);
    p.classifier.bias.setZero(s.classes);
    return p;
  }

  NetworkShape shape() const {
    return {gru.forward.update_in.cols(), gru.forward.hidden(), attention.proj.rows(),
            classifier.weight.rows()};
  }

  /// Calls f(name, tensor) for every parameter tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    visit_direction("gru.forward.", gru.forward, f);
    visit_direction("gru.backward.", gru.backward, f);
    f("attention.proj", attention.proj);
    f("attention.proj_bias", attention.proj_bias);
    f("attention.query", attention.query);
    f("classifier.weight", classifier.weight);
    f("classifier.bias", classifier.bias);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<NetworkParams*>(this)->for_each_tensor(
        [&](std::string_view name, const auto& t) { f(name, t); });
  }

  /// Flat views over every tensor, in for_each_tensor order.
  std::vector<Eigen::Map<Matrix<Scalar>>> views() {
    std::vector<Eigen::Map<Matrix<Scalar>>> out;
    for_each_tensor([&](std::string_view, auto& t) {
      out.emplace_back(t.data(), t.rows(), t.cols());
    });
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_tensor([&](std::string_view, const auto& t) { n += t.size(); });
    return n;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for_each_tensor([&](std::string_view, const auto& t) { s += t.squaredNorm(); });
    return s;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](std::string_view, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  void scale(Scalar factor) {
    for_each_tensor([&](std::string_view, auto& t) { t *= factor; });
  }

  /// this += factor * other
  void add_scaled(const NetworkParams& other, Scalar factor) {
    auto dst = views();
    auto src = const_cast<NetworkParams&>(other).views();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
  }

 private:
  template <typename F>
  static void visit_direction(const std::string& prefix, GruDirection<Scalar>& d, F& f) {
    f(prefix + "update_in", d.update_in);
    f(prefix + "reset_in", d.reset_in);
    f(prefix + "cand_in", d.cand_in);
    f(prefix + "update_rec", d.update_rec);
    f(prefix + "reset_rec", d.reset_rec);
    f(prefix + "cand_rec", d.cand_rec);
    f(prefix + "update_bias", d.update_bias);
    f(prefix + "reset_bias", d.reset_bias);
    f(prefix + "cand_bias", d.cand_bias);
  }
};

/// Glorot-uniform matrices (the query counts as an A x 1 matrix), zero biases.
template <typename Scalar>
NetworkParams<Scalar> glorot_init(const NetworkShape& shape, Rng& rng) {
  auto p = NetworkParams<Scalar>::zeros(shape);
  auto fill = [&](auto& m, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(rng.uniform(-limit, limit));
  };
  for (auto* dir : {&p.gru.forward, &p.gru.backward}) {
    for (auto* m : {&dir->update_in, &dir->reset_in, &dir->cand_in, &dir->update_rec,
                    &dir->reset_rec, &dir->cand_rec}) {
      fill(*m, double(m->cols()), double(m->rows()));
    }
  }
  fill(p.attention.proj, double(p.attention.proj.cols()), double(p.attention.proj.rows()));
  fill(p.attention.query, double(p.attention.query.size()), 1.0);
  fill(p.classifier.weight, double(p.classifier.weight.cols()), double(p.classifier.weight.rows()));
  return p;
}

namespace detail {

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

}  // namespace detail

/// Softmax with max subtraction.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// One GRU update:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   c = tanh(Wc x + Uc (r .* h) + bc), h' = (1 - z) .* h + z .* c.
template <typename Scalar, typename X, typename H>
Vector<Scalar> gru_step(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<H>& h_prev,
                        const GruDirection<Scalar>& p) {
  const Vector<Scalar> z = detail::logistic(
      (p.update_in * x + p.update_rec * h_prev + p.update_bias).eval());
  const Vector<Scalar> r = detail::logistic(
      (p.reset_in * x + p.reset_rec * h_prev + p.reset_bias).eval());
  const Vector<Scalar> c =
      (p.cand_in * x + p.cand_rec * r.cwiseProduct(h_prev) + p.cand_bias).array().tanh().matrix();
  return h_prev + z.cwiseProduct(c - h_prev);
}

/// Per-position activations of one direction (column j = sequence position j).
template <typename Scalar>
struct DirectionTrace {
  Matrix<Scalar> h_prev, update, reset, cand, state;
};

template <typename Scalar>
DirectionTrace<Scalar> run_direction(const Matrix<Scalar>& inputs, const GruDirection<Scalar>& p,
                                     bool reverse) {
  const Eigen::Index steps = inputs.cols();
  const Eigen::Index hidden = p.hidden();
  DirectionTrace<Scalar> t;
  // Input projections for all positions at once.
  Matrix<Scalar> pre_z = (p.update_in * inputs).colwise() + p.update_bias;
  Matrix<Scalar> pre_r = (p.reset_in * inputs).colwise() + p.reset_bias;
  Matrix<Scalar> pre_c = (p.cand_in * inputs).colwise() + p.cand_bias;
  t.h_prev.resize(hidden, steps);
  t.update.resize(hidden, steps);
  t.reset.resize(hidden, steps);
  t.cand.resize(hidden, steps);
  t.state.resize(hidden, steps);
  Vector<Scalar> h = Vector<Scalar>::Zero(hidden);
  Vector<Scalar> z(hidden), r(hidden), c(hidden);
  for (Eigen::Index step = 0; step < steps; ++step) {
    const Eigen::Index j = reverse ? steps - 1 - step : step;
    t.h_prev.col(j) = h;
    z = detail::logistic((pre_z.col(j) + p.update_rec * h).eval());
    r = detail::logistic((pre_r.col(j) + p.reset_rec * h).eval());
    c = (pre_c.col(j) + p.cand_rec * r.cwiseProduct(h)).array().tanh().matrix();
    h += z.cwiseProduct(c - h);
    t.update.col(j) = z;
    t.reset.col(j) = r;
    t.cand.col(j) = c;
    t.state.col(j) = h;
  }
  return t;
}

/// Annotations: column j stacks the forward and backward states at j (2H x T).
template <typename Scalar>
Matrix<Scalar> bgru_encode(const Matrix<Scalar>& inputs, const GruParams<Scalar>& p) {
  const auto f = run_direction(inputs, p.forward, false);
  const auto b = run_direction(inputs, p.backward, true);
  Matrix<Scalar> ann(2 * p.forward.hidden(), inputs.cols());
  ann.topRows(p.forward.hidden()) = f.state;
  ann.bottomRows(p.backward.hidden()) = b.state;
  return ann;
}

template <typename Scalar>
struct Attended {
  Vector<Scalar> context;  // 2H
  Vector<Scalar> weights;  // T, non-negative, sums to 1
  Vector<Scalar> energies;
  Matrix<Scalar> hidden;   // tanh(proj * h_j + proj_bias), A x T
};

template <typename Scalar>
Attended<Scalar> attend(const Matrix<Scalar>& annotations, const AttentionParams<Scalar>& p) {
  Attended<Scalar> out;
  out.hidden = ((p.proj * annotations).colwise() + p.proj_bias).array().tanh().matrix();
  out.energies = out.hidden.transpose() * p.query;
  out.weights = softmax(out.energies);
  out.context = annotations * out.weights;
  return out;
}

template <typename Scalar>
struct ForwardTrace {
  Matrix<Scalar> inputs;  // d x T
  DirectionTrace<Scalar> forward, backward;
  Matrix<Scalar> annotations;
  Attended<Scalar> attended;
  Vector<Scalar> probs;
  Scalar loss{};
  Eigen::Index label = 0;
};

/// Full forward pass with the negative log-likelihood of `label`.
template <typename Scalar>
ForwardTrace<Scalar> forward_pass(const Matrix<Scalar>& inputs, Eigen::Index label,
                                  const NetworkParams<Scalar>& p) {
  ForwardTrace<Scalar> t;
  t.inputs = inputs;
  t.label = label;
  t.forward = run_direction(inputs, p.gru.forward, false);
  t.backward = run_direction(inputs, p.gru.backward, true);
  const Eigen::Index hidden = p.gru.forward.hidden();
  t.annotations.resize(2 * hidden, inputs.cols());
  t.annotations.topRows(hidden) = t.forward.state;
  t.annotations.bottomRows(hidden) = t.backward.state;
  t.attended = attend(t.annotations, p.attention);
  t.probs = softmax((p.classifier.weight * t.attended.context + p.classifier.bias).eval());
  // -log softmax computed from logits to stay finite when probs underflow.
  const Vector<Scalar> logits = p.classifier.weight * t.attended.context + p.classifier.bias;
  const Scalar max_logit = logits.maxCoeff();
  const Scalar log_norm = max_logit + std::log((logits.array() - max_logit).exp().sum());
  t.loss = log_norm - logits(label);
  return t;
}

template <typename Scalar>
struct BackwardResult {
  NetworkParams<Scalar> grads;
  Vector<Scalar> energy_grad;  // dLoss/de_j
};

namespace detail {

// Backpropagation through time for one direction. `upstream` holds dLoss/dh_j
// from the attention layer; gradients accumulate into `g`.
template <typename Scalar>
void backprop_direction(const DirectionTrace<Scalar>& t, const Matrix<Scalar>& inputs,
                        const Matrix<Scalar>& upstream, const GruDirection<Scalar>& p,
                        bool reverse, GruDirection<Scalar>& g) {
  const Eigen::Index steps = inputs.cols();
  const Eigen::Index hidden = p.hidden();
  Matrix<Scalar> d_pre_z(hidden, steps), d_pre_r(hidden, steps), d_pre_c(hidden, steps);
  Vector<Scalar> carry = Vector<Scalar>::Zero(hidden);
  Vector<Scalar> dh(hidden), dz(hidden), dc(hidden), tmp(hidden), dr(hidden);
  for (Eigen::Index step = steps - 1; step >= 0; --step) {
    const Eigen::Index j = reverse ? steps - 1 - step : step;
    const auto hp = t.h_prev.col(j);
    const auto z = t.update.col(j);
    const auto r = t.reset.col(j);
    const auto c = t.cand.col(j);
    dh = upstream.col(j) + carry;
    dc = dh.cwiseProduct(z);
    dz = dh.cwiseProduct(c - hp);
    carry = dh.cwiseProduct(Vector<Scalar>::Ones(hidden) - z);

    d_pre_c.col(j) = dc.array() * (Scalar(1) - c.array().square());
    tmp.noalias() = p.cand_rec.transpose() * d_pre_c.col(j);
    dr = tmp.cwiseProduct(hp);
    carry += tmp.cwiseProduct(r);

    d_pre_z.col(j) = dz.array() * z.array() * (Scalar(1) - z.array());
    carry.noalias() += p.update_rec.transpose() * d_pre_z.col(j);

    d_pre_r.col(j) = dr.array() * r.array() * (Scalar(1) - r.array());
    carry.noalias() += p.reset_rec.transpose() * d_pre_r.col(j);
  }
  g.update_in.noalias() += d_pre_z * inputs.transpose();
  g.reset_in.noalias() += d_pre_r * inputs.transpose();
  g.cand_in.noalias() += d_pre_c * inputs.transpose();
  g.update_rec.noalias() += d_pre_z * t.h_prev.transpose();
  g.reset_rec.noalias() += d_pre_r * t.h_prev.transpose();
  g.cand_rec.noalias() += d_pre_c * t.reset.cwiseProduct(t.h_prev).transpose();
  g.update_bias += d_pre_z.rowwise().sum();
  g.reset_bias += d_pre_r.rowwise().sum();
  g.cand_bias += d_pre_c.rowwise().sum();
}

}  // namespace detail

/// Exact gradient of the trace's loss w.r.t. every network parameter. Inputs
/// (the embeddings) receive no gradient.
template <typename Scalar>
BackwardResult<Scalar> backward_pass(const ForwardTrace<Scalar>& t, const NetworkParams<Scalar>& p) {
  BackwardResult<Scalar> out;
  out.grads = NetworkParams<Scalar>::zeros(p.shape());
  auto& g = out.grads;
  const auto& att = t.attended;

  // Output layer.
  Vector<Scalar> d_logits = t.probs;
  d_logits(t.label) -= Scalar(1);
  g.classifier.weight.noalias() = d_logits * att.context.transpose();
  g.classifier.bias = d_logits;
  const Vector<Scalar> d_context = p.classifier.weight.transpose() * d_logits;

  // Attention: c = H a, a = softmax(e), e_j = q . tanh(P h_j + b).
  Matrix<Scalar> d_ann = d_context * att.weights.transpose();
  const Vector<Scalar> d_weights = t.annotations.transpose() * d_context;
  const Scalar mean = att.weights.dot(d_weights);
  out.energy_grad = att.weights.array() * (d_weights.array() - mean);
  g.attention.query.noalias() = att.hidden * out.energy_grad;
  const Matrix<Scalar> d_pre =
      (p.attention.query * out.energy_grad.transpose()).array() *
      (Scalar(1) - att.hidden.array().square());
  g.attention.proj.noalias() = d_pre * t.annotations.transpose();
  g.attention.proj_bias = d_pre.rowwise().sum();
  d_ann.noalias() += p.attention.proj.transpose() * d_pre;

  // Encoder.
  const Eigen::Index hidden = p.gru.forward.hidden();
  const Matrix<Scalar> up_f = d_ann.topRows(hidden);
  const Matrix<Scalar> up_b = d_ann.bottomRows(hidden);
  detail::backprop_direction(t.forward, t.inputs, up_f, p.gru.forward, false, g.gru.forward);
  detail::backprop_direction(t.backward, t.inputs, up_b, p.gru.backward, true, g.gru.backward);
  return out;
}

}  // namespace motif
