#include "motifnet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "motifnet/errors.hpp"
#include "motifnet/text_io.hpp"

namespace motif {

EncodedSong encode_song(const TokenSequence& tokens, const Vocabulary& vocab, std::size_t label) {
  EncodedSong song;
  song.label = label;
  song.ids = vocab.encode(tokens);
  if (song.ids.size() > kMaxSongLength) song.ids.resize(kMaxSongLength);
  return song;
}

SongInput song_input(const EncodedSong& song, const RowMatrixXd& embeddings) {
  if (song.ids.empty()) throw DataError("untokenizable song");
  SongInput in;
  in.label = song.label;
  in.inputs.resize(embeddings.cols(), static_cast<Eigen::Index>(song.ids.size()));
  for (std::size_t j = 0; j < song.ids.size(); ++j) {
    in.inputs.col(static_cast<Eigen::Index>(j)) =
        embeddings.row(static_cast<Eigen::Index>(song.ids[j])).transpose();
  }
  return in;
}

namespace {

void check_label(std::size_t label, std::size_t classes) {
  if (label >= classes) throw DataError("label index outside the class list");
}

// Sum of per-song gradients and losses over songs[indices[begin..end)].
struct Accumulated {
  NetworkParams<double> grads;
  double loss = 0.0;
};

Accumulated accumulate(const NetworkParams<double>& params, std::span<const EncodedSong> songs,
                       std::span<const std::size_t> indices, const RowMatrixXd& embeddings) {
  Accumulated acc{NetworkParams<double>::zeros(params.shape()), 0.0};
  for (auto idx : indices) {
    const SongInput in = song_input(songs[idx], embeddings);
    const auto trace = forward_pass(in.inputs, static_cast<Eigen::Index>(in.label), params);
    const auto back = backward_pass(trace, params);
    acc.loss += trace.loss;
    acc.grads.add_scaled(back.grads, 1.0);
  }
  return acc;
}

}  // namespace

double mean_loss(const AttentionModel& model, std::span<const EncodedSong> songs,
                 const RowMatrixXd& embeddings) {
  if (songs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : songs) {
    check_label(s.label, model.labels.size());
    const SongInput in = song_input(s, embeddings);
    total += forward_pass(in.inputs, static_cast<Eigen::Index>(in.label), model.params).loss;
  }
  return total / static_cast<double>(songs.size());
}

AttentionModel train_classifier(std::span<const EncodedSong> songs, const RowMatrixXd& embeddings,
                                std::vector<std::string> labels, const ClassifierConfig& config,
                                ClassifierLog* log, ClassifierEpochCallback on_epoch) {
  if (songs.empty()) throw DataError("empty training set");
  if (labels.size() < 2) throw DataError("classifier needs at least two classes");
  if (config.batch_size == 0 || config.epochs == 0) {
    throw std::invalid_argument("batch size and epochs must be >= 1");
  }
  for (const auto& s : songs) {
    check_label(s.label, labels.size());
    if (s.ids.empty()) throw DataError("untokenizable song in training set");
  }

  Rng rng(config.seed);
  AttentionModel model;
  model.shape = {embeddings.cols(), config.hidden, config.attention_dim,
                 static_cast<Eigen::Index>(labels.size())};
  model.params = glorot_init<double>(model.shape, rng);
  model.labels = std::move(labels);

  // Optional validation hold-out: the last fraction of a seeded permutation.
  std::vector<std::size_t> order(songs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EncodedSong> validation;
  if (config.validation_fraction > 0.0) {
    rng.shuffle(std::span(order));
    const auto held = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(songs.size())));
    if (held == 0 || held >= songs.size()) {
      throw std::invalid_argument("validation fraction leaves an empty train or validation set");
    }
    for (std::size_t i = songs.size() - held; i < songs.size(); ++i) validation.push_back(songs[order[i]]);
    order.resize(songs.size() - held);
    std::sort(order.begin(), order.end());
  }

  const std::size_t workers = std::max<std::size_t>(1, config.threads);
  std::optional<NetworkParams<double>> best;
  double best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);

      Accumulated total{NetworkParams<double>::zeros(model.shape), 0.0};
      const std::size_t chunks = std::min(workers, batch.size());
      if (chunks <= 1) {
        total = accumulate(model.params, songs, batch, embeddings);
      } else {
        std::vector<Accumulated> parts(chunks);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < chunks; ++w) {
          const std::size_t lo = batch.size() * w / chunks;
          const std::size_t hi = batch.size() * (w + 1) / chunks;
          pool.emplace_back([&, w, lo, hi] {
            parts[w] = accumulate(model.params, songs, batch.subspan(lo, hi - lo), embeddings);
          });
        }
        for (auto& t : pool) t.join();
        for (const auto& part : parts) {
          total.loss += part.loss;
          total.grads.add_scaled(part.grads, 1.0);
        }
      }

      total.grads.scale(1.0 / static_cast<double>(batch.size()));
      const double norm = std::sqrt(total.grads.squared_norm());
      if (!std::isfinite(total.loss) || !std::isfinite(norm)) {
        throw DivergenceError("non-finite loss or gradient in epoch " + std::to_string(epoch));
      }
      if (norm > config.clip_norm) total.grads.scale(config.clip_norm / norm);
      model.params.add_scaled(total.grads, -config.learning_rate);
      epoch_loss += total.loss;
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("epoch " + std::to_string(epoch) + " loss is not finite");
    }
    if (log) log->epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);

    if (!validation.empty()) {
      const double val = mean_loss(model, validation, embeddings);
      if (log) log->validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = model.params;
        if (log) log->best_epoch = epoch;
      }
    }
  }
  if (best) model.params = std::move(*best);
  return model;
}

Prediction predict(const AttentionModel& model, const EncodedSong& song,
                   const RowMatrixXd& embeddings) {
  if (song.ids.empty()) throw DataError("untokenizable song");
  const SongInput in = song_input(song, embeddings);
  const auto trace = forward_pass(in.inputs, 0, model.params);
  Prediction p;
  Eigen::Index best = 0;
  trace.probs.maxCoeff(&best);
  p.label = static_cast<std::size_t>(best);
  p.probs = trace.probs;
  p.attention = trace.attended.weights;
  return p;
}

namespace {
constexpr std::string_view kCheckpointMagic = "motifnet-attention-checkpoint 1";
}

std::string write_checkpoint(const AttentionModel& model) {
  std::ostringstream out;
  out << kCheckpointMagic << '\n';
  out << "config " << (model.config_json.empty() ? "{}" : model.config_json) << '\n';
  out << "shape " << model.shape.input_dim << ' ' << model.shape.hidden << ' '
      << model.shape.attention_dim << ' ' << model.shape.classes << '\n';
  out << "labels " << model.labels.size();
  for (const auto& l : model.labels) out << ' ' << l;
  out << '\n';
  out << "vocab_hash " << std::hex << std::setw(16) << std::setfill('0') << model.vocab_hash
      << std::dec << '\n';
  model.params.for_each_tensor([&](std::string_view name, const auto& t) {
    out << "tensor " << name << '\n';
    write_matrix(out, MatrixXd(Eigen::Map<const MatrixXd>(t.data(), t.rows(), t.cols())));
  });
  return out.str();
}

AttentionModel read_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw DataError("not a motifnet attention checkpoint");
  }
  AttentionModel model;
  std::string key;
  if (!(in >> key) || key != "config") throw DataError("checkpoint: missing config");
  in >> std::ws;
  std::getline(in, model.config_json);
  if (!(in >> key) || key != "shape" || !(in >> model.shape.input_dim >> model.shape.hidden >>
                                          model.shape.attention_dim >> model.shape.classes)) {
    throw DataError("checkpoint: missing shape");
  }
  std::size_t n_labels = 0;
  if (!(in >> key) || key != "labels" || !(in >> n_labels)) {
    throw DataError("checkpoint: missing labels");
  }
  model.labels.resize(n_labels);
  for (auto& l : model.labels) in >> l;
  if (!(in >> key) || key != "vocab_hash" || !(in >> std::hex >> model.vocab_hash >> std::dec)) {
    throw DataError("checkpoint: missing vocab_hash");
  }
  if (static_cast<Eigen::Index>(n_labels) != model.shape.classes) {
    throw DataError("checkpoint: label count does not match shape");
  }
  model.params = NetworkParams<double>::zeros(model.shape);
  model.params.for_each_tensor([&](std::string_view name, auto& t) {
    std::string tag, got;
    if (!(in >> tag >> got) || tag != "tensor" || got != name) {
      throw DataError("checkpoint: expected tensor " + std::string(name));
    }
    const MatrixXd m = read_matrix(in);
    if (m.rows() != t.rows() || m.cols() != t.cols()) {
      throw DataError("checkpoint: shape mismatch for " + std::string(name));
    }
    Eigen::Map<MatrixXd>(t.data(), t.rows(), t.cols()) = m;
  });
  if (!model.params.all_finite()) throw DataError("checkpoint: non-finite parameter");
  return model;
}

std::string attention_csv(const Prediction& prediction, const EncodedSong& song,
                          const Vocabulary& vocab) {
  std::string out = "motif,weight\n";
  for (std::size_t j = 0; j < song.ids.size(); ++j) {
    out += vocab.token(song.ids[j]);
    out += ',';
    out += format_double(prediction.attention(static_cast<Eigen::Index>(j)));
    out += '\n';
  }
  return out;
}

}  // namespace motif
