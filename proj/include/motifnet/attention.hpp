#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motifnet/network.hpp"
#include "motifnet/vocabulary.hpp"

namespace motif {

/// A song as vocabulary indices (out-of-vocabulary motifs already dropped).
struct EncodedSong {
  std::vector<std::size_t> ids;
  std::size_t label = 0;
};

/// Embedding columns x_1..x_T of a song.
struct SongInput {
  MatrixXd inputs;  // d x T
  std::size_t label = 0;
};

inline constexpr std::size_t kMaxSongLength = 500;

/// Drops out-of-vocabulary tokens and truncates to kMaxSongLength.
EncodedSong encode_song(const TokenSequence& tokens, const Vocabulary& vocab, std::size_t label);

/// Gathers rows of the (frozen) input embedding table. Throws DataError for an
/// empty song.
SongInput song_input(const EncodedSong& song, const RowMatrixXd& embeddings);

struct ClassifierConfig {
  Eigen::Index hidden = 200;
  Eigen::Index attention_dim = 100;
  std::size_t batch_size = 10;
  double learning_rate = 0.05;
  double clip_norm = 5.0;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  /// Fraction of the training songs held out to pick the best epoch; 0 disables.
  double validation_fraction = 0.0;
  /// Data-parallel gradient workers; summation order is fixed per batch, so
  /// results only depend on this count, not on scheduling.
  std::size_t threads = 1;
};

struct AttentionModel {
  NetworkShape shape;
  NetworkParams<double> params;
  std::vector<std::string> labels;
  std::uint64_t vocab_hash = 0;
  std::string config_json;
};

struct ClassifierLog {
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 when the final epoch is returned
};

using ClassifierEpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Mini-batch SGD on the mean NLL with global-norm gradient clipping. Throws
/// DivergenceError when a loss or gradient becomes non-finite.
AttentionModel train_classifier(std::span<const EncodedSong> songs, const RowMatrixXd& embeddings,
                                std::vector<std::string> labels, const ClassifierConfig& config,
                                ClassifierLog* log = nullptr,
                                ClassifierEpochCallback on_epoch = {});

/// Mean loss over songs (no parameter change).
double mean_loss(const AttentionModel& model, std::span<const EncodedSong> songs,
                 const RowMatrixXd& embeddings);

struct Prediction {
  std::size_t label = 0;
  VectorXd probs;
  VectorXd attention;  // one weight per input position
};

/// Throws DataError("untokenizable song") when no motif is in vocabulary.
Prediction predict(const AttentionModel& model, const EncodedSong& song,
                   const RowMatrixXd& embeddings);

/// Text checkpoint: header, config echo, labels, vocabulary hash and every
/// parameter tensor in the embedding float format.
std::string write_checkpoint(const AttentionModel& model);
AttentionModel read_checkpoint(std::string_view text);

/// CSV "motif,weight" for one prediction.
std::string attention_csv(const Prediction& prediction, const EncodedSong& song,
                          const Vocabulary& vocab);

}  // namespace motif
