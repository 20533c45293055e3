#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motifnet/attention.hpp"
#include "motifnet/eval.hpp"
#include "motifnet/melody.hpp"
#include "motifnet/skipgram.hpp"
#include "motifnet/svm.hpp"
#include "motifnet/tokenizer.hpp"

namespace motif {

enum class ModelKind { attention, doc2vec_svm, average_svm };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

struct TokenizeOptions {
  TokenMode mode = TokenMode::intervallic;
  std::size_t mw_size = 2;
  MultiwordMode multiword = MultiwordMode::sliding;
  PhraseConfig phrase;
};

/// Tokenizes and builds multiwords for every melody. Melodies that cannot be
/// tokenized or yield no multiword are skipped and reported in `skipped`.
std::vector<TokenizedSong> tokenize_corpus(const std::vector<Melody>& melodies,
                                           const TokenizeOptions& options,
                                           std::vector<std::string>* skipped = nullptr);

struct EmbeddingRun {
  Vocabulary vocab;
  EmbeddingMatrix<double> embeddings;
  TrainingLog log;
};

EmbeddingRun train_embeddings(const std::vector<TokenizedSong>& songs, const SkipGramConfig& config);

/// Sorted distinct labels; songs refer to them by index.
std::vector<std::string> label_set(const std::vector<TokenizedSong>& songs);
std::size_t label_index(const std::vector<std::string>& labels, const std::string& label);

/// Song vectors for the SVM baselines, one row per song, optionally
/// standardized with statistics from `fit_rows`.
struct BaselineVectors {
  MatrixXd rows;
  std::vector<std::string> ids;
};

BaselineVectors average_vectors(const std::vector<TokenizedSong>& songs, const Vocabulary& vocab,
                                const RowMatrixXd& embeddings);
BaselineVectors doc2vec_vectors(const std::vector<TokenizedSong>& songs, const Vocabulary& vocab,
                                const SkipGramConfig& config);
void standardize(MatrixXd& rows, const std::vector<std::size_t>& fit_rows);

struct ExperimentConfig {
  std::string name = "experiment";
  TokenizeOptions tokenize;
  std::vector<ModelKind> models = {ModelKind::attention};
  double split_ratio = 0.75;
  std::uint64_t seed = 0;
  std::vector<CorpusSource> corpora;
  std::optional<SyntheticConfig> synthetic;
  std::filesystem::path output_dir = "run";
  SkipGramConfig embeddings;
  ClassifierConfig classifier;
  SvmConfig svm;
  bool standardize_baselines = true;
  bool verbose = true;

  /// Unknown keys are rejected; missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct ModelResult {
  ModelKind model = ModelKind::attention;
  MetricsReport metrics;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::vector<ModelResult> models;
  std::size_t songs = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t skipped = 0;
  std::string report;  // aligned text summary
  std::optional<std::vector<Neighbor>> sample_neighbors;
};

/// ingest -> tokenize -> embed -> train -> evaluate, writing tokens.tsv,
/// vocab.tsv, embeddings.txt, model.ckpt (attention), metrics_<model>.json and
/// report.txt under the output directory. Errors carry the failing stage.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace motif
