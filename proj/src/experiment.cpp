#include "motifnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "motifnet/errors.hpp"
#include "motifnet/text_io.hpp"

namespace motif {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "attention") return ModelKind::attention;
  if (name == "doc2vec+svm" || name == "doc2vec") return ModelKind::doc2vec_svm;
  if (name == "average+svm" || name == "average") return ModelKind::average_svm;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::attention: return "attention";
    case ModelKind::doc2vec_svm: return "doc2vec+svm";
    case ModelKind::average_svm: return "average+svm";
  }
  return "?";
}

std::vector<TokenizedSong> tokenize_corpus(const std::vector<Melody>& melodies,
                                           const TokenizeOptions& options,
                                           std::vector<std::string>* skipped) {
  std::vector<TokenizedSong> atoms;
  for (const auto& m : melodies) {
    try {
      atoms.push_back({m.id, m.label, tokenize_melody(m, options.mode)});
    } catch (const DataError& e) {
      if (skipped) skipped->push_back(e.what());
    }
  }
  std::optional<PhraseModel> phrases;
  if (options.multiword == MultiwordMode::phrase) {
    std::vector<TokenSequence> seqs;
    for (const auto& s : atoms) seqs.push_back(s.tokens);
    phrases = PhraseModel::learn(seqs, options.mw_size, options.phrase);
  }
  std::vector<TokenizedSong> out;
  for (auto& s : atoms) {
    TokenSequence words = phrases ? phrases->apply(s.tokens) : sliding_multiwords(s.tokens, options.mw_size);
    if (words.empty()) {
      if (skipped) skipped->push_back("melody '" + s.id + "' is shorter than one multiword");
      continue;
    }
    out.push_back({s.id, s.label, std::move(words)});
  }
  return out;
}

EmbeddingRun train_embeddings(const std::vector<TokenizedSong>& songs, const SkipGramConfig& config) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(songs.size());
  for (const auto& s : songs) seqs.push_back(s.tokens);
  EmbeddingRun run{Vocabulary::build(seqs, config.min_count), {}, {}};
  std::vector<std::vector<std::size_t>> encoded;
  encoded.reserve(seqs.size());
  for (const auto& s : seqs) encoded.push_back(run.vocab.encode(s));
  run.embeddings = train_skipgram(encoded, run.vocab, config, &run.log);
  return run;
}

std::vector<std::string> label_set(const std::vector<TokenizedSong>& songs) {
  std::set<std::string> labels;
  for (const auto& s : songs) labels.insert(s.label);
  return {labels.begin(), labels.end()};
}

std::size_t label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw DataError("unknown label '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

BaselineVectors average_vectors(const std::vector<TokenizedSong>& songs, const Vocabulary& vocab,
                                const RowMatrixXd& embeddings) {
  BaselineVectors out;
  out.rows.resize(static_cast<Eigen::Index>(songs.size()), embeddings.cols());
  for (std::size_t i = 0; i < songs.size(); ++i) {
    out.rows.row(static_cast<Eigen::Index>(i)) =
        average_embedding(songs[i].tokens, vocab, embeddings).transpose();
    out.ids.push_back(songs[i].id);
  }
  return out;
}

BaselineVectors doc2vec_vectors(const std::vector<TokenizedSong>& songs, const Vocabulary& vocab,
                                const SkipGramConfig& config) {
  std::vector<std::vector<std::size_t>> encoded;
  for (const auto& s : songs) encoded.push_back(vocab.encode(s.tokens));
  const DocVectors dv = train_pvdbow(encoded, vocab, config);
  BaselineVectors out;
  out.rows = dv.vectors;
  for (const auto& s : songs) out.ids.push_back(s.id);
  return out;
}

void standardize(MatrixXd& rows, const std::vector<std::size_t>& fit_rows) {
  if (fit_rows.empty()) return;
  VectorXd mean = VectorXd::Zero(rows.cols());
  for (auto r : fit_rows) mean += rows.row(static_cast<Eigen::Index>(r)).transpose();
  mean /= static_cast<double>(fit_rows.size());
  VectorXd var = VectorXd::Zero(rows.cols());
  for (auto r : fit_rows) {
    var += (rows.row(static_cast<Eigen::Index>(r)).transpose() - mean).array().square().matrix();
  }
  var /= static_cast<double>(fit_rows.size());
  const VectorXd scale = var.array().sqrt().max(1e-12).inverse().matrix();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    rows.row(i) = (rows.row(i).transpose() - mean).cwiseProduct(scale).transpose();
  }
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DataError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

SkipGramConfig skipgram_from_json(const nlohmann::json& j, SkipGramConfig c) {
  reject_unknown(j, {"dim", "window", "negatives", "epochs", "min_count", "power", "lr_start",
                     "lr_end", "shrink_window", "seed", "deterministic", "threads"},
                 "embeddings");
  read_if(j, "dim", c.dim);
  read_if(j, "window", c.window);
  read_if(j, "negatives", c.negatives);
  read_if(j, "epochs", c.epochs);
  read_if(j, "min_count", c.min_count);
  read_if(j, "power", c.power);
  read_if(j, "lr_start", c.lr_start);
  read_if(j, "lr_end", c.lr_end);
  read_if(j, "shrink_window", c.shrink_window);
  read_if(j, "seed", c.seed);
  read_if(j, "deterministic", c.deterministic);
  read_if(j, "threads", c.threads);
  return c;
}

nlohmann::json skipgram_to_json(const SkipGramConfig& c) {
  return {{"dim", c.dim},         {"window", c.window},       {"negatives", c.negatives},
          {"epochs", c.epochs},   {"min_count", c.min_count}, {"power", c.power},
          {"lr_start", c.lr_start}, {"lr_end", c.lr_end},     {"shrink_window", c.shrink_window},
          {"seed", c.seed},       {"deterministic", c.deterministic}, {"threads", c.threads}};
}

ClassifierConfig classifier_from_json(const nlohmann::json& j, ClassifierConfig c) {
  reject_unknown(j, {"hidden", "attention_dim", "batch_size", "learning_rate", "clip_norm",
                     "epochs", "seed", "validation_fraction", "threads"},
                 "classifier");
  read_if(j, "hidden", c.hidden);
  read_if(j, "attention_dim", c.attention_dim);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "learning_rate", c.learning_rate);
  read_if(j, "clip_norm", c.clip_norm);
  read_if(j, "epochs", c.epochs);
  read_if(j, "seed", c.seed);
  read_if(j, "validation_fraction", c.validation_fraction);
  read_if(j, "threads", c.threads);
  return c;
}

nlohmann::json classifier_to_json(const ClassifierConfig& c) {
  return {{"hidden", c.hidden},
          {"attention_dim", c.attention_dim},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction},
          {"threads", c.threads}};
}

SyntheticConfig synthetic_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"labels", "class_sizes", "shared_sizes", "songs_per_class", "min_notes",
                     "max_notes", "noise", "seed"},
                 "synthetic");
  SyntheticConfig c;
  read_if(j, "labels", c.labels);
  read_if(j, "class_sizes", c.class_sizes);
  read_if(j, "shared_sizes", c.shared_sizes);
  read_if(j, "songs_per_class", c.songs_per_class);
  read_if(j, "min_notes", c.min_notes);
  read_if(j, "max_notes", c.max_notes);
  read_if(j, "noise", c.noise);
  read_if(j, "seed", c.seed);
  return c;
}

nlohmann::json synthetic_to_json(const SyntheticConfig& c) {
  return {{"labels", c.labels},       {"class_sizes", c.class_sizes},
          {"shared_sizes", c.shared_sizes}, {"songs_per_class", c.songs_per_class},
          {"min_notes", c.min_notes}, {"max_notes", c.max_notes},
          {"noise", c.noise},         {"seed", c.seed}};
}

// Re-throws module errors with the pipeline stage prepended.
template <typename F>
auto stage(std::string_view name, F&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"name", "representation", "mw_size", "multiword_mode", "phrase_delta",
                     "phrase_threshold", "models", "split_ratio", "seed", "corpora", "synthetic",
                     "output_dir", "embeddings", "classifier", "svm", "standardize_baselines",
                     "verbose"},
                 "experiment config");
  ExperimentConfig c;
  read_if(j, "name", c.name);
  if (j.contains("representation")) {
    c.tokenize.mode = parse_token_mode(j.at("representation").get<std::string>());
  }
  read_if(j, "mw_size", c.tokenize.mw_size);
  if (j.contains("multiword_mode")) {
    const auto mode = j.at("multiword_mode").get<std::string>();
    if (mode != "sliding" && mode != "phrase") throw DataError("multiword_mode must be sliding|phrase");
    c.tokenize.multiword = mode == "phrase" ? MultiwordMode::phrase : MultiwordMode::sliding;
  }
  read_if(j, "phrase_delta", c.tokenize.phrase.delta);
  read_if(j, "phrase_threshold", c.tokenize.phrase.threshold);
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  read_if(j, "split_ratio", c.split_ratio);
  read_if(j, "seed", c.seed);
  c.embeddings.seed = c.seed;
  c.classifier.seed = c.seed;
  c.svm.seed = c.seed;
  if (j.contains("corpora")) {
    for (const auto& src : j.at("corpora")) {
      c.corpora.push_back({src.at("path").get<std::string>(), src.value("label", std::string{})});
    }
  }
  if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j.at("synthetic"));
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("embeddings")) c.embeddings = skipgram_from_json(j.at("embeddings"), c.embeddings);
  if (j.contains("classifier")) c.classifier = classifier_from_json(j.at("classifier"), c.classifier);
  if (j.contains("svm")) {
    reject_unknown(j.at("svm"), {"lambda", "epochs", "seed"}, "svm");
    read_if(j.at("svm"), "lambda", c.svm.lambda);
    read_if(j.at("svm"), "epochs", c.svm.epochs);
    read_if(j.at("svm"), "seed", c.svm.seed);
  }
  read_if(j, "standardize_baselines", c.standardize_baselines);
  read_if(j, "verbose", c.verbose);
  c.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json models_json = nlohmann::json::array();
  for (auto m : models) models_json.push_back(std::string(to_string(m)));
  nlohmann::json corpora_json = nlohmann::json::array();
  for (const auto& s : corpora) corpora_json.push_back({{"path", s.path.string()}, {"label", s.label}});
  nlohmann::json j = {
      {"name", name},
      {"representation", std::string(to_string(tokenize.mode))},
      {"mw_size", tokenize.mw_size},
      {"multiword_mode", tokenize.multiword == MultiwordMode::phrase ? "phrase" : "sliding"},
      {"phrase_delta", tokenize.phrase.delta},
      {"phrase_threshold", tokenize.phrase.threshold},
      {"models", models_json},
      {"split_ratio", split_ratio},
      {"seed", seed},
      {"corpora", corpora_json},
      {"output_dir", output_dir.string()},
      {"embeddings", skipgram_to_json(embeddings)},
      {"classifier", classifier_to_json(classifier)},
      {"svm", {{"lambda", svm.lambda}, {"epochs", svm.epochs}, {"seed", svm.seed}}},
      {"standardize_baselines", standardize_baselines},
      {"verbose", verbose}};
  if (synthetic) j["synthetic"] = synthetic_to_json(*synthetic);
  return j;
}

void ExperimentConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw DataError("split_ratio must be in (0, 1)");
  if (tokenize.mw_size != 2 && tokenize.mw_size != 3) throw DataError("mw_size must be 2 or 3");
  if (models.empty()) throw DataError("no models selected");
  if (corpora.empty() && !synthetic) throw DataError("config names no corpora and no synthetic corpus");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  using Clock = std::chrono::steady_clock;
  config.validate();
  auto say = [&](const std::string& msg) {
    if (config.verbose) std::cerr << "[" << config.name << "] " << msg << '\n';
  };
  std::filesystem::create_directories(config.output_dir);
  ExperimentResult result;

  const std::vector<Melody> melodies = stage("ingest", [&] {
    if (config.synthetic) return synthetic_corpus(*config.synthetic);
    LabeledCorpus corpus = load_corpus(config.corpora);
    for (const auto& msg : corpus.diagnostics.messages) say("skipped " + msg);
    result.skipped += corpus.diagnostics.skipped;
    return std::move(corpus.melodies);
  });
  say("loaded " + std::to_string(melodies.size()) + " melodies");

  std::vector<std::string> skipped;
  const auto songs = stage("tokenize", [&] { return tokenize_corpus(melodies, config.tokenize, &skipped); });
  result.skipped += skipped.size();
  for (const auto& msg : skipped) say("skipped " + msg);
  if (songs.empty()) throw DataError("tokenize: no song produced any multiword");
  result.songs = songs.size();
  write_text_file(config.output_dir / "tokens.tsv", write_token_file(songs));

  const auto labels = label_set(songs);
  std::vector<std::string> song_labels;
  std::vector<std::size_t> gold_all;
  for (const auto& s : songs) {
    song_labels.push_back(s.label);
    gold_all.push_back(label_index(labels, s.label));
  }
  const Split split = stage("split", [&] { return split_dataset(song_labels, config.split_ratio, config.seed); });
  result.train_size = split.train.size();
  result.test_size = split.test.size();
  say("split " + std::to_string(split.train.size()) + " train / " + std::to_string(split.test.size()) + " test");

  const auto t_embed = Clock::now();
  const EmbeddingRun emb = stage("embed", [&] { return train_embeddings(songs, config.embeddings); });
  write_text_file(config.output_dir / "vocab.tsv", emb.vocab.to_tsv());
  write_text_file(config.output_dir / "embeddings.txt",
                  write_keyed_vectors(to_keyed(emb.vocab, emb.embeddings.input)));
  say("embeddings: V=" + std::to_string(emb.vocab.size()) + " in " +
      std::to_string(std::chrono::duration<double>(Clock::now() - t_embed).count()) + " s");

  std::vector<std::size_t> gold_test;
  for (auto i : split.test) gold_test.push_back(gold_all[i]);

  for (const ModelKind kind : config.models) {
    const auto t0 = Clock::now();
    std::vector<std::size_t> predicted;
    if (kind == ModelKind::attention) {
      std::vector<EncodedSong> encoded;
      for (std::size_t i = 0; i < songs.size(); ++i) {
        encoded.push_back(encode_song(songs[i].tokens, emb.vocab, gold_all[i]));
      }
      std::vector<EncodedSong> train, test;
      for (auto i : split.train) train.push_back(encoded[i]);
      for (auto i : split.test) test.push_back(encoded[i]);
      AttentionModel model = stage("train-classifier", [&] {
        return train_classifier(train, emb.embeddings.input, labels, config.classifier, nullptr,
                                [&](std::size_t epoch, double loss) {
                                  std::ostringstream msg;
                                  msg << "attention epoch " << epoch << " loss " << loss;
                                  say(msg.str());
                                });
      });
      model.vocab_hash = emb.vocab.hash();
      model.config_json = config.to_json().dump();
      write_text_file(config.output_dir / "model.ckpt", write_checkpoint(model));
      for (const auto& s : test) predicted.push_back(predict(model, s, emb.embeddings.input).label);
    } else {
      BaselineVectors vectors = stage("baseline", [&] {
        return kind == ModelKind::average_svm
                   ? average_vectors(songs, emb.vocab, emb.embeddings.input)
                   : doc2vec_vectors(songs, emb.vocab, config.embeddings);
      });
      if (config.standardize_baselines) standardize(vectors.rows, split.train);
      const std::string stem = kind == ModelKind::average_svm ? "average" : "doc2vec";
      write_text_file(config.output_dir / ("song_vectors_" + stem + ".txt"),
                      write_keyed_vectors({vectors.ids, vectors.rows}));
      MatrixXd x_train(static_cast<Eigen::Index>(split.train.size()), vectors.rows.cols());
      std::vector<std::size_t> y_train;
      for (std::size_t k = 0; k < split.train.size(); ++k) {
        x_train.row(static_cast<Eigen::Index>(k)) = vectors.rows.row(static_cast<Eigen::Index>(split.train[k]));
        y_train.push_back(gold_all[split.train[k]]);
      }
      const LinearSvmModel svm = stage("train-svm", [&] {
        return train_linear_svm(x_train, y_train, labels.size(), config.svm);
      });
      for (auto i : split.test) {
        predicted.push_back(predict_svm(svm, vectors.rows.row(static_cast<Eigen::Index>(i)).transpose()));
      }
    }
    ModelResult mr{kind, evaluate(predicted, gold_test, labels),
                   std::chrono::duration<double>(Clock::now() - t0).count()};
    std::string stem(to_string(kind));
    std::replace(stem.begin(), stem.end(), '+', '_');
    write_text_file(config.output_dir / ("metrics_" + stem + ".json"), mr.metrics.to_json().dump(2) + "\n");
    std::ostringstream msg;
    msg << to_string(kind) << " accuracy " << mr.metrics.accuracy << " (" << mr.seconds << " s)";
    say(msg.str());
    result.models.push_back(std::move(mr));
  }

  std::ostringstream report;
  report << std::fixed << std::setprecision(4);
  report << config.name << ": " << result.songs << " songs, " << result.train_size << " train / "
         << result.test_size << " test\n\n";
  report << std::left << std::setw(14) << "Repres. type" << std::setw(9) << "mw size" << std::setw(14)
         << "Model" << std::right << std::setw(11) << "Precision" << std::setw(11) << "Macro P" << '\n';
  for (const auto& mr : result.models) {
    report << std::left << std::setw(14) << to_string(config.tokenize.mode) << std::setw(9)
           << config.tokenize.mw_size << std::setw(14) << to_string(mr.model) << std::right
           << std::setw(11) << mr.metrics.micro_precision << std::setw(11)
           << mr.metrics.macro_precision << '\n';
  }
  for (const auto& mr : result.models) {
    report << "\n" << to_string(mr.model) << "\n" << mr.metrics.to_table();
  }
  result.report = report.str();
  write_text_file(config.output_dir / "report.txt", result.report);
  return result;
}

}  // namespace motif
