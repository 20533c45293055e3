// Command-line front end for the motif embedding and classification pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motifnet/attention.hpp"
#include "motifnet/errors.hpp"
#include "motifnet/eval.hpp"
#include "motifnet/experiment.hpp"
#include "motifnet/svm.hpp"
#include "motifnet/text_io.hpp"

namespace fs = std::filesystem;
using namespace motif;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "label=path" or a bare path labelled by its directory/file stem.
CorpusSource parse_source(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    fs::path p(spec);
    const fs::path name = p.has_filename() ? p.filename() : p.parent_path().filename();
    return {p, fs::is_directory(p) ? name.string() : std::string{}};
  }
  if (eq == 0 || eq + 1 == spec.size()) throw UsageError("corpus must be LABEL=PATH: " + spec);
  return {spec.substr(eq + 1), spec.substr(0, eq)};
}

void emit_metrics(const MetricsReport& m, const std::string& out) {
  const std::string table = m.to_table();
  std::cout << table;
  if (out.empty()) return;
  write_text_file(out, m.to_json().dump(2) + "\n");
  fs::path txt(out);
  txt.replace_extension(".txt");
  write_text_file(txt, table);
}

// Train/test selection shared by the training and evaluation subcommands.
struct SplitOptions {
  std::string part = "all";
  double ratio = 0.75;
  std::uint64_t seed = 0;

  void add(CLI::App* cmd, const std::string& default_part) {
    part = default_part;
    cmd->add_option("--split", part, "Songs to use: all, train or test")
        ->check(CLI::IsMember({"all", "train", "test"}))
        ->capture_default_str();
    cmd->add_option("--ratio", ratio, "Training share of the stratified split")
        ->check(CLI::Range(0.0, 1.0).description("(0,1)"))
        ->capture_default_str();
    cmd->add_option("--split-seed", seed, "Seed of the split")->capture_default_str();
  }

  std::vector<std::size_t> select(const std::vector<TokenizedSong>& songs) const {
    std::vector<std::size_t> idx;
    if (part == "all") {
      for (std::size_t i = 0; i < songs.size(); ++i) idx.push_back(i);
      return idx;
    }
    if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("--ratio must be in (0, 1)");
    std::vector<std::string> labels;
    for (const auto& s : songs) labels.push_back(s.label);
    const Split split = split_dataset(labels, ratio, seed);
    return part == "train" ? split.train : split.test;
  }
};

std::vector<TokenizedSong> load_tokens(const std::string& path) {
  auto songs = read_token_file(read_text_file(path));
  if (songs.empty()) throw DataError(path + ": no songs");
  return songs;
}

struct EmbeddingFiles {
  std::string embeddings = "embeddings.txt";
  std::string vocab = "vocab.tsv";

  void add(CLI::App* cmd) {
    cmd->add_option("--embeddings", embeddings, "Embedding file")->capture_default_str();
    cmd->add_option("--vocab", vocab, "Vocabulary TSV")->capture_default_str();
  }

  // Embedding rows reordered to vocabulary index order.
  std::pair<Vocabulary, RowMatrixXd> load() const {
    Vocabulary vocab = Vocabulary::from_tsv(read_text_file(this->vocab));
    const KeyedVectors kv = read_keyed_vectors(read_text_file(embeddings));
    RowMatrixXd rows(static_cast<Eigen::Index>(vocab.size()), kv.vectors.cols());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const auto row = kv.find(vocab.token(i));
      if (!row) throw DataError("token '" + vocab.token(i) + "' has no embedding in " + embeddings);
      rows.row(static_cast<Eigen::Index>(i)) = kv.vectors.row(static_cast<Eigen::Index>(*row));
    }
    return {std::move(vocab), std::move(rows)};
  }
};

void add_skipgram_options(CLI::App* cmd, SkipGramConfig& c) {
  cmd->add_option("--dim", c.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--window", c.window, "Context window")->capture_default_str();
  cmd->add_option("--negatives", c.negatives, "Negative samples per pair")->capture_default_str();
  cmd->add_option("--epochs", c.epochs)->capture_default_str();
  cmd->add_option("--min-count", c.min_count)->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--threads", c.threads, "Workers when not deterministic")->capture_default_str();
  cmd->add_flag("--deterministic,!--no-deterministic", c.deterministic,
                "Single-worker reproducible training (default on)");
}

std::map<std::string, std::string> data_env() {
  std::map<std::string, std::string> env;
  for (const auto& [label, var] : {std::pair{"german", "MOTIFNET_ESSEN_GERMAN"},
                                   {"chinese", "MOTIFNET_ESSEN_CHINESE"},
                                   {"swedish", "MOTIFNET_SWEDISH"}}) {
    if (const char* v = std::getenv(var); v && *v) env[label] = v;
  }
  return env;
}

ExperimentConfig experiment_defaults(int which) {
  ExperimentConfig c;
  c.name = "experiment-" + std::to_string(which);
  c.output_dir = "runs/" + c.name;
  if (which == 1) {
    c.models = {ModelKind::attention, ModelKind::doc2vec_svm, ModelKind::average_svm};
  }
  return c;
}

void fill_corpora_from_env(ExperimentConfig& c, int which) {
  if (!c.corpora.empty() || c.synthetic) return;
  const auto env = data_env();
  std::vector<std::string> wanted = {"german", "chinese"};
  if (which == 2) wanted.push_back("swedish");
  for (const auto& label : wanted) {
    const auto it = env.find(label);
    if (it == env.end()) {
      throw DataError("no corpora configured and " + label +
                      " data not found; set MOTIFNET_ESSEN_GERMAN, MOTIFNET_ESSEN_CHINESE" +
                      (which == 2 ? ", MOTIFNET_SWEDISH" : "") + " or pass --config");
    }
    c.corpora.push_back({it->second, label});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motif embeddings and attention-based melody classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse kern/JSONL corpora into canonical JSONL");
  std::vector<std::string> ingest_sources;
  std::string ingest_out;
  ingest->add_option("corpus", ingest_sources, "LABEL=PATH or PATH (directory name is the label)")
      ->required();
  ingest->add_option("-o,--output", ingest_out, "Output JSONL")->required();

  // tokenize
  auto* tokenize = app.add_subcommand("tokenize", "Turn melodies into multiword motif tokens");
  std::string tok_in, tok_out, tok_mode = "intervallic";
  TokenizeOptions tok_opts;
  bool tok_phrase = false;
  tokenize->add_option("input", tok_in, "Melody JSONL")->required();
  tokenize->add_option("-o,--output", tok_out, "Token file")->required();
  tokenize->add_option("--mode", tok_mode)
      ->check(CLI::IsMember({"intervallic", "rhythmic"}))
      ->capture_default_str();
  tokenize->add_option("--mw-size", tok_opts.mw_size)->check(CLI::IsMember({2, 3}))->capture_default_str();
  tokenize->add_flag("--phrase-mode", tok_phrase, "Learned phrase merges instead of sliding n-grams");
  tokenize->add_option("--phrase-delta", tok_opts.phrase.delta)->capture_default_str();
  tokenize->add_option("--phrase-threshold", tok_opts.phrase.threshold)->capture_default_str();

  // train-embeddings
  auto* embed = app.add_subcommand("train-embeddings", "Skip-gram embeddings of motif tokens");
  std::string emb_in, emb_out = "embeddings.txt", emb_vocab = "vocab.tsv";
  SkipGramConfig emb_cfg;
  embed->add_option("tokens", emb_in, "Token file")->required();
  embed->add_option("-o,--output", emb_out)->capture_default_str();
  embed->add_option("--vocab-out", emb_vocab)->capture_default_str();
  add_skipgram_options(embed, emb_cfg);

  // similar
  auto* similar = app.add_subcommand("similar", "Nearest motifs by cosine similarity");
  std::string sim_token, sim_file = "embeddings.txt";
  std::size_t sim_k = 10;
  similar->add_option("token", sim_token)->required();
  similar->add_option("--embeddings", sim_file)->capture_default_str();
  similar->add_option("-k,--k", sim_k)->capture_default_str();

  // train-classifier
  auto* train = app.add_subcommand("train-classifier", "Train the attention network");
  std::string train_in, train_out = "model.ckpt";
  EmbeddingFiles train_files;
  SplitOptions train_split;
  ClassifierConfig train_cfg;
  train->add_option("tokens", train_in)->required();
  train->add_option("-o,--output", train_out)->capture_default_str();
  train_files.add(train);
  train_split.add(train, "train");
  train->add_option("--hidden", train_cfg.hidden)->capture_default_str();
  train->add_option("--attention-dim", train_cfg.attention_dim)->capture_default_str();
  train->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train->add_option("--clip-norm", train_cfg.clip_norm)->capture_default_str();
  train->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train->add_option("--seed", train_cfg.seed)->capture_default_str();
  train->add_option("--validation", train_cfg.validation_fraction,
                    "Held-out share used to keep the best epoch")
      ->capture_default_str();
  train->add_option("--threads", train_cfg.threads)->capture_default_str();

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Song-vector + linear SVM baselines");
  std::string base_kind, base_in, base_out;
  EmbeddingFiles base_files;
  SplitOptions base_split;
  SkipGramConfig base_sg;
  SvmConfig base_svm;
  bool base_no_std = false;
  baseline->add_option("kind", base_kind)->required()->check(CLI::IsMember({"average", "doc2vec"}));
  baseline->add_option("tokens", base_in)->required();
  baseline->add_option("-o,--output", base_out, "Metrics JSON");
  base_files.add(baseline);
  base_split.ratio = 0.75;
  baseline->add_option("--ratio", base_split.ratio)->capture_default_str();
  baseline->add_option("--split-seed", base_split.seed)->capture_default_str();
  add_skipgram_options(baseline, base_sg);
  baseline->add_option("--lambda", base_svm.lambda)->capture_default_str();
  baseline->add_option("--svm-epochs", base_svm.epochs)->capture_default_str();
  baseline->add_flag("--no-standardize", base_no_std, "Use raw song vectors");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate an attention checkpoint");
  std::string eval_in, eval_model = "model.ckpt", eval_out, eval_alpha;
  EmbeddingFiles eval_files;
  SplitOptions eval_split;
  evaluate_cmd->add_option("tokens", eval_in)->required();
  evaluate_cmd->add_option("--model", eval_model)->capture_default_str();
  evaluate_cmd->add_option("-o,--output", eval_out, "Metrics JSON");
  evaluate_cmd->add_option("--alpha-dir", eval_alpha, "Write one motif,weight CSV per song");
  eval_files.add(evaluate_cmd);
  eval_split.add(evaluate_cmd, "test");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a full experiment");
  int exp_which = 1;
  std::string exp_config, exp_output;
  experiment->add_option("number", exp_which, "1: German vs Chinese, 2: three collections")
      ->required()
      ->check(CLI::IsMember({1, 2}));
  experiment->add_option("--config", exp_config, "JSON config");
  experiment->add_option("--output-dir", exp_output);

  // synth-corpus
  auto* synth = app.add_subcommand("synth-corpus", "Generate the synthetic separable corpus");
  std::string synth_out;
  SyntheticConfig synth_cfg;
  synth->add_option("-o,--output", synth_out, "Output JSONL")->required();
  synth->add_option("--songs-per-class", synth_cfg.songs_per_class)->capture_default_str();
  synth->add_option("--min-notes", synth_cfg.min_notes)->capture_default_str();
  synth->add_option("--max-notes", synth_cfg.max_notes)->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise)->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*ingest) {
      std::vector<CorpusSource> sources;
      for (const auto& s : ingest_sources) sources.push_back(parse_source(s));
      const LabeledCorpus corpus = load_corpus(sources);
      for (const auto& msg : corpus.diagnostics.messages) std::cerr << "skipped " << msg << '\n';
      write_text_file(ingest_out, write_jsonl(corpus.melodies));
      std::cerr << "wrote " << corpus.diagnostics.loaded << " melodies (" << corpus.diagnostics.skipped
                << " skipped) to " << ingest_out << '\n';
    } else if (*tokenize) {
      tok_opts.mode = parse_token_mode(tok_mode);
      tok_opts.multiword = tok_phrase ? MultiwordMode::phrase : MultiwordMode::sliding;
      std::vector<std::string> skipped;
      const auto songs = tokenize_corpus(read_jsonl(read_text_file(tok_in)), tok_opts, &skipped);
      for (const auto& msg : skipped) std::cerr << "skipped " << msg << '\n';
      if (songs.empty()) throw DataError("no tokenizable melodies");
      write_text_file(tok_out, write_token_file(songs));
      std::cerr << "wrote " << songs.size() << " songs to " << tok_out << '\n';
    } else if (*embed) {
      const auto songs = load_tokens(emb_in);
      const EmbeddingRun run = train_embeddings(songs, emb_cfg);
      write_text_file(emb_out, write_keyed_vectors(to_keyed(run.vocab, run.embeddings.input)));
      write_text_file(emb_vocab, run.vocab.to_tsv());
      for (std::size_t e = 0; e < run.log.epoch_objective.size(); ++e) {
        std::cerr << "epoch " << e + 1 << " objective " << run.log.epoch_objective[e] << '\n';
      }
      std::cerr << "V=" << run.vocab.size() << " d=" << emb_cfg.dim << " -> " << emb_out << '\n';
    } else if (*similar) {
      const KeyedVectors kv = read_keyed_vectors(read_text_file(sim_file));
      for (const auto& n : most_similar(kv, sim_token, sim_k)) {
        std::cout << n.token << '\t' << format_double(n.cosine) << '\n';
      }
    } else if (*train) {
      const auto songs = load_tokens(train_in);
      const auto [vocab, rows] = train_files.load();
      const auto labels = label_set(songs);
      std::vector<EncodedSong> encoded;
      for (auto i : train_split.select(songs)) {
        EncodedSong e = encode_song(songs[i].tokens, vocab, label_index(labels, songs[i].label));
        if (e.ids.empty()) {
          std::cerr << "skipped " << songs[i].id << ": untokenizable song\n";
          continue;
        }
        encoded.push_back(std::move(e));
      }
      AttentionModel model = train_classifier(encoded, rows, labels, train_cfg, nullptr,
                                              [](std::size_t epoch, double loss) {
                                                std::cerr << "epoch " << epoch << " loss " << loss << '\n';
                                              });
      model.vocab_hash = vocab.hash();
      model.config_json = nlohmann::json{{"hidden", train_cfg.hidden},
                                         {"attention_dim", train_cfg.attention_dim},
                                         {"batch_size", train_cfg.batch_size},
                                         {"learning_rate", train_cfg.learning_rate},
                                         {"clip_norm", train_cfg.clip_norm},
                                         {"epochs", train_cfg.epochs},
                                         {"seed", train_cfg.seed},
                                         {"validation_fraction", train_cfg.validation_fraction}}
                              .dump();
      write_text_file(train_out, write_checkpoint(model));
      std::cerr << "trained on " << encoded.size() << " songs -> " << train_out << '\n';
    } else if (*baseline) {
      const auto songs = load_tokens(base_in);
      const auto labels = label_set(songs);
      BaselineVectors vectors;
      if (base_kind == "average") {
        const auto [vocab, rows] = base_files.load();
        vectors = average_vectors(songs, vocab, rows);
      } else {
        std::vector<TokenSequence> corpus;
        for (const auto& s : songs) corpus.push_back(s.tokens);
        vectors = doc2vec_vectors(songs, Vocabulary::build(corpus, base_sg.min_count), base_sg);
      }
      base_split.part = "train";
      const auto train_idx = base_split.select(songs);
      base_split.part = "test";
      const auto test_idx = base_split.select(songs);
      if (!base_no_std) standardize(vectors.rows, train_idx);
      MatrixXd x(static_cast<Eigen::Index>(train_idx.size()), vectors.rows.cols());
      std::vector<std::size_t> y;
      for (std::size_t k = 0; k < train_idx.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = vectors.rows.row(static_cast<Eigen::Index>(train_idx[k]));
        y.push_back(label_index(labels, songs[train_idx[k]].label));
      }
      const LinearSvmModel svm = train_linear_svm(x, y, labels.size(), base_svm);
      std::vector<std::size_t> predicted, gold;
      for (auto i : test_idx) {
        predicted.push_back(predict_svm(svm, vectors.rows.row(static_cast<Eigen::Index>(i)).transpose()));
        gold.push_back(label_index(labels, songs[i].label));
      }
      emit_metrics(evaluate(predicted, gold, labels), base_out);
    } else if (*evaluate_cmd) {
      const auto songs = load_tokens(eval_in);
      const AttentionModel model = read_checkpoint(read_text_file(eval_model));
      const auto [vocab, rows] = eval_files.load();
      if (vocab.hash() != model.vocab_hash) {
        throw DataError("vocabulary " + eval_files.vocab + " does not match the checkpoint");
      }
      std::vector<std::size_t> predicted, gold;
      for (auto i : eval_split.select(songs)) {
        const EncodedSong e = encode_song(songs[i].tokens, vocab, label_index(model.labels, songs[i].label));
        if (e.ids.empty()) {
          std::cerr << "skipped " << songs[i].id << ": untokenizable song\n";
          continue;
        }
        const Prediction p = predict(model, e, rows);
        predicted.push_back(p.label);
        gold.push_back(e.label);
        if (!eval_alpha.empty()) {
          write_text_file(fs::path(eval_alpha) / (songs[i].id + ".csv"), attention_csv(p, e, vocab));
        }
      }
      emit_metrics(evaluate(predicted, gold, model.labels), eval_out);
    } else if (*experiment) {
      ExperimentConfig config = experiment_defaults(exp_which);
      if (!exp_config.empty()) {
        nlohmann::json j = nlohmann::json::parse(read_text_file(exp_config));
        if (!j.contains("name")) j["name"] = config.name;
        if (!j.contains("models")) {
          nlohmann::json models = nlohmann::json::array();
          for (auto m : config.models) models.push_back(std::string(to_string(m)));
          j["models"] = models;
        }
        if (!j.contains("corpora") && !j.contains("synthetic")) {
          fill_corpora_from_env(config, exp_which);
          nlohmann::json corpora = nlohmann::json::array();
          for (const auto& c : config.corpora) corpora.push_back({{"path", c.path.string()}, {"label", c.label}});
          j["corpora"] = corpora;
        }
        if (!j.contains("output_dir")) j["output_dir"] = config.output_dir.string();
        config = ExperimentConfig::from_json(j);
      } else {
        fill_corpora_from_env(config, exp_which);
      }
      if (!exp_output.empty()) config.output_dir = exp_output;
      const ExperimentResult result = run_experiment(config);
      std::cout << result.report;
    } else if (*synth) {
      const auto melodies = synthetic_corpus(synth_cfg);
      write_text_file(synth_out, write_jsonl(melodies));
      std::cerr << "wrote " << melodies.size() << " synthetic melodies to " << synth_out << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
