#include "motifnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "motifnet/errors.hpp"
#include "motifnet/random.hpp"
#include "motifnet/tokenizer.hpp"

namespace motif {

Split split_dataset(std::span<const std::string> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0, 1)");
  if (labels.empty()) throw DataError("cannot split an empty corpus");

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw DataError("class '" + label + "' has fewer than 2 songs; cannot split");
    }
  }

  const double n = static_cast<double>(labels.size());
  const auto test_total =
      labels.size() - static_cast<std::size_t>(std::floor(n * ratio + 1e-9));

  // Floor quotas, then hand out the remaining test slots by largest remainder
  // (ties to the earlier class in label order).
  struct Quota {
    std::string label;
    std::size_t test = 0;
    double remainder = 0.0;
    std::size_t size = 0;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [label, members] : by_class) {
    const double exact = static_cast<double>(members.size()) * (1.0 - ratio);
    Quota q{label, static_cast<std::size_t>(std::floor(exact + 1e-9)), 0.0, members.size()};
    q.remainder = exact - static_cast<double>(q.test);
    quotas.push_back(q);
    assigned += q.test;
  }
  std::vector<std::size_t> by_remainder(quotas.size());
  std::iota(by_remainder.begin(), by_remainder.end(), std::size_t{0});
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t k = 0; assigned < test_total && k < by_remainder.size(); ++k) {
    auto& q = quotas[by_remainder[k]];
    if (q.test + 1 < q.size) {
      ++q.test;
      ++assigned;
    }
  }
  for (auto& q : quotas) q.test = std::clamp<std::size_t>(q.test, 1, q.size - 1);

  Rng rng(seed);
  Split split;
  std::size_t qi = 0;
  for (auto& [label, members] : by_class) {
    std::vector<std::size_t> shuffled = members;
    rng.shuffle(std::span(shuffled));
    const std::size_t n_test = quotas[qi++].test;
    split.test.insert(split.test.end(), shuffled.begin(), shuffled.begin() + n_test);
    split.train.insert(split.train.end(), shuffled.begin() + n_test, shuffled.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

MetricsReport metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                     std::vector<std::string> labels) {
  const std::size_t l = labels.size();
  if (confusion.size() != l) throw DataError("confusion matrix does not match the label count");
  MetricsReport r;
  r.labels = std::move(labels);
  r.confusion = std::move(confusion);
  r.precision.assign(l, 0.0);
  r.recall.assign(l, 0.0);
  r.precision_undefined.assign(l, false);
  r.recall_undefined.assign(l, false);
  std::size_t correct = 0;
  std::vector<std::size_t> predicted(l, 0), gold(l, 0);
  for (std::size_t g = 0; g < l; ++g) {
    if (r.confusion[g].size() != l) throw DataError("confusion matrix is not square");
    for (std::size_t p = 0; p < l; ++p) {
      r.total += r.confusion[g][p];
      predicted[p] += r.confusion[g][p];
      gold[g] += r.confusion[g][p];
    }
    correct += r.confusion[g][g];
  }
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  r.micro_precision = r.accuracy;
  for (std::size_t c = 0; c < l; ++c) {
    const auto tp = static_cast<double>(r.confusion[c][c]);
    if (predicted[c] == 0) {
      r.precision_undefined[c] = true;
    } else {
      r.precision[c] = tp / static_cast<double>(predicted[c]);
    }
    if (gold[c] == 0) {
      r.recall_undefined[c] = true;
    } else {
      r.recall[c] = tp / static_cast<double>(gold[c]);
    }
  }
  r.macro_precision =
      l ? std::accumulate(r.precision.begin(), r.precision.end(), 0.0) / static_cast<double>(l) : 0.0;
  return r;
}

MetricsReport evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                       std::vector<std::string> labels) {
  if (predicted.size() != gold.size()) {
    throw DataError("prediction count " + std::to_string(predicted.size()) +
                    " does not match gold count " + std::to_string(gold.size()));
  }
  const std::size_t l = labels.size();
  std::vector<std::vector<std::size_t>> confusion(l, std::vector<std::size_t>(l, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= l || predicted[i] >= l) throw DataError("label index outside the class list");
    ++confusion[gold[i]][predicted[i]];
  }
  return metrics_from_confusion(std::move(confusion), std::move(labels));
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    classes.push_back({{"label", labels[c]},
                       {"precision", precision[c]},
                       {"precision_undefined", static_cast<bool>(precision_undefined[c])},
                       {"recall", recall[c]},
                       {"recall_undefined", static_cast<bool>(recall_undefined[c])}});
  }
  return {{"labels", labels},       {"confusion", confusion},
          {"total", total},         {"accuracy", accuracy},
          {"micro_precision", micro_precision},
          {"macro_precision", macro_precision},
          {"classes", classes}};
}

std::string MetricsReport::to_table() const {
  std::size_t width = 9;
  for (const auto& l : labels) width = std::max(width, l.size() + 2);
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right
      << std::setw(11) << "precision" << std::setw(10) << "recall" << std::setw(9) << "support"
      << '\n';
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const std::size_t support = std::accumulate(confusion[c].begin(), confusion[c].end(), std::size_t{0});
    out << std::left << std::setw(static_cast<int>(width)) << labels[c] << std::right
        << std::setw(10) << precision[c] << (precision_undefined[c] ? "*" : " ") << std::setw(10)
        << recall[c] << std::setw(9) << support << '\n';
  }
  out << "accuracy " << accuracy << "  macro precision " << macro_precision << "  n=" << total
      << '\n';
  out << "confusion (rows gold, columns predicted)\n";
  for (std::size_t g = 0; g < labels.size(); ++g) {
    out << std::left << std::setw(static_cast<int>(width)) << labels[g] << std::right;
    for (auto v : confusion[g]) out << std::setw(8) << v;
    out << '\n';
  }
  if (std::find(precision_undefined.begin(), precision_undefined.end(), true) !=
      precision_undefined.end()) {
    out << "* class never predicted; precision undefined, reported as 0\n";
  }
  return out.str();
}

std::vector<Melody> synthetic_corpus(const SyntheticConfig& config) {
  if (config.labels.size() != config.class_sizes.size() || config.labels.size() < 2) {
    throw std::invalid_argument("synthetic corpus needs one size inventory per label (>= 2)");
  }
  if (config.min_notes < 2 || config.max_notes < config.min_notes) {
    throw std::invalid_argument("synthetic song lengths must satisfy 2 <= min <= max");
  }
  Rng rng(config.seed);
  std::vector<Melody> corpus;
  for (std::size_t c = 0; c < config.labels.size(); ++c) {
    for (std::size_t s = 0; s < config.songs_per_class; ++s) {
      Melody m;
      std::ostringstream id;
      id << config.labels[c] << '_' << std::setw(4) << std::setfill('0') << s;
      m.id = id.str();
      m.label = config.labels[c];
      m.meters.push_back({0, {4, 4}});
      const std::size_t notes = config.min_notes + rng.index(config.max_notes - config.min_notes + 1);
      int pitch = 60 + static_cast<int>(rng.index(13)) - 6;
      for (std::size_t n = 0; n < notes; ++n) {
        if (n > 0) {
          const bool shared = !config.shared_sizes.empty() && rng.uniform() < config.noise;
          const auto& pool = shared ? config.shared_sizes : config.class_sizes[c];
          const int size = pool[rng.index(pool.size())];
          int dir = rng.uniform() < 0.5 ? 1 : -1;
          // Stay within two octaves of middle C.
          if (pitch + dir * size > 84 || pitch + dir * size < 36) dir = -dir;
          pitch += dir * size;
        }
        m.events.push_back({pitch, Rational(1), Rational(static_cast<std::int64_t>(n % 4)), n / 4});
      }
      corpus.push_back(std::move(m));
    }
  }
  return corpus;
}

bool motif_in_inventory(std::string_view multiword, std::span<const int> sizes) {
  for (const auto& part : split_multiword(multiword)) {
    const int size = IntervalToken::parse(part).size;
    if (std::find(sizes.begin(), sizes.end(), size) == sizes.end()) return false;
  }
  return true;
}

}  // namespace motif
