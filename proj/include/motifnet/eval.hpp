#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "motifnet/melody.hpp"

namespace motif {

struct Split {
  std::vector<std::size_t> train;  // indices into the corpus, ascending
  std::vector<std::size_t> test;
};

/// Seeded, label-stratified split. The test set holds N - floor(N * ratio)
/// items, apportioned across classes by largest remainder; every class keeps
/// at least one item on each side. Throws DataError for a class with fewer
/// than two items.
Split split_dataset(std::span<const std::string> labels, double ratio, std::uint64_t seed);

struct MetricsReport {
  std::vector<std::string> labels;
  /// confusion[gold][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  /// Set when a class was never predicted (precision reported as 0).
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;
  double macro_precision = 0.0;
  double micro_precision = 0.0;  // equals accuracy for single-label prediction

  nlohmann::json to_json() const;
  /// Aligned text table of per-class rates and the confusion matrix.
  std::string to_table() const;
};

/// Throws DataError when the sequences differ in length or hold a label
/// outside 0..labels.size()-1.
MetricsReport evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                       std::vector<std::string> labels);

/// Rebuilds all rates from a confusion matrix.
MetricsReport metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                     std::vector<std::string> labels);

/// Generator of melodies whose intervallic motifs come from disjoint per-class
/// interval inventories. Class c draws interval sizes from `class_sizes[c]`
/// (both directions); with probability `noise` a step is drawn from
/// `shared_sizes` instead.
struct SyntheticConfig {
  std::vector<std::string> labels = {"class_a", "class_b"};
  std::vector<std::vector<int>> class_sizes = {{1, 2}, {4, 5, 7}};
  std::vector<int> shared_sizes = {0, 3};
  std::size_t songs_per_class = 200;
  std::size_t min_notes = 24;
  std::size_t max_notes = 40;
  double noise = 0.15;
  std::uint64_t seed = 0;
};

std::vector<Melody> synthetic_corpus(const SyntheticConfig& config);

/// True when every atomic interval of the multiword motif has a size from
/// `sizes` (used to decide which class inventory a motif belongs to).
bool motif_in_inventory(std::string_view multiword, std::span<const int> sizes);

}  // namespace motif
