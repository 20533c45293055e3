#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "motifnet/random.hpp"
#include "motifnet/tokenizer.hpp"

namespace motif {

/// Token <-> index bijection. Indices follow descending count, ties broken by
/// lexicographic token order.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<TokenSequence>& corpus, std::size_t min_count);

  /// Rebuilds a vocabulary from (token, count) rows already in index order.
  static Vocabulary from_entries(std::vector<std::string> tokens, std::vector<std::uint64_t> counts,
                                 std::size_t min_count);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t min_count() const noexcept { return min_count_; }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::uint64_t count(std::size_t index) const { return counts_.at(index); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  /// Index sequence of `seq`, dropping out-of-vocabulary tokens.
  std::vector<std::size_t> encode(const TokenSequence& seq) const;

  /// FNV-1a over the token list; identifies the vocabulary a model was trained with.
  std::uint64_t hash() const;

  /// TSV rows "token<TAB>count<TAB>index".
  std::string to_tsv() const;
  static Vocabulary from_tsv(std::string_view text);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_count_ = 1;
};

/// Unigram^power distribution for negative sampling, drawn in O(1) through
/// Walker's alias table.
class SamplingDist {
 public:
  SamplingDist(const Vocabulary& vocab, double power = 0.75);

  std::size_t size() const noexcept { return probabilities_.size(); }
  double probability(std::size_t index) const { return probabilities_.at(index); }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }

  std::size_t draw(Rng& rng) const;

 private:
  std::vector<double> probabilities_;
  std::vector<double> accept_;
  std::vector<std::size_t> alias_;
};

}  // namespace motif
