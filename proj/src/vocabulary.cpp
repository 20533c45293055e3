#include "motifnet/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "motifnet/errors.hpp"

namespace motif {

Vocabulary Vocabulary::build(const std::vector<TokenSequence>& corpus, std::size_t min_count) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq) ++counts[tok];
  }
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [tok, c] : counts) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  if (kept.empty()) {
    throw DataError("vocabulary is empty after pruning with min_count " + std::to_string(min_count));
  }
  // std::map iteration is lexicographic, so a stable sort keeps that order on ties.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens;
  std::vector<std::uint64_t> cs;
  for (auto& [tok, c] : kept) {
    tokens.push_back(tok);
    cs.push_back(c);
  }
  return from_entries(std::move(tokens), std::move(cs), min_count);
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> tokens,
                                    std::vector<std::uint64_t> counts, std::size_t min_count) {
  if (tokens.size() != counts.size()) throw DataError("token/count length mismatch");
  if (tokens.empty()) throw DataError("empty vocabulary");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.counts_ = std::move(counts);
  v.min_count_ = min_count;
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw DataError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Vocabulary::encode(const TokenSequence& seq) const {
  std::vector<std::size_t> ids;
  ids.reserve(seq.size());
  for (const auto& tok : seq) {
    if (auto idx = find(tok)) ids.push_back(*idx);
  }
  return ids;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& tok : tokens_) {
    for (char c : tok) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

std::string Vocabulary::to_tsv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << counts_[i] << '\t' << i << '\n';
  }
  return out.str();
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::size_t line_no = 0;
  std::uint64_t min_seen = UINT64_MAX;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    std::uint64_t count = 0;
    std::size_t index = 0;
    if (!std::getline(row, tok, '\t') || !(row >> count >> index) || index != tokens.size()) {
      throw ParseError(line_no, "expected token<TAB>count<TAB>index in index order");
    }
    tokens.push_back(tok);
    counts.push_back(count);
    min_seen = std::min(min_seen, count);
  }
  return from_entries(std::move(tokens), std::move(counts),
                      static_cast<std::size_t>(min_seen == UINT64_MAX ? 1 : min_seen));
}

SamplingDist::SamplingDist(const Vocabulary& vocab, double power) {
  const std::size_t n = vocab.size();
  if (n == 0) throw DataError("sampling distribution over an empty vocabulary");
  probabilities_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    probabilities_[i] = std::pow(static_cast<double>(vocab.count(i)), power);
  }
  const double total = std::accumulate(probabilities_.begin(), probabilities_.end(), 0.0);
  for (auto& p : probabilities_) p /= total;

  // Vose's construction of the alias table.
  accept_.assign(n, 1.0);
  alias_.resize(n);
  std::iota(alias_.begin(), alias_.end(), std::size_t{0});
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probabilities_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    accept_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
}

std::size_t SamplingDist::draw(Rng& rng) const {
  const std::size_t column = rng.index(accept_.size());
  return rng.uniform() < accept_[column] ? column : alias_[column];
}

}  // namespace motif
