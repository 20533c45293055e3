#include "motifnet/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>

#include "motifnet/errors.hpp"

namespace motif {

std::string format_decimal(Rational value) {
  std::string out;
  std::int64_t num = value.num();
  const std::int64_t den = value.den();
  if (num < 0) {
    out.push_back('-');
    num = -num;
  }
  out += std::to_string(num / den);
  std::int64_t rem = num % den;
  if (rem == 0) return out;
  out.push_back('.');
  for (int place = 0; place < 4 && rem != 0; ++place) {
    rem *= 10;
    out.push_back(static_cast<char>('0' + rem / den));
    rem %= den;
  }
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.pop_back();
  return out;
}

TokenMode parse_token_mode(std::string_view name) {
  if (name == "intervallic") return TokenMode::intervallic;
  if (name == "rhythmic") return TokenMode::rhythmic;
  throw std::invalid_argument("unknown token mode '" + std::string(name) + "'");
}

std::string_view to_string(TokenMode mode) {
  return mode == TokenMode::intervallic ? "intervallic" : "rhythmic";
}

std::string IntervalToken::render() const {
  if (size == 0) return "00";
  return std::to_string(size) + (ascending ? '1' : '0');
}

IntervalToken IntervalToken::parse(std::string_view text) {
  if (text == "00") return {0, false};
  if (text.size() < 2 || (text.back() != '0' && text.back() != '1')) {
    throw DataError("invalid interval token '" + std::string(text) + "'");
  }
  int size = 0;
  const auto digits = text.substr(0, text.size() - 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), size);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || size <= 0 ||
      digits.front() == '0') {
    throw DataError("invalid interval token '" + std::string(text) + "'");
  }
  return {size, text.back() == '1'};
}

std::string RhythmToken::render() const {
  std::string out;
  out += is_note ? '1' : '0';
  out += '-';
  out += is_downbeat ? '1' : '0';
  out += '-';
  out += format_decimal(duration);
  return out;
}

namespace {

std::optional<Rational> parse_decimal_duration(std::string_view text) {
  const auto dot = text.find('.');
  const auto int_part = text.substr(0, dot);
  const auto frac_part = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (int_part.empty() || frac_part.size() > 4) return std::nullopt;
  if (dot != std::string_view::npos && frac_part.empty()) return std::nullopt;
  auto all_digits = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!all_digits(int_part) || !all_digits(frac_part)) return std::nullopt;

  for (std::int64_t den = 1; den <= 64; ++den) {
    // Candidate numerators bracketing text * den.
    const double approx = std::strtod(std::string(text).c_str(), nullptr) * static_cast<double>(den);
    for (std::int64_t num = static_cast<std::int64_t>(approx) - 1;
         num <= static_cast<std::int64_t>(approx) + 1; ++num) {
      if (num <= 0) continue;
      const Rational candidate(num, den);
      if (candidate.den() == den && format_decimal(candidate) == text) return candidate;
    }
  }
  return std::nullopt;
}

}  // namespace

RhythmToken RhythmToken::parse(std::string_view text) {
  auto bad = [&] { return DataError("invalid rhythm token '" + std::string(text) + "'"); };
  if (text.size() < 5 || text[1] != '-' || text[3] != '-') throw bad();
  if ((text[0] != '0' && text[0] != '1') || (text[2] != '0' && text[2] != '1')) throw bad();
  const auto duration = parse_decimal_duration(text.substr(4));
  if (!duration) throw bad();
  return {text[0] == '1', text[2] == '1', *duration};
}

IntervalToken interval_token(const NoteEvent& prev, const NoteEvent& next) {
  if (prev.is_rest() || next.is_rest()) {
    throw DataError("interval token requires two pitched events");
  }
  const int diff = *next.pitch - *prev.pitch;
  return {std::abs(diff), diff > 0};
}

Rational beat_unit(const Meter& meter) {
  const bool compound = meter.denominator == 8 &&
                        (meter.numerator == 6 || meter.numerator == 9 || meter.numerator == 12);
  return compound ? Rational(3, 2) : Rational(1);
}

RhythmToken rhythm_token(const NoteEvent& event, const Meter& meter) {
  const Rational beats = event.onset_in_measure / beat_unit(meter);
  return {!event.is_rest(), beats.is_integer(), event.duration};
}

TokenSequence tokenize_melody(const Melody& melody, TokenMode mode) {
  TokenSequence tokens;
  if (mode == TokenMode::rhythmic) {
    tokens.reserve(melody.events.size());
    for (const auto& e : melody.events) {
      tokens.push_back(rhythm_token(e, melody.meter_at(e.measure_index)).render());
    }
    return tokens;
  }
  const NoteEvent* prev = nullptr;
  for (const auto& e : melody.events) {
    if (e.is_rest()) continue;
    if (prev) tokens.push_back(interval_token(*prev, e).render());
    prev = &e;
  }
  if (tokens.empty()) {
    throw DataError("melody '" + melody.id + "' has fewer than 2 pitched events");
  }
  return tokens;
}

TokenSequence sliding_multiwords(const TokenSequence& seq, std::size_t n) {
  TokenSequence out;
  if (n == 0 || seq.size() < n) return out;
  out.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::string word = seq[i];
    for (std::size_t k = 1; k < n; ++k) {
      word += kMultiwordSeparator;
      word += seq[i + k];
    }
    out.push_back(std::move(word));
  }
  return out;
}

std::vector<std::string> split_multiword(std::string_view rendering) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = rendering.find(kMultiwordSeparator, start);
    parts.emplace_back(rendering.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

PhraseModel PhraseModel::learn(const std::vector<TokenSequence>& corpus, std::size_t n,
                               PhraseConfig config) {
  PhraseModel model;
  std::vector<TokenSequence> current = corpus;
  for (std::size_t pass = 0; pass + 1 < n; ++pass) {
    std::map<std::string, double> unigrams;
    std::map<std::pair<std::string, std::string>, double> bigrams;
    for (const auto& seq : current) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        unigrams[seq[i]] += 1.0;
        if (i + 1 < seq.size()) bigrams[{seq[i], seq[i + 1]}] += 1.0;
      }
    }
    PairSet accepted;
    for (const auto& [pair, count] : bigrams) {
      const double score =
          (count - config.delta) / (unigrams[pair.first] * unigrams[pair.second]);
      if (score > config.threshold) accepted.insert(pair);
    }
    for (auto& seq : current) seq = merge_pass(seq, accepted);
    model.merges_.push_back(std::move(accepted));
  }
  return model;
}

TokenSequence PhraseModel::merge_pass(const TokenSequence& seq, const PairSet& pairs) {
  TokenSequence out;
  out.reserve(seq.size());
  std::size_t i = 0;
  while (i < seq.size()) {
    if (i + 1 < seq.size() && pairs.contains({seq[i], seq[i + 1]})) {
      out.push_back(seq[i] + kMultiwordSeparator + seq[i + 1]);
      i += 2;
    } else {
      out.push_back(seq[i]);
      ++i;
    }
  }
  return out;
}

TokenSequence PhraseModel::apply(const TokenSequence& seq) const {
  TokenSequence current = seq;
  for (const auto& pairs : merges_) current = merge_pass(current, pairs);
  return current;
}

TokenSequence build_multiwords(const TokenSequence& seq, std::size_t n, MultiwordMode mode,
                               PhraseConfig config) {
  if (mode == MultiwordMode::sliding) return sliding_multiwords(seq, n);
  if (seq.size() < n) return {};
  return PhraseModel::learn({seq}, n, config).apply(seq);
}

std::string write_token_file(const std::vector<TokenizedSong>& songs) {
  std::string out;
  for (const auto& song : songs) {
    out += song.id;
    out += '\t';
    out += song.label;
    out += '\t';
    for (std::size_t i = 0; i < song.tokens.size(); ++i) {
      if (i > 0) out += ' ';
      out += song.tokens[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<TokenizedSong> read_token_file(std::string_view text) {
  std::vector<TokenizedSong> songs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    ++line_no;
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos) throw ParseError(line_no, "expected id<TAB>label<TAB>tokens");
    TokenizedSong song;
    song.id = std::string(line.substr(0, tab1));
    song.label = std::string(line.substr(tab1 + 1, tab2 - tab1 - 1));
    std::string_view rest = line.substr(tab2 + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      auto sp = rest.find(' ', pos);
      if (sp == std::string_view::npos) sp = rest.size();
      if (sp > pos) song.tokens.emplace_back(rest.substr(pos, sp - pos));
      pos = sp + 1;
    }
    songs.push_back(std::move(song));
  }
  return songs;
}

}  // namespace motif
