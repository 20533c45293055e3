#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motifnet/melody.hpp"
#include "motifnet/rational.hpp"

namespace motif {

using TokenSequence = std::vector<std::string>;

enum class TokenMode { intervallic, rhythmic };

TokenMode parse_token_mode(std::string_view name);
std::string_view to_string(TokenMode mode);

/// Chromatic interval: size in semitones plus direction digit.
struct IntervalToken {
  int size = 0;
  bool ascending = false;

  /// "<size><direction>", or "00" for a repeated note.
  std::string render() const;
  static IntervalToken parse(std::string_view text);

  friend bool operator==(const IntervalToken&, const IntervalToken&) = default;
};

/// Note/rest flag, downbeat flag and duration in quarter notes.
struct RhythmToken {
  bool is_note = true;
  bool is_downbeat = true;
  Rational duration{1};

  /// "<is_note>-<is_downbeat>-<decimal duration>", e.g. "1-1-0.5".
  std::string render() const;
  /// Durations truncated at four decimals resolve to the smallest-denominator
  /// rational (denominator <= 64) with the same rendering.
  static RhythmToken parse(std::string_view text);

  friend bool operator==(const RhythmToken&, const RhythmToken&) = default;
};

/// Throws DataError when either event is a rest.
IntervalToken interval_token(const NoteEvent& prev, const NoteEvent& next);

/// Beat unit of a meter in quarters: 3/2 for 6/8, 9/8, 12/8; else 1.
Rational beat_unit(const Meter& meter);
RhythmToken rhythm_token(const NoteEvent& event, const Meter& meter);

/// Intervallic mode skips rests (intervals join the surrounding pitches) and
/// requires two pitched events; rhythmic mode emits one token per event.
TokenSequence tokenize_melody(const Melody& melody, TokenMode mode);

/// Stride-1 n-grams joined by "_"; empty when the sequence is shorter than n.
TokenSequence sliding_multiwords(const TokenSequence& seq, std::size_t n);

inline constexpr char kMultiwordSeparator = '_';
std::vector<std::string> split_multiword(std::string_view rendering);

struct PhraseConfig {
  double delta = 5.0;
  double threshold = 1e-4;
};

/// Frequency-based merging of adjacent tokens into phrases. Statistics are
/// collected over the whole corpus, then applied greedily left to right; each
/// of the `n - 1` passes may merge already merged units again.
class PhraseModel {
 public:
  static PhraseModel learn(const std::vector<TokenSequence>& corpus, std::size_t n,
                           PhraseConfig config = {});

  TokenSequence apply(const TokenSequence& seq) const;

  /// Number of merge passes.
  std::size_t passes() const { return merges_.size(); }

 private:
  using PairSet = std::set<std::pair<std::string, std::string>>;
  static TokenSequence merge_pass(const TokenSequence& seq, const PairSet& pairs);

  // Per pass: adjacent pairs whose score clears the threshold.
  std::vector<PairSet> merges_;
};

/// Convenience wrapper: sliding n-grams, or phrase merging learned from `seq`.
enum class MultiwordMode { sliding, phrase };
TokenSequence build_multiwords(const TokenSequence& seq, std::size_t n,
                               MultiwordMode mode = MultiwordMode::sliding,
                               PhraseConfig config = {});

/// Tokenized corpus line: "id<TAB>label<TAB>tok tok ...".
struct TokenizedSong {
  std::string id;
  std::string label;
  TokenSequence tokens;

  friend bool operator==(const TokenizedSong&, const TokenizedSong&) = default;
};

std::string write_token_file(const std::vector<TokenizedSong>& songs);
std::vector<TokenizedSong> read_token_file(std::string_view text);

}  // namespace motif
