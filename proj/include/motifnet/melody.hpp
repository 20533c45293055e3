#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motifnet/rational.hpp"

namespace motif {

struct Meter {
  int numerator = 4;
  int denominator = 4;

  /// Measure length in quarter notes.
  Rational capacity() const { return Rational(4 * numerator, denominator); }

  friend bool operator==(const Meter&, const Meter&) = default;
};

/// Meter in force from `measure` onward.
struct MeterChange {
  std::size_t measure = 0;
  Meter meter;

  friend bool operator==(const MeterChange&, const MeterChange&) = default;
};

struct NoteEvent {
  std::optional<int> pitch;  // MIDI number; empty for a rest
  Rational duration;         // quarter notes
  Rational onset_in_measure;
  std::size_t measure_index = 0;

  bool is_rest() const noexcept { return !pitch.has_value(); }

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct Melody {
  std::string id;
  std::string label;
  std::vector<MeterChange> meters;  // sorted by measure, first at measure 0
  std::vector<NoteEvent> events;

  Meter meter_at(std::size_t measure) const;
  std::size_t pitched_count() const;

  friend bool operator==(const Melody&, const Melody&) = default;
};

/// Throws DataError when ordering, monophony, duration, pitch range or
/// measure capacity invariants do not hold.
void validate(const Melody& melody);

/// Parses the single-spine **kern subset: `**kern`, `*M<n>/<d>`, notes
/// `<dur><pitch><dots>` with `#`/`-`/`n` accidentals, rests `<dur>r`,
/// barlines `=...` and the `*-` terminator. Comments, beams, slurs, phrase
/// marks and non-meter interpretations are ignored; ties, grace notes and
/// spine splits are rejected. Throws ParseError with the offending line.
Melody parse_kern(std::string_view text, std::string id = {}, std::string label = {});

struct CorpusSource {
  std::filesystem::path path;
  std::string label;
};

struct CorpusDiagnostics {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> messages;  // one per skipped file
};

struct LabeledCorpus {
  std::vector<Melody> melodies;
  CorpusDiagnostics diagnostics;
};

/// Loads kern files (`.krn`) and canonical JSONL files (`.jsonl`). Directory
/// sources are expanded to their kern/JSONL files. Sources are read in sorted
/// path order; unparseable files are skipped and reported. Melody ids default
/// to the file stem. Throws DataError on an empty result or duplicate ids.
LabeledCorpus load_corpus(const std::vector<CorpusSource>& sources);

/// One JSON object per line: {"events":[{"dur":[n,d],"measure":m,
/// "onset":[n,d],"pitch":p|null},...],"id":..,"label":..,
/// "meters":[{"den":d,"measure":m,"num":n},...]}.
std::string write_jsonl(const std::vector<Melody>& corpus);
std::vector<Melody> read_jsonl(std::string_view text);

}  // namespace motif
