#include "motifnet/melody.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "motifnet/errors.hpp"

namespace motif {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

Meter parse_meter(std::string_view body, std::size_t line) {
  const auto slash = body.find('/');
  if (slash == std::string_view::npos) {
    throw ParseError(line, "unsupported meter '*M" + std::string(body) + "'");
  }
  const auto num = parse_int(body.substr(0, slash));
  const auto den = parse_int(body.substr(slash + 1));
  if (!num || !den || *num <= 0 || !is_power_of_two(*den)) {
    throw ParseError(line, "invalid meter '*M" + std::string(body) + "'");
  }
  return {*num, *den};
}

// Characters carrying beaming, slurs, phrasing, articulation or layout.
constexpr std::string_view kIgnoredMarks = "LJKk(){};'\"`~^<>/\\&?xXyvVuUmMwWtTsSR$:|,";

struct KernNote {
  std::optional<int> pitch;
  Rational duration;
};

KernNote parse_note(std::string_view token, std::size_t line) {
  std::string digits;
  int dots = 0;
  char letter = 0;
  int letter_count = 0;
  int accidental = 0;
  bool rest = false;

  auto unknown = [&](std::string_view detail) {
    throw ParseError(line, "unknown pitch token '" + std::string(token) + "'" + std::string(detail));
  };

  for (char ch : token) {
    if (ch >= '0' && ch <= '9') {
      if (letter_count > 0 || rest || dots > 0) unknown(" (duration after pitch)");
      digits.push_back(ch);
    } else if (ch == '.') {
      if (digits.empty()) unknown(" (dot without duration)");
      ++dots;
    } else if ((ch >= 'a' && ch <= 'g') || (ch >= 'A' && ch <= 'G')) {
      if (rest) unknown("");
      if (letter_count > 0 && ch != letter) unknown(" (mixed pitch letters)");
      letter = ch;
      ++letter_count;
    } else if (ch == 'r') {
      if (letter_count > 0) unknown("");
      rest = true;
    } else if (ch == '#' || ch == '-' || ch == 'n') {
      if (letter_count == 0) unknown(" (accidental without pitch)");
      if (ch == '#') ++accidental;
      if (ch == '-') --accidental;
    } else if (ch == '[' || ch == ']' || ch == '_') {
      throw ParseError(line, "ties are unsupported in '" + std::string(token) + "'");
    } else if (ch == 'q' || ch == 'Q' || ch == 'P' || ch == 'p') {
      unknown(" (grace notes are unsupported)");
    } else if (ch == ' ') {
      throw ParseError(line, "chords are unsupported in '" + std::string(token) + "'");
    } else if (kIgnoredMarks.find(ch) == std::string_view::npos) {
      unknown("");
    }
  }
  if (digits.empty()) throw ParseError(line, "missing duration in '" + std::string(token) + "'");
  if (!rest && letter_count == 0) unknown("");

  Rational base;
  if (std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; })) {
    // 0 = breve, 00 = longa
    base = Rational(8 << (digits.size() - 1));
  } else {
    const auto n = parse_int(digits);
    if (!n || *n <= 0) unknown("");
    base = Rational(4, *n);
  }
  Rational duration = base;
  Rational add = base;
  for (int i = 0; i < dots; ++i) {
    add = add / Rational(2);
    duration += add;
  }

  KernNote note{std::nullopt, duration};
  if (!rest) {
    static constexpr std::array<int, 7> kPitchClass = {9, 11, 0, 2, 4, 5, 7};  // a..g
    const bool lower = letter >= 'a';
    const int pc = kPitchClass[static_cast<std::size_t>((lower ? letter - 'a' : letter - 'A'))];
    const int octave = lower ? 3 + letter_count : 4 - letter_count;
    const int midi = 12 * (octave + 1) + pc + accidental;
    if (midi < 0 || midi > 127) {
      throw ParseError(line, "pitch out of MIDI range in '" + std::string(token) + "'");
    }
    note.pitch = midi;
  }
  return note;
}

}  // namespace

Meter Melody::meter_at(std::size_t measure) const {
  Meter m;
  for (const auto& change : meters) {
    if (change.measure > measure) break;
    m = change.meter;
  }
  return m;
}

std::size_t Melody::pitched_count() const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [](const NoteEvent& e) { return !e.is_rest(); }));
}

void validate(const Melody& melody) {
  auto fail = [&](const std::string& what) {
    throw DataError("melody '" + melody.id + "': " + what);
  };
  if (melody.events.empty()) fail("no events");
  if (melody.meters.empty() || melody.meters.front().measure != 0) {
    fail("meter must be defined from measure 0");
  }
  for (std::size_t i = 0; i < melody.meters.size(); ++i) {
    const auto& m = melody.meters[i].meter;
    if (m.numerator <= 0 || !is_power_of_two(m.denominator)) fail("invalid meter");
    if (i > 0 && melody.meters[i].measure <= melody.meters[i - 1].measure) {
      fail("meter changes out of order");
    }
  }
  const NoteEvent* prev = nullptr;
  for (const auto& e : melody.events) {
    if (e.duration <= Rational(0)) fail("non-positive duration");
    if (e.pitch && (*e.pitch < 0 || *e.pitch > 127)) fail("pitch out of range");
    if (e.onset_in_measure < Rational(0)) fail("negative onset");
    if (e.onset_in_measure + e.duration > melody.meter_at(e.measure_index).capacity()) {
      fail("measure " + std::to_string(e.measure_index) + " overfull");
    }
    if (prev) {
      if (e.measure_index < prev->measure_index) fail("events out of measure order");
      if (e.measure_index == prev->measure_index &&
          e.onset_in_measure < prev->onset_in_measure + prev->duration) {
        fail("overlapping or unordered events in measure " + std::to_string(e.measure_index));
      }
    }
    prev = &e;
  }
}

Melody parse_kern(std::string_view text, std::string id, std::string label) {
  Melody melody;
  melody.id = std::move(id);
  melody.label = std::move(label);

  const auto lines = split_lines(text);
  bool header_seen = false;
  std::optional<Meter> active;
  std::optional<Meter> pending;
  std::size_t measure = 0;
  bool measure_has_events = false;
  Rational position;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = lines[i];
    if (line.empty() || line.front() == '!') continue;
    if (line.find('\t') != std::string_view::npos) {
      throw ParseError(line_no, "polyphonic spine: only a single **kern column is supported");
    }
    if (!header_seen) {
      if (line != "**kern") throw ParseError(line_no, "missing **kern header");
      header_seen = true;
      continue;
    }
    if (line.front() == '*') {
      if (line == "*-") break;
      if (line == "*^" || line == "*v" || line == "*+" || line == "*x") {
        throw ParseError(line_no, "polyphonic spine: spine manipulators are unsupported");
      }
      if (line.starts_with("*M") && !line.starts_with("*MM")) {
        const Meter meter = parse_meter(line.substr(2), line_no);
        if (measure_has_events) {
          pending = meter;
        } else {
          active = meter;
        }
      }
      continue;
    }
    if (line.front() == '=') {
      if (measure_has_events) {
        ++measure;
        measure_has_events = false;
        position = Rational(0);
        if (pending) {
          active = pending;
          pending.reset();
        }
      }
      continue;
    }
    if (line == ".") continue;

    const KernNote note = parse_note(line, line_no);
    if (!active) throw ParseError(line_no, "note before any *M meter record");
    if (position + note.duration > active->capacity()) {
      throw ParseError(line_no, "meter violation: measure " + std::to_string(measure) + " overfull");
    }
    if (!measure_has_events &&
        (melody.meters.empty() || melody.meters.back().meter != *active)) {
      melody.meters.push_back({measure, *active});
    }
    melody.events.push_back({note.pitch, note.duration, position, measure});
    position += note.duration;
    measure_has_events = true;
  }
  if (!header_seen) throw ParseError(lines.size() + 1, "missing **kern header");
  if (melody.events.empty()) throw ParseError(lines.size(), "no notes or rests");
  return melody;
}

namespace {

nlohmann::json rational_json(Rational r) { return nlohmann::json::array({r.num(), r.den()}); }

Rational json_rational(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw DataError("rational must be an [num, den] integer pair");
  }
  return Rational(j[0].get<std::int64_t>(), j[1].get<std::int64_t>());
}

nlohmann::json melody_json(const Melody& m) {
  nlohmann::json meters = nlohmann::json::array();
  for (const auto& c : m.meters) {
    meters.push_back({{"measure", c.measure}, {"num", c.meter.numerator}, {"den", c.meter.denominator}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : m.events) {
    nlohmann::json ev = {{"dur", rational_json(e.duration)},
                         {"onset", rational_json(e.onset_in_measure)},
                         {"measure", e.measure_index}};
    ev["pitch"] = e.pitch ? nlohmann::json(*e.pitch) : nlohmann::json(nullptr);
    events.push_back(std::move(ev));
  }
  return {{"id", m.id}, {"label", m.label}, {"meters", meters}, {"events", events}};
}

Melody json_melody(const nlohmann::json& j) {
  Melody m;
  m.id = j.at("id").get<std::string>();
  m.label = j.at("label").get<std::string>();
  for (const auto& c : j.at("meters")) {
    m.meters.push_back({c.at("measure").get<std::size_t>(),
                        {c.at("num").get<int>(), c.at("den").get<int>()}});
  }
  for (const auto& e : j.at("events")) {
    NoteEvent ev;
    if (!e.at("pitch").is_null()) ev.pitch = e.at("pitch").get<int>();
    ev.duration = json_rational(e.at("dur"));
    ev.onset_in_measure = json_rational(e.at("onset"));
    ev.measure_index = e.at("measure").get<std::size_t>();
    m.events.push_back(ev);
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_kern_path(const std::filesystem::path& p) {
  const auto ext = p.extension();
  return ext == ".krn" || ext == ".kern";
}

}  // namespace

std::string write_jsonl(const std::vector<Melody>& corpus) {
  std::string out;
  for (const auto& m : corpus) {
    out += melody_json(m).dump();
    out += '\n';
  }
  return out;
}

std::vector<Melody> read_jsonl(std::string_view text) {
  std::vector<Melody> corpus;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      Melody m = json_melody(nlohmann::json::parse(lines[i]));
      validate(m);
      corpus.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(i + 1, std::string("malformed JSON: ") + e.what());
    } catch (const DataError& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  return corpus;
}

LabeledCorpus load_corpus(const std::vector<CorpusSource>& sources) {
  namespace fs = std::filesystem;
  std::vector<CorpusSource> files;
  for (const auto& src : sources) {
    if (fs::is_directory(src.path)) {
      for (const auto& entry : fs::directory_iterator(src.path)) {
        if (!entry.is_regular_file()) continue;
        const auto& p = entry.path();
        if (is_kern_path(p) || p.extension() == ".jsonl") files.push_back({p, src.label});
      }
    } else {
      files.push_back(src);
    }
  }
  std::sort(files.begin(), files.end(),
            [](const CorpusSource& a, const CorpusSource& b) { return a.path < b.path; });

  LabeledCorpus corpus;
  auto skip = [&](const fs::path& p, const std::string& why) {
    ++corpus.diagnostics.skipped;
    corpus.diagnostics.messages.push_back(p.string() + ": " + why);
  };
  auto accept = [&](Melody m, const fs::path& p) {
    if (m.pitched_count() < 2) {
      skip(p, "melody '" + m.id + "' has fewer than 2 pitched notes");
      return;
    }
    corpus.melodies.push_back(std::move(m));
  };

  for (const auto& src : files) {
    try {
      const std::string text = read_file(src.path);
      if (src.path.extension() == ".jsonl") {
        for (auto& m : read_jsonl(text)) {
          if (!src.label.empty()) m.label = src.label;
          accept(std::move(m), src.path);
        }
      } else {
        Melody m = parse_kern(text, src.path.stem().string(), src.label);
        validate(m);
        accept(std::move(m), src.path);
      }
    } catch (const DataError& e) {
      skip(src.path, e.what());
    }
  }
  corpus.diagnostics.loaded = corpus.melodies.size();
  if (corpus.melodies.empty()) throw DataError("empty corpus");

  std::set<std::string> ids;
  for (const auto& m : corpus.melodies) {
    if (!ids.insert(m.id).second) throw DataError("duplicate melody id '" + m.id + "'");
  }
  return corpus;
}

}  // namespace motif
