#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "motifnet/errors.hpp"
#include "motifnet/melody.hpp"
#include "motifnet/random.hpp"

using namespace motif;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("motifnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Random valid melody: measures of 4/4 or 3/4 (or 6/8 after a change), durations
// from a menu including triplets.
Melody random_melody(Rng& rng, int id) {
  static const Rational kDurations[] = {Rational(1), Rational(1, 2), Rational(1, 3),
                                        Rational(3, 2), Rational(1, 4), Rational(2)};
  Melody m;
  m.id = "song" + std::to_string(id);
  m.label = rng.uniform() < 0.5 ? "german" : "chinese";
  m.meters.push_back({0, {4, 4}});
  const std::size_t measures = 1 + rng.index(6);
  for (std::size_t k = 0; k < measures; ++k) {
    if (k == 3) m.meters.push_back({3, {6, 8}});
    const Rational cap = m.meter_at(k).capacity();
    Rational pos;
    while (true) {
      const Rational d = kDurations[rng.index(6)];
      if (pos + d > cap) break;
      NoteEvent e;
      if (rng.uniform() < 0.85) e.pitch = static_cast<int>(rng.index(128));
      e.duration = d;
      e.onset_in_measure = pos;
      e.measure_index = k;
      m.events.push_back(e);
      pos += d;
    }
  }
  if (m.events.empty()) m.events.push_back({60, Rational(1), Rational(0), 0});
  return m;
}

}  // namespace

TEST_CASE("parse_kern reads notes with measure positions") {
  const Melody m = parse_kern("**kern\n*M4/4\n4c\n8d\n=\n*-");
  REQUIRE(m.events.size() == 2);
  CHECK(m.events[0].pitch == 60);
  CHECK(m.events[0].duration == Rational(1));
  CHECK(m.events[0].onset_in_measure == Rational(0));
  CHECK(m.events[1].pitch == 62);
  CHECK(m.events[1].duration == Rational(1, 2));
  CHECK(m.events[1].onset_in_measure == Rational(1));
  CHECK(m.events[0].measure_index == 0);
  CHECK(m.events[1].measure_index == 0);
  CHECK(m.meter_at(0) == Meter{4, 4});
}

TEST_CASE("parse_kern reads rests") {
  const Melody m = parse_kern("**kern\n*M2/4\n4r\n4c\n=\n*-");
  REQUIRE(m.events.size() == 2);
  CHECK(m.events[0].is_rest());
  CHECK(m.events[0].duration == Rational(1));
  CHECK(m.events[0].onset_in_measure == Rational(0));
  CHECK(m.events[1].pitch == 60);
  CHECK(m.events[1].onset_in_measure == Rational(1));
}

TEST_CASE("parse_kern rejects an unknown pitch token with its line") {
  try {
    parse_kern("**kern\n*M4/4\n4q\n*-");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("unknown pitch token") != std::string::npos);
  }
}

TEST_CASE("kern pitch spelling, octaves and dots") {
  const Melody m = parse_kern(
      "!!!OTL: test\n**kern\n*clefG2\n*k[f#]\n*M4/4\n*MM120\n"
      "{8cc#L\n8B-J\n4.C\n8CC}\n4ccc\n=1\n2.r\n4e-\n==\n*-\n");
  REQUIRE(m.events.size() == 7);
  CHECK(m.events[0].pitch == 73);  // C#5
  CHECK(m.events[1].pitch == 58);  // Bb3
  CHECK(m.events[2].pitch == 48);
  CHECK(m.events[2].duration == Rational(3, 2));
  CHECK(m.events[3].pitch == 36);
  CHECK(m.events[4].pitch == 84);
  CHECK(m.events[5].is_rest());
  CHECK(m.events[5].duration == Rational(3));
  CHECK(m.events[5].measure_index == 1);
  CHECK(m.events[6].pitch == 63);
  CHECK(m.events[6].onset_in_measure == Rational(3));
}

TEST_CASE("triplets and double dots are exact") {
  const Melody m = parse_kern("**kern\n*M2/4\n12c\n12d\n12e\n8..f\n32g\n=\n*-");
  CHECK(m.events[0].duration == Rational(1, 3));
  CHECK(m.events[2].onset_in_measure == Rational(2, 3));
  CHECK(m.events[3].duration == Rational(7, 8));
  CHECK(m.events[4].onset_in_measure == Rational(15, 8));
}

TEST_CASE("meter change applies from the next measure") {
  const Melody m = parse_kern("**kern\n*M3/4\n2c\n*M2/4\n4d\n=\n2e\n=\n*-");
  CHECK(m.meter_at(0) == Meter{3, 4});
  CHECK(m.meter_at(1) == Meter{2, 4});
  // A meter record at the start of a measure applies immediately.
  const Melody n = parse_kern("**kern\n*M3/4\n2.c\n=\n*M2/4\n2d\n=\n*-");
  CHECK(n.meter_at(1) == Meter{2, 4});
  CHECK(n.meters.size() == 2);
}

TEST_CASE("kern error cases") {
  CHECK_THROWS_AS(parse_kern("*M4/4\n4c\n*-"), ParseError);                  // no header
  CHECK_THROWS_AS(parse_kern("**kern\t**kern\n*M4/4\n4c\t4e\n*-"), ParseError);  // two spines
  CHECK_THROWS_AS(parse_kern("**kern\n*M4/4\n*^\n4c\t4e\n*-"), ParseError);  // spine split
  CHECK_THROWS_AS(parse_kern("**kern\n*M2/4\n4c\n4d\n4e\n=\n*-"), ParseError);  // overfull
  CHECK_THROWS_AS(parse_kern("**kern\n*M4/4\n[4c\n4c]\n*-"), ParseError);    // tie
  CHECK_THROWS_AS(parse_kern("**kern\n*M4/4\n4c 4e\n*-"), ParseError);       // chord
  CHECK_THROWS_AS(parse_kern("**kern\n4c\n*-"), ParseError);                 // no meter
  CHECK_THROWS_AS(parse_kern("**kern\n*M3/5\n4c\n*-"), ParseError);          // bad meter
  CHECK_THROWS_AS(parse_kern("**kern\n*M4/4\n*-"), ParseError);              // no notes
  try {
    parse_kern("**kern\n*M2/4\n4c\n4d\n4e\n=\n*-");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
  }
}

TEST_CASE("parse_kern is total on random byte soup") {
  Rng rng(7);
  const std::string alphabet = "**kern\n*M4/=.#-rcdefgabABCDEFG0123456789[]_q{}LJ;\t \r!";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text = trial % 2 ? "**kern\n*M4/4\n" : "";
    const std::size_t len = rng.index(60);
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng.index(alphabet.size())]);
    try {
      const Melody m = parse_kern(text);
      CHECK_NOTHROW(validate(m));
    } catch (const ParseError&) {
    }
  }
}

TEST_CASE("JSONL round trip is the identity on generated melodies") {
  Rng rng(11);
  std::vector<Melody> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(random_melody(rng, i));
  for (const auto& m : corpus) REQUIRE_NOTHROW(validate(m));
  const std::string text = write_jsonl(corpus);
  CHECK(read_jsonl(text) == corpus);
  // one object per line
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == corpus.size());
}

TEST_CASE("triplet durations serialize as integer pairs") {
  Melody m = parse_kern("**kern\n*M2/4\n12c\n12d\n12e\n4f\n=\n*-", "trip", "german");
  const std::string line = write_jsonl({m});
  CHECK(line.find("\"dur\":[1,3]") != std::string::npos);
  CHECK(read_jsonl(line).front().events[1].onset_in_measure == Rational(1, 3));
}

TEST_CASE("read_jsonl reports the failing line") {
  Melody m = parse_kern("**kern\n*M4/4\n4c\n4d\n*-", "a", "german");
  std::string text = write_jsonl({m, m});
  text.resize(text.size() - 10);  // truncate the second object
  try {
    read_jsonl(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("validate catches broken invariants") {
  Melody m = parse_kern("**kern\n*M2/4\n4c\n4d\n=\n*-", "a", "x");
  Melody overlap = m;
  overlap.events[1].onset_in_measure = Rational(1, 2);
  CHECK_THROWS_AS(validate(overlap), DataError);
  Melody overfull = m;
  overfull.events[1].duration = Rational(2);
  CHECK_THROWS_AS(validate(overfull), DataError);
  Melody bad_pitch = m;
  bad_pitch.events[0].pitch = 128;
  CHECK_THROWS_AS(validate(bad_pitch), DataError);
}

TEST_CASE("load_corpus: valid files, skips, errors") {
  const auto dir = temp_dir("load");
  write(dir / "b.krn", "**kern\n*M4/4\n4c\n4d\n4e\n4f\n=\n*-\n");
  write(dir / "a.krn", "**kern\n*M3/4\n4g\n4e\n4c\n=\n*-\n");
  {
    const auto corpus = load_corpus({{dir / "a.krn", "german"}, {dir / "b.krn", "german"}});
    CHECK(corpus.melodies.size() == 2);
    CHECK(corpus.diagnostics.skipped == 0);
    CHECK(corpus.melodies[0].id == "a");  // sorted by path
    CHECK(corpus.melodies[1].label == "german");
  }
  write(dir / "c.krn", "**kern\n*M4/4\n4c\n4x\n*-\n");
  {
    const auto corpus = load_corpus({{dir / "a.krn", "german"}, {dir / "c.krn", "german"}});
    CHECK(corpus.melodies.size() == 1);
    CHECK(corpus.diagnostics.skipped == 1);
    REQUIRE(corpus.diagnostics.messages.size() == 1);
    CHECK(corpus.diagnostics.messages[0].find("c.krn") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(load_corpus({}), "empty corpus", DataError);

  // directory expansion plus JSONL input, duplicate ids rejected
  const auto dir2 = temp_dir("load2");
  write(dir2 / "x.krn", "**kern\n*M4/4\n4c\n4d\n*-\n");
  write(dir2 / "more.jsonl", write_jsonl({parse_kern("**kern\n*M4/4\n4c\n4d\n*-\n", "x", "")}));
  CHECK_THROWS_AS(load_corpus({{dir2, "chinese"}}), DataError);
  std::filesystem::remove(dir2 / "more.jsonl");
  const auto ok = load_corpus({{dir2, "chinese"}});
  CHECK(ok.melodies.size() == 1);
  CHECK(ok.melodies[0].label == "chinese");
}

TEST_CASE("bundled fixtures all load") {
  const auto corpus = load_corpus({{std::filesystem::path(MOTIFNET_FIXTURE_DIR) / "german", "german"},
                                   {std::filesystem::path(MOTIFNET_FIXTURE_DIR) / "chinese", "chinese"}});
  CHECK(corpus.melodies.size() >= 8);
  CHECK(corpus.diagnostics.skipped == 1);  // broken.krn is deliberately corrupt
  for (const auto& m : corpus.melodies) CHECK_NOTHROW(validate(m));
}
