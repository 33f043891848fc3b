#include <vector>

#include "doctest.h"
#include "xmusic/error.hpp"
#include "xmusic/midi.hpp"
#include "xmusic/synthetic.hpp"

using namespace xmusic;
using Bytes = std::vector<std::uint8_t>;

namespace {

// Bytes written out by hand from the SMF layout:
//   MThd, length 6, format 0, 1 track, division 480 (0x01E0)
//   MTrk, length 16:
//     00 C0 <prog>     program change on channel 0
//     00 90 3C 64      note-on pitch 60 velocity 100
//     83 60 80 3C 40   delta 480 (VLQ 0x83 0x60), note-off pitch 60
//     00 FF 2F 00      end of track
Bytes one_note_file(std::uint8_t program) {
  return {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
          'M', 'T', 'r', 'k', 0, 0, 0, 16,
          0x00, 0xC0, program,
          0x00, 0x90, 0x3C, 0x64,
          0x83, 0x60, 0x80, 0x3C, 0x40,
          0x00, 0xFF, 0x2F, 0x00};
}

}  // namespace

TEST_CASE("hand-built single-note file") {
  Score s = midi::parse_midi(one_note_file(0));
  CHECK(s.ticks_per_quarter == 480);
  REQUIRE(s.tracks.size() == 1);
  CHECK(s.tracks[0].instrument == InstrumentClass::Piano);
  REQUIRE(s.tracks[0].notes.size() == 1);
  CHECK(s.tracks[0].notes[0] == Note{60, 0, 480, 100});
}

TEST_CASE("program change 25 on a melodic channel is a guitar") {
  Score s = midi::parse_midi(one_note_file(25));
  REQUIRE(s.tracks.size() == 1);
  CHECK(s.tracks[0].instrument == InstrumentClass::Guitar);
}

TEST_CASE("empty track gives an empty score") {
  Bytes b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1, 0, 1, 0x01, 0xE0,
             'M', 'T', 'r', 'k', 0, 0, 0, 4, 0x00, 0xFF, 0x2F, 0x00};
  Score s = midi::parse_midi(b);
  CHECK(s.note_count() == 0);
  CHECK(s.tracks.empty());
}

TEST_CASE("running status, velocity-zero note-off and drum channel") {
  Bytes b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x00, 0x60,  // 96 tpq
             'M', 'T', 'r', 'k', 0, 0, 0, 17,
             0x00, 0x99, 0x24, 0x50,  // drum note-on key 36
             0x00, 0x26, 0x50,        // running status: key 38
             0x30, 0x24, 0x00,        // +48: key 36 off via velocity 0
             0x00, 0x26, 0x00,        // key 38 off
             0x00, 0xFF, 0x2F, 0x00};
  Score s = midi::parse_midi(b);
  REQUIRE(s.tracks.size() == 1);
  CHECK(s.tracks[0].instrument == InstrumentClass::Drum);
  REQUIRE(s.tracks[0].notes.size() == 2);
  CHECK(s.tracks[0].notes[0] == Note{36, 0, 48, 80});
  CHECK(s.tracks[0].notes[1] == Note{38, 0, 48, 80});
}

TEST_CASE("unterminated note closes at track end") {
  Bytes b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
             'M', 'T', 'r', 'k', 0, 0, 0, 9,
             0x00, 0x90, 0x40, 0x40,
             0x83, 0x60, 0xFF, 0x2F, 0x00};
  midi::ParseReport report;
  Score s = midi::parse_midi(b, &report);
  CHECK(report.unresolved_notes == 1);
  REQUIRE(s.note_count() == 1);
  CHECK(s.tracks[0].notes[0].offset == 480);
}

TEST_CASE("tempo and time signature meta events") {
  Bytes b = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
             'M', 'T', 'r', 'k', 0, 0, 0, 19,
             0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,  // 500000 us/qn = 120 bpm
             0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08,  // 3/4
             0x00, 0xFF, 0x2F, 0x00};
  Score s = midi::parse_midi(b);
  REQUIRE(s.tempo_map.size() == 1);
  CHECK(s.tempo_map[0].bpm == doctest::Approx(120.0));
  CHECK(s.time_signature == TimeSignature{3, 4});
}

TEST_CASE("malformed inputs") {
  CHECK_THROWS_AS(midi::parse_midi(Bytes{}), Error);
  Bytes bad_magic = one_note_file(0);
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(midi::parse_midi(bad_magic), Error);
  Bytes truncated = one_note_file(0);
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(midi::parse_midi(truncated), Error);
  Bytes format2 = one_note_file(0);
  format2[9] = 2;
  CHECK_THROWS_AS(midi::parse_midi(format2), Error);
  Bytes smpte = one_note_file(0);
  smpte[12] = 0xE7;
  CHECK_THROWS_AS(midi::parse_midi(smpte), Error);
  try {
    midi::parse_midi(bad_magic);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedFile);
  }
}

TEST_CASE("serializer writes format 1 at 480 ticks per quarter") {
  Score s;
  s.tempo_map = {{0, 122.0}};
  s.tracks.push_back({InstrumentClass::Piano, {{60, 0, 480, 100}}});
  auto bytes = midi::serialize_midi(s);
  REQUIRE(bytes.size() > 14);
  CHECK(bytes[8] == 0);
  CHECK(bytes[9] == 1);
  CHECK(bytes[10] == 0);
  CHECK(bytes[11] == 2);  // conductor + one instrument track
  CHECK(bytes[12] == 0x01);
  CHECK(bytes[13] == 0xE0);
}

TEST_CASE("parse after serialize reproduces any quantized score") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    Score s = synthetic::random_quantized_score(rng);
    Score back = quantize_score(midi::parse_midi(midi::serialize_midi(s)));
    CHECK(back == s);
  }
}
