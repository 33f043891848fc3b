#include <cmath>
#include <set>

#include "doctest.h"
#include "xmusic/error.hpp"
#include "xmusic/score.hpp"
#include "xmusic/synthetic.hpp"

using namespace xmusic;

namespace {

// Nearest-bin oracle: enumerate every bin value and take the closest one,
// first bin on ties broken upward (the value above wins).
double nearest_tempo_by_enumeration(double bpm) {
  double clamped = std::min(224.0, std::max(32.0, bpm));
  double best = 32;
  for (int v = 32; v <= 224; v += 3)
    if (std::abs(v - clamped) < std::abs(best - clamped) ||
        (std::abs(v - clamped) == std::abs(best - clamped) && v > best))
      best = v;
  return best;
}

int nearest_velocity_by_enumeration(int vel) {
  int clamped = std::min(126, std::max(40, vel));
  int best = 40;
  for (int v = 40; v <= 126; v += 2)
    if (std::abs(v - clamped) < std::abs(best - clamped) ||
        (std::abs(v - clamped) == std::abs(best - clamped) && v > best))
      best = v;
  return best;
}

Score one_track(std::vector<Note> notes, int tpq = 480) {
  Score s;
  s.ticks_per_quarter = tpq;
  s.tempo_map = {{0, 120.0}};
  s.tracks.push_back({InstrumentClass::Piano, std::move(notes)});
  return s;
}

}  // namespace

TEST_CASE("group_instruments follows the program families") {
  CHECK(group_instruments(0, false) == InstrumentClass::Piano);
  CHECK(group_instruments(7, false) == InstrumentClass::Piano);
  CHECK(group_instruments(25, false) == InstrumentClass::Guitar);
  CHECK(group_instruments(24, false) == InstrumentClass::Guitar);
  CHECK(group_instruments(31, false) == InstrumentClass::Guitar);
  CHECK(group_instruments(0, true) == InstrumentClass::Drum);
  CHECK(group_instruments(46, false) == InstrumentClass::Harp);
  CHECK(group_instruments(58, false) == InstrumentClass::Tuba);
  CHECK(group_instruments(107, false) == InstrumentClass::Guzheng);
  CHECK(group_instruments(104, false) == InstrumentClass::Pipa);
}

TEST_CASE("group_instruments is total and deterministic over all 256 inputs") {
  std::set<int> seen;
  for (int drum = 0; drum < 2; ++drum) {
    for (int p = 0; p < 128; ++p) {
      auto a = group_instruments(p, drum != 0);
      auto b = group_instruments(p, drum != 0);
      CHECK(a == b);
      CHECK(static_cast<int>(a) < kInstrumentClassCount);
      if (drum) CHECK(a == InstrumentClass::Drum);
      seen.insert(static_cast<int>(a));
    }
  }
  CHECK(seen.size() == kInstrumentClassCount);
}

TEST_CASE("representative programs map back to their class") {
  for (int c = 0; c < kInstrumentClassCount - 1; ++c) {
    auto cls = static_cast<InstrumentClass>(c);
    CHECK(group_instruments(representative_program(cls), false) == cls);
  }
}

TEST_CASE("tempo and velocity bins") {
  CHECK(grid::tempo_of_bin(0) == 32);
  CHECK(grid::tempo_of_bin(64) == 224);
  CHECK(grid::velocity_of_bin(0) == 40);
  CHECK(grid::velocity_of_bin(43) == 126);
  CHECK(grid::snap_tempo(121.4) == doctest::Approx(122.0));
  CHECK(grid::snap_tempo(121.4) == nearest_tempo_by_enumeration(121.4));
  CHECK(grid::snap_velocity(39) == 40);
  CHECK(grid::snap_velocity(39) == nearest_velocity_by_enumeration(39));
  for (double bpm = 10.0; bpm < 260.0; bpm += 0.37)
    CHECK(grid::snap_tempo(bpm) == nearest_tempo_by_enumeration(bpm));
  for (int v = 1; v <= 127; ++v) CHECK(grid::snap_velocity(v) == nearest_velocity_by_enumeration(v));
}

TEST_CASE("quantize_score examples") {
  SUBCASE("onset on the grid is unchanged") {
    auto s = one_track({{60, 120, 480, 100}});
    auto q = quantize_score(s);
    CHECK(q.tracks[0].notes[0].onset == 120);
    CHECK(q.tracks[0].notes[0].offset == 480);
  }
  SUBCASE("tempo 121.4 snaps to 122") {
    auto s = one_track({{60, 0, 480, 100}});
    s.tempo_map = {{0, 121.4}};
    CHECK(quantize_score(s).tempo_map.front().bpm == 122.0);
  }
  SUBCASE("velocity 39 clamps to 40") {
    auto q = quantize_score(one_track({{60, 0, 480, 39}}));
    CHECK(q.tracks[0].notes[0].velocity == 40);
  }
  SUBCASE("zero-length notes grow to one step") {
    auto q = quantize_score(one_track({{60, 100, 110, 80}}));
    CHECK(q.tracks[0].notes[0].onset == 120);
    CHECK(q.tracks[0].notes[0].offset == 180);
  }
  SUBCASE("overlapping same-pitch notes merge") {
    auto q = quantize_score(one_track({{60, 0, 480, 80}, {60, 240, 960, 100}, {62, 240, 300, 90}}));
    REQUIRE(q.tracks[0].notes.size() == 2);
    CHECK(q.tracks[0].notes[0] == Note{60, 0, 960, 80});
  }
  SUBCASE("abutting notes stay separate") {
    auto q = quantize_score(one_track({{60, 0, 480, 80}, {60, 480, 960, 80}}));
    CHECK(q.tracks[0].notes.size() == 2);
  }
  SUBCASE("long notes split into 32-step segments") {
    auto q = quantize_score(one_track({{60, 0, 80 * 60, 80}}));
    REQUIRE(q.tracks[0].notes.size() == 3);
    CHECK(q.tracks[0].notes[0].offset == 32 * 60);
    CHECK(q.tracks[0].notes[1].onset == 32 * 60);
    CHECK(q.tracks[0].notes[2].offset == 80 * 60);
  }
  SUBCASE("resolution is rescaled to 480") {
    auto q = quantize_score(one_track({{60, 96, 192, 80}}, 96));
    CHECK(q.ticks_per_quarter == 480);
    CHECK(q.tracks[0].notes[0].onset == 480);
    CHECK(q.tracks[0].notes[0].offset == 960);
  }
  SUBCASE("tracks of one class merge and empty tracks vanish") {
    Score s = one_track({{60, 0, 480, 80}});
    s.tracks.push_back({InstrumentClass::Piano, {{64, 0, 480, 80}}});
    s.tracks.push_back({InstrumentClass::Bass, {}});
    auto q = quantize_score(s);
    REQUIRE(q.tracks.size() == 1);
    CHECK(q.tracks[0].notes.size() == 2);
  }
  SUBCASE("missing tempo anchors at 120 bpm") {
    Score s = one_track({{60, 0, 480, 80}});
    s.tempo_map = {{960, 90.0}};
    auto q = quantize_score(s);
    REQUIRE(q.tempo_map.size() == 2);
    CHECK(q.tempo_map[0] == TempoChange{0, 119.0});
  }
}

TEST_CASE("quantize_score is idempotent on random off-grid scores") {
  Rng rng(7);
  synthetic::RandomScoreOptions opts;
  opts.off_grid = true;
  for (int i = 0; i < 300; ++i) {
    opts.ticks_per_quarter = i % 3 == 0 ? 96 : (i % 3 == 1 ? 480 : 384);
    Score raw = synthetic::random_score(rng, opts);
    check_invariants(raw);
    Score q = quantize_score(raw);
    check_invariants(q);
    CHECK(quantize_score(q) == q);
    CHECK(is_quantized(q));
  }
}

TEST_CASE("check_invariants rejects broken scores") {
  Score s = one_track({{60, 480, 480, 80}});
  CHECK_THROWS_AS(check_invariants(s), Error);
  s = one_track({{60, 0, 480, 0}});
  CHECK_THROWS_AS(check_invariants(s), Error);
  s = one_track({{60, 0, 480, 80}});
  s.tempo_map = {{480, 100}, {0, 100}};
  CHECK_THROWS_AS(check_invariants(s), Error);
}

TEST_CASE("seconds_at follows the tempo map") {
  Score s = one_track({});
  s.tempo_map = {{0, 120.0}, {960, 60.0}};
  CHECK(s.seconds_at(960) == doctest::Approx(1.0));
  CHECK(s.seconds_at(1440) == doctest::Approx(2.0));
}
