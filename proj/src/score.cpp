#include "xmusic/score.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "xmusic/error.hpp"
#include "xmusic/labels.hpp"

namespace xmusic {

namespace {

using IC = InstrumentClass;

// General MIDI families in 8-program blocks, with the classes that have no GM
// family of their own carved out of the nearest block (harp 46, tuba 58,
// plucked lutes 104-106 as pipa, koto 107 as guzheng).
constexpr std::array<IC, 128> kProgramTable = [] {
  std::array<IC, 128> t{};
  constexpr IC blocks[16] = {IC::Piano,  IC::Xylophone, IC::Organ, IC::Guitar,
                             IC::Bass,   IC::Violin,    IC::String, IC::Trumpet,
                             IC::Sax,    IC::Flute,     IC::Lead,  IC::Pad,
                             IC::Pad,    IC::Pipa,      IC::Xylophone, IC::Pad};
  for (int p = 0; p < 128; ++p) t[p] = blocks[p / 8];
  t[46] = IC::Harp;
  t[58] = IC::Tuba;
  t[107] = IC::Guzheng;  // koto
  t[108] = IC::Xylophone;  // kalimba
  t[109] = IC::Sax;        // bagpipe
  t[110] = IC::Violin;     // fiddle
  t[111] = IC::Sax;        // shanai
  return t;
}();

constexpr std::array<int, kInstrumentClassCount> kRepresentative = {
    0, 13, 16, 24, 32, 40, 46, 48, 56, 58, 64, 73, 80, 88, 104, 107, 0};

}  // namespace

std::optional<InstrumentClass> instrument_from_name(std::string_view name) {
  for (int i = 0; i < kInstrumentClassCount; ++i)
    if (kInstrumentNames[i] == name) return static_cast<InstrumentClass>(i);
  return std::nullopt;
}

std::optional<Emotion> emotion_from_name(std::string_view name) {
  for (int i = 0; i < kEmotionCount; ++i)
    if (kEmotionNames[i] == name) return static_cast<Emotion>(i);
  return std::nullopt;
}

std::optional<Genre> genre_from_name(std::string_view name) {
  for (int i = 0; i < kGenreCount; ++i)
    if (kGenreNames[i] == name) return static_cast<Genre>(i);
  return std::nullopt;
}

InstrumentClass group_instruments(int program, bool is_drum_channel) {
  if (is_drum_channel) return IC::Drum;
  return kProgramTable[std::clamp(program, 0, 127)];
}

int representative_program(InstrumentClass c) { return kRepresentative[static_cast<int>(c)]; }

std::size_t Score::note_count() const {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.notes.size();
  return n;
}

std::int64_t Score::end_tick() const {
  std::int64_t end = 0;
  for (const auto& t : tracks)
    for (const auto& n : t.notes) end = std::max(end, n.offset);
  return end;
}

double Score::tempo_at(std::int64_t tick) const {
  double bpm = 120.0;
  for (const auto& tc : tempo_map) {
    if (tc.tick > tick) break;
    bpm = tc.bpm;
  }
  return bpm;
}

double Score::seconds_at(std::int64_t tick) const {
  double seconds = 0.0;
  std::int64_t prev = 0;
  double bpm = 120.0;
  for (const auto& tc : tempo_map) {
    if (tc.tick >= tick) break;
    seconds += static_cast<double>(tc.tick - prev) * 60.0 / (bpm * ticks_per_quarter);
    prev = tc.tick;
    bpm = tc.bpm;
  }
  seconds += static_cast<double>(tick - prev) * 60.0 / (bpm * ticks_per_quarter);
  return seconds;
}

void check_invariants(const Score& score) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::MalformedFile, m); };
  if (score.ticks_per_quarter <= 0) fail("ticks_per_quarter must be positive");
  for (std::size_t i = 0; i < score.tempo_map.size(); ++i) {
    if (!(score.tempo_map[i].bpm > 0)) fail("tempo must be positive");
    if (i > 0 && score.tempo_map[i].tick < score.tempo_map[i - 1].tick) fail("tempo map not sorted");
  }
  for (const auto& t : score.tracks) {
    if (static_cast<int>(t.instrument) >= kInstrumentClassCount) fail("unknown instrument class");
    for (const auto& n : t.notes) {
      if (n.onset >= n.offset) fail("note onset must precede offset");
      if (n.pitch < 0 || n.pitch > 127) fail("pitch out of range");
      if (n.velocity < 1 || n.velocity > 127) fail("velocity out of range");
    }
  }
}

namespace grid {

int tempo_bin(double bpm) {
  double clamped = std::clamp(bpm, static_cast<double>(kTempoMin), static_cast<double>(kTempoMax));
  return static_cast<int>(std::lround((clamped - kTempoMin) / kTempoStep));
}

int velocity_bin(int velocity) {
  int clamped = std::clamp(velocity, kVelocityMin, kVelocityMax);
  return (clamped - kVelocityMin + 1) / kVelocityStep;
}

std::int64_t nearest_step(std::int64_t tick, int ticks_per_quarter) {
  // floor((tick * 8 + tpq / 2) / tpq) with ties rounding up, valid for negative ticks too.
  std::int64_t num = tick * 2 * kStepsPerQuarter + ticks_per_quarter;
  std::int64_t den = 2 * static_cast<std::int64_t>(ticks_per_quarter);
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

}  // namespace grid

bool note_before(const Note& a, const Note& b) {
  return std::tie(a.onset, a.pitch, a.offset, a.velocity) <
         std::tie(b.onset, b.pitch, b.offset, b.velocity);
}

namespace {

// Merges overlapping same-pitch notes (earliest onset and velocity, latest
// offset). Abutting notes are left alone.
std::vector<Note> merge_overlaps(std::vector<Note> notes) {
  std::sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    return std::tie(a.pitch, a.onset, a.offset, a.velocity) <
           std::tie(b.pitch, b.onset, b.offset, b.velocity);
  });
  std::vector<Note> out;
  out.reserve(notes.size());
  for (const auto& n : notes) {
    if (!out.empty() && out.back().pitch == n.pitch && n.onset < out.back().offset) {
      out.back().offset = std::max(out.back().offset, n.offset);
    } else {
      out.push_back(n);
    }
  }
  return out;
}

}  // namespace

Score quantize_score(const Score& score) {
  using namespace grid;
  const int tpq = score.ticks_per_quarter > 0 ? score.ticks_per_quarter : kTicksPerQuarter;

  Score out;
  out.ticks_per_quarter = kTicksPerQuarter;
  out.time_signature = score.time_signature;

  // Tempo map: snap, sort, last write wins per tick, drop repeats, anchor at 0.
  std::map<std::int64_t, double> tempos;
  for (const auto& tc : score.tempo_map) {
    std::int64_t step = std::max<std::int64_t>(0, nearest_step(tc.tick, tpq));
    tempos[step * kTicksPerStep] = snap_tempo(tc.bpm);
  }
  if (tempos.empty() || tempos.begin()->first != 0) tempos.emplace(0, snap_tempo(120.0));
  for (const auto& [tick, bpm] : tempos) {
    if (!out.tempo_map.empty() && out.tempo_map.back().bpm == bpm) continue;
    out.tempo_map.push_back({tick, bpm});
  }

  std::array<std::vector<Note>, kInstrumentClassCount> by_class;
  for (const auto& t : score.tracks) {
    auto& dst = by_class[static_cast<int>(t.instrument)];
    for (const auto& n : t.notes) {
      std::int64_t on = std::max<std::int64_t>(0, nearest_step(n.onset, tpq));
      std::int64_t off = std::max<std::int64_t>(0, nearest_step(n.offset, tpq));
      if (off <= on) off = on + 1;
      dst.push_back({std::clamp(n.pitch, 0, 127), on * kTicksPerStep, off * kTicksPerStep,
                     snap_velocity(n.velocity)});
    }
  }

  for (int c = 0; c < kInstrumentClassCount; ++c) {
    if (by_class[c].empty()) continue;
    std::vector<Note> merged = merge_overlaps(std::move(by_class[c]));
    Track track{static_cast<InstrumentClass>(c), {}};
    constexpr std::int64_t max_ticks = static_cast<std::int64_t>(kMaxDurationSteps) * kTicksPerStep;
    for (const auto& n : merged) {
      // Tied segments of at most 32 steps.
      for (std::int64_t on = n.onset; on < n.offset; on += max_ticks) {
        track.notes.push_back({n.pitch, on, std::min(n.offset, on + max_ticks), n.velocity});
      }
    }
    std::sort(track.notes.begin(), track.notes.end(), note_before);
    out.tracks.push_back(std::move(track));
  }
  return out;
}

bool is_quantized(const Score& score) { return quantize_score(score) == score; }

}  // namespace xmusic
