/**
 * @file score.hpp
 * @brief Instrument-grouped, tempo-mapped note list and its quantization.
 *
 * A quantized Score lives on a fixed grid: 480 ticks per quarter, onsets and
 * offsets on multiples of one 32nd note (60 ticks), tempos drawn from the
 * 65-value tempo bin set, velocities from the 44-value velocity bin set, at
 * most one track per instrument class, and no note longer than 32 grid steps.
 */
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace xmusic {

enum class InstrumentClass : std::uint8_t {
  Piano,
  Xylophone,
  Organ,
  Guitar,
  Bass,
  Violin,
  Harp,
  String,
  Trumpet,
  Tuba,
  Sax,
  Flute,
  Lead,
  Pad,
  Pipa,
  Guzheng,
  Drum,
};

inline constexpr int kInstrumentClassCount = 17;

inline constexpr std::array<std::string_view, kInstrumentClassCount> kInstrumentNames = {
    "piano", "xylophone", "organ", "guitar", "bass",  "violin", "harp", "string", "trumpet",
    "tuba",  "sax",       "flute", "lead",   "pad",   "pipa",   "guzheng", "drum"};

inline std::string_view name_of(InstrumentClass c) { return kInstrumentNames[static_cast<int>(c)]; }
std::optional<InstrumentClass> instrument_from_name(std::string_view name);

/// Maps a General MIDI program (and channel role) onto one of the 17 classes.
/// Total over program 0..127; values outside are clamped.
InstrumentClass group_instruments(int program, bool is_drum_channel);

/// Program number written for a class when serializing (maps back to the same class).
int representative_program(InstrumentClass c);

struct Note {
  int pitch = 60;
  std::int64_t onset = 0;
  std::int64_t offset = 0;
  int velocity = 100;

  auto operator<=>(const Note&) const = default;
};

/// Canonical note order inside a track: onset, pitch, offset, velocity.
bool note_before(const Note& a, const Note& b);

struct Track {
  InstrumentClass instrument = InstrumentClass::Piano;
  std::vector<Note> notes;

  bool operator==(const Track&) const = default;
};

struct TempoChange {
  std::int64_t tick = 0;
  double bpm = 120.0;

  bool operator==(const TempoChange&) const = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;

  bool operator==(const TimeSignature&) const = default;
};

struct Score {
  int ticks_per_quarter = 480;
  std::vector<TempoChange> tempo_map;
  TimeSignature time_signature;
  std::vector<Track> tracks;

  bool operator==(const Score&) const = default;

  std::size_t note_count() const;
  /// Largest note offset, or 0 for an empty score.
  std::int64_t end_tick() const;
  /// Tempo in effect at a tick (120 bpm when the map is empty).
  double tempo_at(std::int64_t tick) const;
  /// Wall-clock time of a tick under the tempo map.
  double seconds_at(std::int64_t tick) const;
};

/// Throws Error(MalformedFile) when a Score invariant is violated.
void check_invariants(const Score& score);

namespace grid {

inline constexpr int kTicksPerQuarter = 480;
inline constexpr int kStepsPerQuarter = 8;
inline constexpr int kTicksPerStep = kTicksPerQuarter / kStepsPerQuarter;
inline constexpr int kStepsPerBar = 32;
inline constexpr int kBeatsPerBar = 4;
inline constexpr int kMaxDurationSteps = 32;

inline constexpr int kTempoBinCount = 65;
inline constexpr int kTempoMin = 32;
inline constexpr int kTempoMax = 224;
inline constexpr int kTempoStep = 3;

inline constexpr int kVelocityBinCount = 44;
inline constexpr int kVelocityMin = 40;
inline constexpr int kVelocityMax = 126;
inline constexpr int kVelocityStep = 2;

/// Nearest tempo bin index after clamping to [32, 224].
int tempo_bin(double bpm);
inline int tempo_of_bin(int bin) { return kTempoMin + kTempoStep * bin; }
inline double snap_tempo(double bpm) { return tempo_of_bin(tempo_bin(bpm)); }

/// Nearest velocity bin index after clamping to [40, 126].
int velocity_bin(int velocity);
inline int velocity_of_bin(int bin) { return kVelocityMin + kVelocityStep * bin; }
inline int snap_velocity(int velocity) { return velocity_of_bin(velocity_bin(velocity)); }

/// Nearest 32nd-note step for a tick at the given resolution (ties round up).
std::int64_t nearest_step(std::int64_t tick, int ticks_per_quarter);

}  // namespace grid

/// Snaps a score onto the representation grid. Idempotent.
Score quantize_score(const Score& score);

/// True when `score` is a fixed point of quantize_score.
bool is_quantized(const Score& score);

}  // namespace xmusic
