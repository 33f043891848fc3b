/**
 * @file vocab.hpp
 * @brief Attribute layout and vocabulary sizes of the compound-event representation.
 *
 * Each compound event carries 12 attribute slots. Every attribute has a base
 * vocabulary plus special tokens: IGNORE (index == base size) marks an
 * attribute inactive for the event's family; tempo and chord additionally
 * carry CONTI (index == base size + 1), used on bar events.
 */
#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace xmusic {

enum class Attribute : std::uint8_t {
  Family,
  Emotion,
  Genre,
  BarBeat,
  Tempo,
  Chord,
  Density,
  Strength,
  Program,
  Pitch,
  Duration,
  Velocity,
};

inline constexpr int kAttributeCount = 12;

inline constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "family",  "emotion",  "genre",   "bar_beat", "tempo",    "chord",
    "density", "strength", "program", "pitch",    "duration", "velocity"};

inline constexpr int index_of(Attribute a) { return static_cast<int>(a); }

enum class Family : std::uint8_t { Tag, Rhythm, Instrument, Note, Eos };

inline constexpr int kFamilyCount = 5;
inline constexpr std::array<std::string_view, kFamilyCount> kFamilyNames = {"Tag", "Rhythm", "Instrument",
                                                                            "Note", "EOS"};

/// Attributes a family may set; every other attribute must be IGNORE.
constexpr bool family_activates(Family f, Attribute a) {
  switch (f) {
    case Family::Tag: return a == Attribute::Emotion || a == Attribute::Genre;
    case Family::Rhythm:
      return a == Attribute::BarBeat || a == Attribute::Tempo || a == Attribute::Chord ||
             a == Attribute::Density || a == Attribute::Strength;
    case Family::Instrument: return a == Attribute::Program;
    case Family::Note: return a == Attribute::Pitch || a == Attribute::Duration || a == Attribute::Velocity;
    case Family::Eos: return false;
  }
  return false;
}

struct VocabSpec {
  /// Base vocabulary per attribute, in Attribute order.
  std::array<int, kAttributeCount> base{};
  /// Special-token count per attribute (IGNORE, plus CONTI on tempo and chord).
  std::array<int, kAttributeCount> special{};
  /// Embedding width per attribute.
  std::array<int, kAttributeCount> embed_width{};

  int size(Attribute a) const { return base[index_of(a)] + special[index_of(a)]; }
  int ignore(Attribute a) const { return base[index_of(a)]; }
  int conti(Attribute a) const { return base[index_of(a)] + 1; }
  bool has_conti(Attribute a) const { return special[index_of(a)] >= 2; }
  int total_base() const;
  int total_special() const;
  int total_embed_width() const;

  /// The representation's vocabulary with embedding widths scaled by `width_factor`
  /// (1.0 gives the reference widths 64/256/256/256/1024/512/512/64/128/128/64/64 in
  /// instrument/tempo/position/chord/pitch/duration/velocity/family/density/strength/
  /// emotion/genre order). Widths never drop below 1.
  static VocabSpec standard(double width_factor = 1.0);

  bool operator==(const VocabSpec&) const = default;
};

namespace vocab {

inline constexpr int kBarMarker = 32;        // bar_beat index of a bar event
inline constexpr int kPitchDrumOffset = 128;  // percussion pseudo-pitches
inline constexpr int kChordQualities = 11;
inline constexpr int kNoChord = 132;
inline constexpr int kMaxDensity = 32;
inline constexpr int kMaxStrength = 36;

}  // namespace vocab

}  // namespace xmusic
