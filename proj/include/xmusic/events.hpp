/**
 * @file events.hpp
 * @brief Compound-event encoding of quantized scores.
 *
 * Event grammar, per bar:
 *
 *     Tag  Bar  (Beat | Instrument Note+)*
 *
 * followed by a single EOS after the last bar. An empty score encodes as
 * [Tag, EOS]. Beat events appear at the four quarter positions of every bar,
 * plus any other 32nd position that holds a note onset or a tempo change.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmusic/labels.hpp"
#include "xmusic/score.hpp"
#include "xmusic/vocab.hpp"

namespace xmusic {

struct CompoundEvent {
  std::array<std::uint16_t, kAttributeCount> values{};

  Family family() const { return static_cast<Family>(values[0]); }
  int get(Attribute a) const { return values[index_of(a)]; }
  void set(Attribute a, int v) { values[index_of(a)] = static_cast<std::uint16_t>(v); }

  /// An event of `f` with every attribute set to IGNORE.
  static CompoundEvent blank(Family f, const VocabSpec& vocab);

  bool operator==(const CompoundEvent&) const = default;
};

struct SequenceLabels {
  std::optional<Emotion> emotion;
  std::optional<Genre> genre;

  bool operator==(const SequenceLabels&) const = default;
};

struct EventSequence {
  std::vector<CompoundEvent> events;
  std::string source;
  SequenceLabels labels;

  std::size_t size() const { return events.size(); }
  bool operator==(const EventSequence&) const = default;
};

// Event constructors. Indices are vocabulary indices, not physical values.
CompoundEvent make_tag(const VocabSpec& v, std::optional<Emotion> e, std::optional<Genre> g);
CompoundEvent make_bar(const VocabSpec& v, int density);
CompoundEvent make_beat(const VocabSpec& v, int position, int tempo_bin, int chord, int strength);
CompoundEvent make_instrument(const VocabSpec& v, InstrumentClass c);
CompoundEvent make_note(const VocabSpec& v, int pitch_index, int duration_index, int velocity_bin);
CompoundEvent make_eos(const VocabSpec& v);

/// Onset count of a bar, clamped to the 33 density bins.
int compute_density(std::size_t onsets_in_bar);
/// Onset count at one grid position, clamped to the 37 strength bins.
int compute_strength(std::size_t onsets_at_position);

/// Chord index for a half-bar (12 roots x 11 qualities, 132 = no chord) by
/// template matching over duration-weighted sounding pitch classes.
int detect_chord(std::span<const double, 12> pitch_class_weight);
std::string chord_name(int chord);

/// Encodes a quantized score. Throws Error(UnencodableScore) when the score
/// is off the grid (not a quantize_score fixed point on ticks/resolution).
EventSequence encode(const Score& score, std::optional<Emotion> emotion, std::optional<Genre> genre,
                     const VocabSpec& vocab = VocabSpec::standard());

struct Decoded {
  Score score;
  SequenceLabels labels;
  /// Tag labels of every bar, in order.
  std::vector<SequenceLabels> bar_labels;
};

/// Inverse of encode. Throws Error(MalformedSequence) on any grammar,
/// family-mask or range violation.
Decoded decode(const EventSequence& seq, const VocabSpec& vocab = VocabSpec::standard());

/// Grammar/mask/range check without building a score; returns the first
/// violation or an empty string.
std::string check_sequence(const EventSequence& seq, const VocabSpec& vocab = VocabSpec::standard());

}  // namespace xmusic
