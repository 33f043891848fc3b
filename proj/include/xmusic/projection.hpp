/**
 * @file projection.hpp
 * @brief The projection space: emotion, genre, rhythm and note elements that
 * condition generation regardless of which prompt modality produced them.
 *
 * Elements keep physical units (seconds, bpm, MIDI values); token indices are
 * derived only when the generator consumes them.
 */
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "xmusic/labels.hpp"

namespace xmusic {

enum class Modality { Video, Image, Text, Tag, Humming };
inline constexpr int kModalityCount = 5;
inline constexpr std::array<std::string_view, kModalityCount> kModalityNames = {"video", "image", "text", "tag",
                                                                               "humming"};
std::optional<Modality> modality_from_name(std::string_view name);
inline std::string_view name_of(Modality m) { return kModalityNames[static_cast<int>(m)]; }

struct EmotionElement {
  Emotion global{};
  /// Per-bar emotions; when present they override `global` bar by bar.
  std::vector<Emotion> bars;
  bool operator==(const EmotionElement&) const = default;
};

struct GenreElement {
  Genre genre{};
  bool operator==(const GenreElement&) const = default;
};

struct RhythmBar {
  double start_s = 0;
  int density = 0;  // density bin, 0..32
  bool operator==(const RhythmBar&) const = default;
};

struct RhythmBeat {
  double start_s = 0;
  double tempo_bpm = 120;
  int strength = 0;  // strength bin, 0..36
  bool operator==(const RhythmBeat&) const = default;
};

/// Four beats per bar; beats.size() == 4 * bars.size().
struct RhythmElement {
  std::vector<RhythmBar> bars;
  std::vector<RhythmBeat> beats;
  bool operator==(const RhythmElement&) const = default;
};

struct NoteItem {
  int onset_step = 0;      // 32nd-note step from the start of the piece
  int pitch = 60;          // MIDI pitch
  int duration_steps = 8;  // 1..32
  int velocity = 80;       // MIDI velocity
  bool operator==(const NoteItem&) const = default;
};

struct NoteElement {
  std::vector<NoteItem> notes;
  bool operator==(const NoteElement&) const = default;
};

struct ProjectionElements {
  std::optional<EmotionElement> emotion;
  std::optional<GenreElement> genre;
  std::optional<RhythmElement> rhythm;
  std::optional<NoteElement> notes;
  bool empty() const { return !emotion && !genre && !rhythm && !notes; }
  bool operator==(const ProjectionElements&) const = default;
};

/// Checks element invariants and the modality's activation pattern
/// (video: emotion+rhythm, image/text: emotion, tag: emotion or genre,
/// humming: rhythm+notes). Returns violation messages; never throws.
std::vector<std::string> validate(const ProjectionElements& elements, Modality source);
/// Invariants only, without an activation pattern.
std::vector<std::string> validate(const ProjectionElements& elements);

namespace projection_io {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const ProjectionElements& elements, std::optional<Modality> source = std::nullopt);
/// Throws Error(InvalidElements) on schema violations.
ProjectionElements from_json(const nlohmann::json& j, std::optional<Modality>* source = nullptr);

}  // namespace projection_io

}  // namespace xmusic
