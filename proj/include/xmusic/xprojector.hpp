/**
 * @file xprojector.hpp
 * @brief Closed-form mappings from prompt features to projection elements.
 *
 * Feature extraction (emotion scorers, optical flow, beat saliency, humming
 * transcription) happens outside this library; PromptFeatures is the JSON
 * contract with whatever produces those numbers.
 */
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmusic/projection.hpp"

namespace xmusic::xp {

inline constexpr double kImageWeightResnet = 1.0;
inline constexpr double kImageWeightClip = 2.0;
inline constexpr double kTempoInit = 60.0;
inline constexpr double kTempoInc = 70.0;
inline constexpr int kBeatsPerBar = 4;
inline constexpr int kImagesPerBar = 8;
inline constexpr int kStepsPerBeat = 8;

using EmotionScores = std::array<double, kEmotionCount>;

/// Index of the largest entry; the lowest index wins ties. Empty input gives 0.
int argmax(std::span<const double> v);
std::vector<double> softmax(std::span<const double> v);

/// argmax(l1 * resnet + l2 * clip). Throws DimensionMismatch unless both have 11 entries.
Emotion fuse_image_scores(std::span<const double> resnet, std::span<const double> clip,
                          double l1 = kImageWeightResnet, double l2 = kImageWeightClip);

/// argmax of the softmax of the 11 text-emotion similarities.
Emotion text_emotion(std::span<const double> similarities);

/// An emotion or genre tag by name. Throws UnknownTag.
ProjectionElements tag_to_element(std::string_view tag);

/// 60 + 70 tanh(n_scene / t_video_s), before snapping. Throws NonPositiveDuration.
double video_tempo_raw(int n_scene, double t_video_s);
/// video_tempo_raw snapped to the tempo bin set.
double video_tempo(int n_scene, double t_video_s);

/// ceil(t_video_s * bpm / (60 * beats_per_bar)), at least 1.
int video_bar_count(double t_video_s, double bpm, int beats_per_bar = kBeatsPerBar);

struct TimedScores {
  double t = 0;
  EmotionScores scores{};
};
struct TimedValue {
  double t = 0;
  double value = 0;
};

struct VideoEmotion {
  Emotion global{};
  std::vector<Emotion> bars;
};

/// Bar score = mean of its frames, video score = mean of bar scores. A bar
/// holding fewer than `frames_per_bar` frames is padded by repeating its last
/// frame. Throws EmptyVideo when there are no bars or a bar has no frames.
VideoEmotion video_emotion(const std::vector<std::vector<EmotionScores>>& frames_per_bar,
                           int frames_per_bar_count = kImagesPerBar);

/// Groups timestamped frames into `n_bar` equal bars over [0, t_video_s).
/// A bar without frames borrows the nearest earlier frame (or the first frame).
std::vector<std::vector<EmotionScores>> group_frames(const std::vector<TimedScores>& frames, double t_video_s,
                                                     int n_bar);

/// Sorted reference samples for mapping raw values onto bins by percentile.
class PercentileTable {
 public:
  PercentileTable() = default;
  /// Sorts `samples`. Throws TableEmpty when empty or InvalidFeatures on non-finite values.
  explicit PercentileTable(std::vector<double> samples);

  /// Position of x in the sample distribution, in [0, 1]: 0 at or below the
  /// minimum, 1 at or above the maximum, linear between neighbouring samples
  /// (the last of equal samples counts).
  double rank(double x) const;
  /// round(rank(x) * max_bin).
  int bin(double x, int max_bin) const;

  const std::vector<double>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  bool operator==(const PercentileTable&) const = default;

 private:
  std::vector<double> samples_;
};

struct PercentileTables {
  PercentileTable flow;      // mean optical-flow magnitude per bar
  PercentileTable saliency;  // visual beat saliency per beat
  bool operator==(const PercentileTables&) const = default;
};

/// Bars at T(i-1)/N_bar, beats at bar + T(j-1)/(N_bar * 4), N_bar from the raw
/// bpm. Density = percentile bin (0..32) of the bar's mean flow, strength =
/// percentile bin (0..36) of the saliency sample nearest each beat (0 with no
/// saliency samples), tempo = bpm snapped to the tempo bins.
/// Throws TableEmpty, NonPositiveDuration or InvalidFeatures (negative flow).
RhythmElement video_rhythm(const std::vector<TimedValue>& flow, const std::vector<TimedValue>& saliency, double bpm,
                           double t_video_s, const PercentileTables& tables);

/// Mean flow of each of `n_bar` equal bars (0 for bars without frames).
std::vector<double> flow_per_bar(const std::vector<TimedValue>& flow, double t_video_s, int n_bar);

struct HummingNote {
  double onset_s = 0;
  double offset_s = 0;
  int pitch = 60;
  int velocity = 80;
  bool operator==(const HummingNote&) const = default;
};

struct StdNote {
  int onset_step = 0;  // 32nd steps from the first beat
  int offset_step = 0;
  int pitch = 60;
  int velocity = 80;
  bool operator==(const StdNote&) const = default;
};

/// A humming transcription on a uniform beat grid of length t_beat.
struct StdSequence {
  double t_beat = 0.5;
  std::vector<double> beat_tempo;  // raw per-beat bpm, 60 / inter-beat interval
  std::vector<int> beat_tempo_bin;
  std::vector<StdNote> notes;
  bool operator==(const StdSequence&) const = default;
};

/// Per-beat tempo from inter-beat intervals (the first beat takes the second
/// beat's), notes snapped to the nearest 32nd of their local beat, T_beat =
/// median interval. Notes keep at least one step. Throws TooFewBeats.
StdSequence standardize_humming(const std::vector<HummingNote>& notes, const std::vector<double>& beats);

/// The standardized sequence as raw input again: beats every t_beat from 0
/// and notes at their grid times.
std::pair<std::vector<HummingNote>, std::vector<double>> to_raw(const StdSequence& s);

/// Note and rhythm elements: bars cover the notes (at least one bar), density
/// = onsets per bar, strength = onsets on each quarter beat.
ProjectionElements humming_to_elements(const StdSequence& s);

struct VideoFeatures {
  double duration_s = 0;
  int scene_count = 0;
  std::vector<TimedScores> frames;
  std::vector<TimedValue> flow;
  std::vector<TimedValue> saliency;
};

struct PromptFeatures {
  Modality modality = Modality::Tag;
  std::vector<double> resnet_scores;  // image
  std::vector<double> clip_scores;    // image
  std::vector<double> similarities;   // text
  std::string tag;                    // tag
  VideoFeatures video;                // video
  std::vector<HummingNote> humming_notes;
  std::vector<double> humming_beats;
};

inline constexpr int kFeaturesSchemaVersion = 1;
inline constexpr int kTablesSchemaVersion = 1;

/// Throws InvalidFeatures on schema violations.
PromptFeatures features_from_json(const nlohmann::json& j);
nlohmann::json features_to_json(const PromptFeatures& f);

PercentileTables tables_from_json(const nlohmann::json& j);
nlohmann::json tables_to_json(const PercentileTables& t);

/// Reference tables from a set of video features: every bar's mean flow and
/// every saliency sample. Non-video entries are skipped. Throws TableEmpty.
PercentileTables build_tables(const std::vector<PromptFeatures>& corpus);

/// Dispatches on the modality. Video needs `tables`.
ProjectionElements project(const PromptFeatures& f, const PercentileTables* tables = nullptr);

}  // namespace xmusic::xp
