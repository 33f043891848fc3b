#include "xmusic/xprojector.hpp"

#include <algorithm>
#include <cmath>

#include "xmusic/error.hpp"
#include "xmusic/events.hpp"
#include "xmusic/score.hpp"

namespace xmusic::xp {

using nlohmann::json;

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0;
  for (double& x : out) sum += (x = std::exp(x - m));
  for (double& x : out) x /= sum;
  return out;
}

Emotion fuse_image_scores(std::span<const double> resnet, std::span<const double> clip, double l1, double l2) {
  if (resnet.size() != kEmotionCount || clip.size() != kEmotionCount)
    throw Error(ErrorCode::DimensionMismatch, "image scores need 11 entries each");
  EmotionScores fused{};
  for (int i = 0; i < kEmotionCount; ++i) fused[i] = l1 * resnet[i] + l2 * clip[i];
  return static_cast<Emotion>(argmax(fused));
}

Emotion text_emotion(std::span<const double> similarities) {
  if (similarities.size() != kEmotionCount) throw Error(ErrorCode::DimensionMismatch, "text similarities need 11 entries");
  for (double x : similarities)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidFeatures, "non-finite text similarity");
  return static_cast<Emotion>(argmax(softmax(similarities)));
}

ProjectionElements tag_to_element(std::string_view tag) {
  ProjectionElements out;
  if (auto e = emotion_from_name(tag)) {
    out.emotion = EmotionElement{*e, {}};
  } else if (auto g = genre_from_name(tag)) {
    out.genre = GenreElement{*g};
  } else {
    throw Error(ErrorCode::UnknownTag, "unknown tag '" + std::string(tag) + "'");
  }
  return out;
}

double video_tempo_raw(int n_scene, double t_video_s) {
  if (!(t_video_s > 0)) throw Error(ErrorCode::NonPositiveDuration, "video duration must be positive");
  if (n_scene < 0) throw Error(ErrorCode::InvalidFeatures, "negative scene count");
  // strictly below the upper bound, also where tanh rounds to 1
  const double below_max = std::nextafter(kTempoInit + kTempoInc, 0.0);
  return std::min(kTempoInit + kTempoInc * std::tanh(n_scene / t_video_s), below_max);
}

double video_tempo(int n_scene, double t_video_s) { return grid::snap_tempo(video_tempo_raw(n_scene, t_video_s)); }

int video_bar_count(double t_video_s, double bpm, int beats_per_bar) {
  if (!(t_video_s > 0)) throw Error(ErrorCode::NonPositiveDuration, "video duration must be positive");
  if (!(bpm > 0) || beats_per_bar <= 0) throw Error(ErrorCode::InvalidFeatures, "tempo and beats per bar must be positive");
  const double exact = t_video_s * bpm / (60.0 * beats_per_bar);
  return std::max(1, static_cast<int>(std::ceil(exact - 1e-9)));
}

VideoEmotion video_emotion(const std::vector<std::vector<EmotionScores>>& frames_per_bar, int frames_per_bar_count) {
  if (frames_per_bar.empty()) throw Error(ErrorCode::EmptyVideo, "no bars");
  VideoEmotion out;
  EmotionScores total{};
  for (const auto& bar : frames_per_bar) {
    if (bar.empty()) throw Error(ErrorCode::EmptyVideo, "bar without frames");
    EmotionScores sum{};
    const std::size_t n = std::max<std::size_t>(bar.size(), static_cast<std::size_t>(std::max(1, frames_per_bar_count)));
    for (std::size_t f = 0; f < n; ++f) {
      const auto& frame = bar[std::min(f, bar.size() - 1)];
      for (int i = 0; i < kEmotionCount; ++i) sum[i] += frame[i];
    }
    for (int i = 0; i < kEmotionCount; ++i) {
      sum[i] /= static_cast<double>(n);
      total[i] += sum[i];
    }
    out.bars.push_back(static_cast<Emotion>(argmax(sum)));
  }
  for (double& x : total) x /= static_cast<double>(frames_per_bar.size());
  out.global = static_cast<Emotion>(argmax(total));
  return out;
}

namespace {

int bar_of(double t, double t_video_s, int n_bar) {
  const double bar_len = t_video_s / n_bar;
  return std::clamp(static_cast<int>(std::floor(t / bar_len)), 0, n_bar - 1);
}

}  // namespace

std::vector<std::vector<EmotionScores>> group_frames(const std::vector<TimedScores>& frames, double t_video_s,
                                                     int n_bar) {
  if (frames.empty()) throw Error(ErrorCode::EmptyVideo, "no frames");
  if (!(t_video_s > 0)) throw Error(ErrorCode::NonPositiveDuration, "video duration must be positive");
  std::vector<TimedScores> sorted = frames;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  std::vector<std::vector<EmotionScores>> out(static_cast<std::size_t>(n_bar));
  for (const auto& f : sorted) out[static_cast<std::size_t>(bar_of(f.t, t_video_s, n_bar))].push_back(f.scores);
  for (int b = 0; b < n_bar; ++b) {
    if (!out[static_cast<std::size_t>(b)].empty()) continue;
    const double start = t_video_s * b / n_bar;
    const TimedScores* pick = &sorted.front();
    for (const auto& f : sorted)
      if (f.t < start) pick = &f;
    out[static_cast<std::size_t>(b)].push_back(pick->scores);
  }
  return out;
}

PercentileTable::PercentileTable(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw Error(ErrorCode::TableEmpty, "percentile table has no samples");
  for (double x : samples_)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidFeatures, "non-finite percentile sample");
  std::sort(samples_.begin(), samples_.end());
}

double PercentileTable::rank(double x) const {
  if (samples_.empty()) throw Error(ErrorCode::TableEmpty, "percentile table has no samples");
  if (samples_.size() == 1) return x >= samples_.front() ? 1.0 : 0.0;
  if (x <= samples_.front()) return 0.0;
  if (x >= samples_.back()) return 1.0;
  const auto k = static_cast<std::size_t>(std::upper_bound(samples_.begin(), samples_.end(), x) - samples_.begin());
  const double lo = samples_[k - 1], hi = samples_[k];
  const double pos = static_cast<double>(k - 1) + (x - lo) / (hi - lo);
  return pos / static_cast<double>(samples_.size() - 1);
}

int PercentileTable::bin(double x, int max_bin) const {
  return static_cast<int>(std::lround(rank(x) * max_bin));
}

std::vector<double> flow_per_bar(const std::vector<TimedValue>& flow, double t_video_s, int n_bar) {
  std::vector<double> sum(static_cast<std::size_t>(n_bar), 0.0);
  std::vector<int> count(static_cast<std::size_t>(n_bar), 0);
  for (const auto& f : flow) {
    if (!(f.value >= 0) || !std::isfinite(f.value)) throw Error(ErrorCode::InvalidFeatures, "flow magnitudes must be >= 0");
    const auto b = static_cast<std::size_t>(bar_of(f.t, t_video_s, n_bar));
    sum[b] += f.value;
    ++count[b];
  }
  for (std::size_t b = 0; b < sum.size(); ++b)
    if (count[b] > 0) sum[b] /= count[b];
  return sum;
}

RhythmElement video_rhythm(const std::vector<TimedValue>& flow, const std::vector<TimedValue>& saliency, double bpm,
                           double t_video_s, const PercentileTables& tables) {
  if (tables.flow.empty() || tables.saliency.empty()) throw Error(ErrorCode::TableEmpty, "percentile tables are empty");
  const int n_bar = video_bar_count(t_video_s, bpm);
  const auto bar_flow = flow_per_bar(flow, t_video_s, n_bar);
  const double bar_len = t_video_s / n_bar;
  const double tempo = grid::snap_tempo(bpm);
  RhythmElement r;
  for (int i = 0; i < n_bar; ++i) {
    const double start = t_video_s * i / n_bar;
    r.bars.push_back({start, tables.flow.bin(bar_flow[static_cast<std::size_t>(i)], vocab::kMaxDensity)});
    for (int j = 0; j < kBeatsPerBar; ++j) {
      const double t = start + bar_len * j / kBeatsPerBar;
      int strength = 0;
      if (!saliency.empty()) {
        const TimedValue* nearest = &saliency.front();
        for (const auto& s : saliency)
          if (std::abs(s.t - t) < std::abs(nearest->t - t)) nearest = &s;
        strength = tables.saliency.bin(nearest->value, vocab::kMaxStrength);
      }
      r.beats.push_back({t, tempo, strength});
    }
  }
  return r;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Time -> fractional beat index on the piecewise-linear beat grid, extended
// past both ends with the nearest interval.
double beat_position(double t, const std::vector<double>& beats) {
  const std::size_t n = beats.size();
  if (t < beats.front()) return (t - beats.front()) / (beats[1] - beats[0]);
  if (t >= beats.back()) return static_cast<double>(n - 1) + (t - beats.back()) / (beats[n - 1] - beats[n - 2]);
  const auto k = static_cast<std::size_t>(std::upper_bound(beats.begin(), beats.end(), t) - beats.begin()) - 1;
  return static_cast<double>(k) + (t - beats[k]) / (beats[k + 1] - beats[k]);
}

}  // namespace

StdSequence standardize_humming(const std::vector<HummingNote>& notes, const std::vector<double>& beats) {
  if (beats.size() < 2) throw Error(ErrorCode::TooFewBeats, "humming needs at least two beats");
  for (std::size_t i = 1; i < beats.size(); ++i)
    if (!(beats[i] > beats[i - 1])) throw Error(ErrorCode::InvalidFeatures, "beat times must strictly increase");
  StdSequence s;
  std::vector<double> ibi;
  for (std::size_t i = 1; i < beats.size(); ++i) ibi.push_back(beats[i] - beats[i - 1]);
  s.t_beat = median(ibi);
  s.beat_tempo.push_back(60.0 / ibi.front());
  for (double d : ibi) s.beat_tempo.push_back(60.0 / d);
  for (double bpm : s.beat_tempo) s.beat_tempo_bin.push_back(grid::tempo_bin(bpm));

  for (const auto& n : notes) {
    if (!(n.offset_s > n.onset_s)) throw Error(ErrorCode::InvalidFeatures, "humming note must have positive length");
    StdNote out;
    out.onset_step = std::max(0, static_cast<int>(std::lround(beat_position(n.onset_s, beats) * kStepsPerBeat)));
    out.offset_step = std::max(out.onset_step + 1,
                               static_cast<int>(std::lround(beat_position(n.offset_s, beats) * kStepsPerBeat)));
    out.pitch = std::clamp(n.pitch, 0, 127);
    out.velocity = std::clamp(n.velocity, 1, 127);
    s.notes.push_back(out);
  }
  std::sort(s.notes.begin(), s.notes.end(), [](const StdNote& a, const StdNote& b) {
    return std::tie(a.onset_step, a.pitch, a.offset_step, a.velocity) <
           std::tie(b.onset_step, b.pitch, b.offset_step, b.velocity);
  });
  return s;
}

std::pair<std::vector<HummingNote>, std::vector<double>> to_raw(const StdSequence& s) {
  std::vector<double> beats;
  for (std::size_t k = 0; k < std::max<std::size_t>(2, s.beat_tempo.size()); ++k) beats.push_back(s.t_beat * k);
  std::vector<HummingNote> notes;
  const double step = s.t_beat / kStepsPerBeat;
  for (const auto& n : s.notes) notes.push_back({n.onset_step * step, n.offset_step * step, n.pitch, n.velocity});
  return {notes, beats};
}

ProjectionElements humming_to_elements(const StdSequence& s) {
  constexpr int kStepsPerBar = kBeatsPerBar * kStepsPerBeat;
  NoteElement ne;
  int last_onset = -1;
  for (const auto& n : s.notes) {
    ne.notes.push_back({n.onset_step, n.pitch, std::clamp(n.offset_step - n.onset_step, 1, grid::kMaxDurationSteps),
                        n.velocity});
    last_onset = std::max(last_onset, n.onset_step);
  }
  const int n_bars = last_onset < 0 ? 1 : last_onset / kStepsPerBar + 1;
  std::vector<int> bar_onsets(static_cast<std::size_t>(n_bars), 0);
  std::vector<int> beat_onsets(static_cast<std::size_t>(n_bars * kBeatsPerBar), 0);
  for (const auto& n : ne.notes) {
    ++bar_onsets[static_cast<std::size_t>(n.onset_step / kStepsPerBar)];
    if (n.onset_step % kStepsPerBeat == 0) ++beat_onsets[static_cast<std::size_t>(n.onset_step / kStepsPerBeat)];
  }
  RhythmElement r;
  for (int i = 0; i < n_bars; ++i) {
    r.bars.push_back({s.t_beat * kBeatsPerBar * i, compute_density(static_cast<std::size_t>(bar_onsets[static_cast<std::size_t>(i)]))});
    for (int j = 0; j < kBeatsPerBar; ++j) {
      const auto k = static_cast<std::size_t>(i * kBeatsPerBar + j);
      double tempo = s.beat_tempo.empty() ? 120.0 : s.beat_tempo[std::min(k, s.beat_tempo.size() - 1)];
      tempo = std::clamp(tempo, static_cast<double>(grid::kTempoMin), static_cast<double>(grid::kTempoMax));
      r.beats.push_back({s.t_beat * static_cast<double>(k), tempo,
                         compute_strength(static_cast<std::size_t>(beat_onsets[k]))});
    }
  }
  ProjectionElements out;
  out.notes = std::move(ne);
  out.rhythm = std::move(r);
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& m) { throw Error(ErrorCode::InvalidFeatures, m); }

std::vector<double> scores_of(const json& j, const char* key) {
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != kEmotionCount)
    throw Error(ErrorCode::DimensionMismatch, std::string(key) + " needs 11 entries, got " + std::to_string(v.size()));
  for (double x : v)
    if (!std::isfinite(x)) invalid(std::string(key) + " has a non-finite entry");
  return v;
}

std::vector<TimedValue> timed_values(const json& j, const char* key, const char* value_key) {
  std::vector<TimedValue> out;
  if (!j.contains(key)) return out;
  for (const auto& x : j.at(key)) out.push_back({x.at("t").get<double>(), x.at(value_key).get<double>()});
  return out;
}

}  // namespace

PromptFeatures features_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != "xmusic.prompt_features")
      invalid("not an xmusic.prompt_features document");
    if (j.value("version", 0) != kFeaturesSchemaVersion) invalid("unsupported prompt_features schema version");
    auto m = modality_from_name(j.at("modality").get<std::string>());
    if (!m) invalid("unknown modality '" + j.at("modality").get<std::string>() + "'");
    PromptFeatures f;
    f.modality = *m;
    switch (f.modality) {
      case Modality::Image:
        f.resnet_scores = scores_of(j, "resnet_scores");
        f.clip_scores = scores_of(j, "clip_scores");
        break;
      case Modality::Text:
        f.similarities = scores_of(j, "similarities");
        break;
      case Modality::Tag:
        f.tag = j.at("tag").get<std::string>();
        break;
      case Modality::Video: {
        auto& v = f.video;
        v.duration_s = j.at("duration_s").get<double>();
        if (!(v.duration_s > 0)) throw Error(ErrorCode::NonPositiveDuration, "duration_s must be positive");
        v.scene_count = j.at("scene_count").get<int>();
        if (v.scene_count < 0) invalid("scene_count must be >= 0");
        for (const auto& fr : j.at("frames")) {
          TimedScores ts;
          ts.t = fr.at("t").get<double>();
          auto sc = scores_of(fr, "scores");
          std::copy(sc.begin(), sc.end(), ts.scores.begin());
          v.frames.push_back(ts);
        }
        if (v.frames.empty()) throw Error(ErrorCode::EmptyVideo, "video has no frames");
        v.flow = timed_values(j, "flow", "magnitude");
        for (const auto& x : v.flow)
          if (!(x.value >= 0)) invalid("flow magnitudes must be >= 0");
        v.saliency = timed_values(j, "saliency", "value");
        break;
      }
      case Modality::Humming:
        for (const auto& n : j.at("notes"))
          f.humming_notes.push_back({n.at("onset_s").get<double>(), n.at("offset_s").get<double>(),
                                     n.at("pitch").get<int>(), n.value("velocity", 80)});
        f.humming_beats = j.at("beats").get<std::vector<double>>();
        if (f.humming_beats.size() < 2) throw Error(ErrorCode::TooFewBeats, "humming needs at least two beats");
        break;
    }
    return f;
  } catch (const json::exception& e) {
    invalid(e.what());
  }
}

json features_to_json(const PromptFeatures& f) {
  json j = {{"schema", "xmusic.prompt_features"}, {"version", kFeaturesSchemaVersion}, {"modality", name_of(f.modality)}};
  switch (f.modality) {
    case Modality::Image:
      j["resnet_scores"] = f.resnet_scores;
      j["clip_scores"] = f.clip_scores;
      break;
    case Modality::Text:
      j["similarities"] = f.similarities;
      break;
    case Modality::Tag:
      j["tag"] = f.tag;
      break;
    case Modality::Video: {
      j["duration_s"] = f.video.duration_s;
      j["scene_count"] = f.video.scene_count;
      j["frames"] = json::array();
      for (const auto& fr : f.video.frames) j["frames"].push_back({{"t", fr.t}, {"scores", fr.scores}});
      j["flow"] = json::array();
      for (const auto& x : f.video.flow) j["flow"].push_back({{"t", x.t}, {"magnitude", x.value}});
      j["saliency"] = json::array();
      for (const auto& x : f.video.saliency) j["saliency"].push_back({{"t", x.t}, {"value", x.value}});
      break;
    }
    case Modality::Humming:
      j["notes"] = json::array();
      for (const auto& n : f.humming_notes)
        j["notes"].push_back({{"onset_s", n.onset_s}, {"offset_s", n.offset_s}, {"pitch", n.pitch}, {"velocity", n.velocity}});
      j["beats"] = f.humming_beats;
      break;
  }
  return j;
}

PercentileTables tables_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != "xmusic.percentile_tables")
      invalid("not an xmusic.percentile_tables document");
    if (j.value("version", 0) != kTablesSchemaVersion) invalid("unsupported percentile_tables schema version");
    return {PercentileTable(j.at("flow").get<std::vector<double>>()),
            PercentileTable(j.at("saliency").get<std::vector<double>>())};
  } catch (const json::exception& e) {
    invalid(e.what());
  }
}

json tables_to_json(const PercentileTables& t) {
  return {{"schema", "xmusic.percentile_tables"},
          {"version", kTablesSchemaVersion},
          {"flow", t.flow.samples()},
          {"saliency", t.saliency.samples()}};
}

PercentileTables build_tables(const std::vector<PromptFeatures>& corpus) {
  std::vector<double> flow, saliency;
  for (const auto& f : corpus) {
    if (f.modality != Modality::Video) continue;
    const auto& v = f.video;
    const int n_bar = video_bar_count(v.duration_s, video_tempo_raw(v.scene_count, v.duration_s));
    if (!v.flow.empty())
      for (double x : flow_per_bar(v.flow, v.duration_s, n_bar)) flow.push_back(x);
    for (const auto& s : v.saliency) saliency.push_back(s.value);
  }
  if (flow.empty() || saliency.empty()) throw Error(ErrorCode::TableEmpty, "no video flow or saliency samples in corpus");
  return {PercentileTable(std::move(flow)), PercentileTable(std::move(saliency))};
}

ProjectionElements project(const PromptFeatures& f, const PercentileTables* tables) {
  ProjectionElements out;
  switch (f.modality) {
    case Modality::Image:
      out.emotion = EmotionElement{fuse_image_scores(f.resnet_scores, f.clip_scores), {}};
      break;
    case Modality::Text:
      out.emotion = EmotionElement{text_emotion(f.similarities), {}};
      break;
    case Modality::Tag:
      out = tag_to_element(f.tag);
      break;
    case Modality::Video: {
      if (!tables) throw Error(ErrorCode::TableEmpty, "video projection needs percentile tables");
      const auto& v = f.video;
      const double bpm = video_tempo_raw(v.scene_count, v.duration_s);
      const int n_bar = video_bar_count(v.duration_s, bpm);
      auto emo = video_emotion(group_frames(v.frames, v.duration_s, n_bar));
      out.emotion = EmotionElement{emo.global, emo.bars};
      out.rhythm = video_rhythm(v.flow, v.saliency, bpm, v.duration_s, *tables);
      break;
    }
    case Modality::Humming:
      out = humming_to_elements(standardize_humming(f.humming_notes, f.humming_beats));
      break;
  }
  return out;
}

}  // namespace xmusic::xp
