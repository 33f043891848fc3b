#include "xmusic/projection.hpp"

#include <cmath>

#include "xmusic/error.hpp"
#include "xmusic/score.hpp"

namespace xmusic {

using nlohmann::json;

std::optional<Modality> modality_from_name(std::string_view name) {
  for (int i = 0; i < kModalityCount; ++i)
    if (kModalityNames[i] == name) return static_cast<Modality>(i);
  return std::nullopt;
}

std::vector<std::string> validate(const ProjectionElements& el) {
  std::vector<std::string> out;
  if (el.empty()) out.push_back("no element present");
  if (el.emotion) {
    if (static_cast<int>(el.emotion->global) >= kEmotionCount) out.push_back("emotion out of range");
    for (auto e : el.emotion->bars)
      if (static_cast<int>(e) >= kEmotionCount) out.push_back("bar emotion out of range");
  }
  if (el.genre && static_cast<int>(el.genre->genre) >= kGenreCount) out.push_back("genre out of range");
  if (el.rhythm) {
    const auto& r = *el.rhythm;
    if (r.bars.empty()) out.push_back("rhythm has no bars");
    if (r.beats.size() != r.bars.size() * grid::kBeatsPerBar)
      out.push_back("rhythm beat count " + std::to_string(r.beats.size()) + " is not 4 x " +
                    std::to_string(r.bars.size()) + " bars");
    for (std::size_t i = 0; i < r.bars.size(); ++i) {
      const auto& b = r.bars[i];
      if (!std::isfinite(b.start_s) || b.start_s < 0) out.push_back("bar start must be finite and non-negative");
      if (i > 0 && !(b.start_s > r.bars[i - 1].start_s)) out.push_back("bar starts must strictly increase");
      if (b.density < 0 || b.density > 32) out.push_back("bar density outside 0..32");
    }
    for (std::size_t i = 0; i < r.beats.size(); ++i) {
      const auto& b = r.beats[i];
      if (!std::isfinite(b.start_s) || b.start_s < 0) out.push_back("beat start must be finite and non-negative");
      if (i > 0 && !(b.start_s > r.beats[i - 1].start_s)) out.push_back("beat starts must strictly increase");
      if (!(b.tempo_bpm >= grid::kTempoMin && b.tempo_bpm <= grid::kTempoMax)) out.push_back("beat tempo outside 32..224");
      if (b.strength < 0 || b.strength > 36) out.push_back("beat strength outside 0..36");
    }
  }
  if (el.notes) {
    for (const auto& n : el.notes->notes) {
      if (n.onset_step < 0) out.push_back("note onset before the start");
      if (n.pitch < 0 || n.pitch > 127) out.push_back("note pitch outside 0..127");
      if (n.duration_steps < 1 || n.duration_steps > grid::kMaxDurationSteps) out.push_back("note duration outside 1..32");
      if (n.velocity < 1 || n.velocity > 127) out.push_back("note velocity outside 1..127");
    }
  }
  return out;
}

std::vector<std::string> validate(const ProjectionElements& el, Modality source) {
  auto out = validate(el);
  const std::string from = std::string(name_of(source));
  auto forbid = [&](bool present, const char* what) {
    if (present) out.push_back(std::string(what) + " not derivable from " + from);
  };
  auto require = [&](bool present, const char* what) {
    if (!present) out.push_back(std::string(what) + " missing for " + from);
  };
  switch (source) {
    case Modality::Video:
      require(el.emotion.has_value(), "emotion");
      require(el.rhythm.has_value(), "rhythm");
      forbid(el.genre.has_value(), "genre");
      forbid(el.notes.has_value(), "notes");
      break;
    case Modality::Image:
    case Modality::Text:
      require(el.emotion.has_value(), "emotion");
      forbid(el.genre.has_value(), "genre");
      forbid(el.rhythm.has_value(), "rhythm");
      forbid(el.notes.has_value(), "notes");
      break;
    case Modality::Tag:
      if (el.emotion.has_value() == el.genre.has_value())
        out.push_back("tag yields exactly one of emotion or genre");
      forbid(el.rhythm.has_value(), "rhythm");
      forbid(el.notes.has_value(), "notes");
      break;
    case Modality::Humming:
      require(el.rhythm.has_value(), "rhythm");
      require(el.notes.has_value(), "notes");
      forbid(el.emotion.has_value(), "emotion");
      forbid(el.genre.has_value(), "genre");
      break;
  }
  if (source != Modality::Video && el.emotion && !el.emotion->bars.empty())
    out.push_back("bar-level emotion not derivable from " + from);
  return out;
}

namespace projection_io {

namespace {

[[noreturn]] void invalid(const std::string& m) { throw Error(ErrorCode::InvalidElements, m); }

Emotion parse_emotion(const json& j) {
  if (!j.is_string()) invalid("emotion must be a name");
  auto e = emotion_from_name(j.get<std::string>());
  if (!e) invalid("unknown emotion '" + j.get<std::string>() + "'");
  return *e;
}

}  // namespace

json to_json(const ProjectionElements& el, std::optional<Modality> source) {
  json j = {{"schema", "xmusic.projection"}, {"version", kSchemaVersion}};
  if (source) j["modality"] = name_of(*source);
  if (el.emotion) {
    j["emotion"] = name_of(el.emotion->global);
    if (!el.emotion->bars.empty()) {
      j["bar_emotions"] = json::array();
      for (auto e : el.emotion->bars) j["bar_emotions"].push_back(name_of(e));
    }
  }
  if (el.genre) j["genre"] = name_of(el.genre->genre);
  if (el.rhythm) {
    json bars = json::array(), beats = json::array();
    for (const auto& b : el.rhythm->bars) bars.push_back({{"start_s", b.start_s}, {"density", b.density}});
    for (const auto& b : el.rhythm->beats)
      beats.push_back({{"start_s", b.start_s}, {"tempo_bpm", b.tempo_bpm}, {"strength", b.strength}});
    j["rhythm"] = {{"bars", bars}, {"beats", beats}};
  }
  if (el.notes) {
    json notes = json::array();
    for (const auto& n : el.notes->notes)
      notes.push_back({{"onset_step", n.onset_step},
                       {"pitch", n.pitch},
                       {"duration_steps", n.duration_steps},
                       {"velocity", n.velocity}});
    j["notes"] = notes;
  }
  return j;
}

ProjectionElements from_json(const json& j, std::optional<Modality>* source) {
  try {
    if (!j.is_object() || j.value("schema", "") != "xmusic.projection") invalid("not an xmusic.projection document");
    if (j.value("version", 0) != kSchemaVersion) invalid("unsupported projection schema version");
    ProjectionElements el;
    if (source) {
      *source = std::nullopt;
      if (j.contains("modality")) {
        *source = modality_from_name(j.at("modality").get<std::string>());
        if (!*source) invalid("unknown modality");
      }
    }
    if (j.contains("emotion")) {
      EmotionElement e;
      e.global = parse_emotion(j.at("emotion"));
      if (j.contains("bar_emotions"))
        for (const auto& b : j.at("bar_emotions")) e.bars.push_back(parse_emotion(b));
      el.emotion = e;
    } else if (j.contains("bar_emotions")) {
      invalid("bar_emotions without emotion");
    }
    if (j.contains("genre")) {
      auto g = genre_from_name(j.at("genre").get<std::string>());
      if (!g) invalid("unknown genre");
      el.genre = GenreElement{*g};
    }
    if (j.contains("rhythm")) {
      RhythmElement r;
      for (const auto& b : j.at("rhythm").at("bars"))
        r.bars.push_back({b.at("start_s").get<double>(), b.at("density").get<int>()});
      for (const auto& b : j.at("rhythm").at("beats"))
        r.beats.push_back({b.at("start_s").get<double>(), b.at("tempo_bpm").get<double>(), b.at("strength").get<int>()});
      el.rhythm = std::move(r);
    }
    if (j.contains("notes")) {
      NoteElement n;
      for (const auto& x : j.at("notes"))
        n.notes.push_back({x.at("onset_step").get<int>(), x.at("pitch").get<int>(), x.at("duration_steps").get<int>(),
                           x.at("velocity").get<int>()});
      el.notes = std::move(n);
    }
    return el;
  } catch (const json::exception& e) {
    invalid(e.what());
  }
}

}  // namespace projection_io

}  // namespace xmusic
