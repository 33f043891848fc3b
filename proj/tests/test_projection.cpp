#include "doctest.h"
#include "xmusic/error.hpp"
#include "xmusic/projection.hpp"

using namespace xmusic;

namespace {

RhythmElement two_bar_rhythm() {
  RhythmElement r;
  for (int i = 0; i < 2; ++i) {
    r.bars.push_back({4.0 * i, 3});
    for (int j = 0; j < 4; ++j) r.beats.push_back({4.0 * i + j, 100.0, 1});
  }
  return r;
}

bool mentions(const std::vector<std::string>& v, const std::string& text) {
  for (const auto& s : v)
    if (s.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("activation patterns") {
  ProjectionElements happy;
  happy.emotion = EmotionElement{Emotion::Happy, {}};
  CHECK(validate(happy, Modality::Image).empty());
  CHECK(validate(happy, Modality::Text).empty());
  CHECK(validate(happy, Modality::Tag).empty());
  CHECK(!validate(happy, Modality::Humming).empty());

  ProjectionElements rhythm_only;
  rhythm_only.rhythm = two_bar_rhythm();
  auto v = validate(rhythm_only, Modality::Image);
  CHECK(mentions(v, "rhythm not derivable from image"));

  ProjectionElements hum;
  hum.rhythm = two_bar_rhythm();
  hum.notes = NoteElement{{{0, 60, 8, 90}}};
  CHECK(validate(hum, Modality::Humming).empty());
  CHECK(mentions(validate(hum, Modality::Video), "notes not derivable from video"));

  ProjectionElements video;
  video.emotion = EmotionElement{Emotion::Sad, {Emotion::Sad, Emotion::Happy}};
  video.rhythm = two_bar_rhythm();
  CHECK(validate(video, Modality::Video).empty());
  CHECK(mentions(validate(video, Modality::Image), "bar-level emotion"));

  ProjectionElements both;
  both.emotion = EmotionElement{Emotion::Sad, {}};
  both.genre = GenreElement{Genre::Rock};
  CHECK(!validate(both, Modality::Tag).empty());

  CHECK(mentions(validate(ProjectionElements{}), "no element"));
}

TEST_CASE("element invariants") {
  ProjectionElements el;
  el.rhythm = two_bar_rhythm();
  CHECK(validate(el).empty());

  auto r = two_bar_rhythm();
  r.beats.pop_back();
  el.rhythm = r;
  CHECK(mentions(validate(el), "beat count"));

  r = two_bar_rhythm();
  r.beats[2].start_s = r.beats[1].start_s;
  el.rhythm = r;
  CHECK(mentions(validate(el), "strictly increase"));

  r = two_bar_rhythm();
  r.beats[0].tempo_bpm = 300;
  el.rhythm = r;
  CHECK(mentions(validate(el), "tempo"));

  r = two_bar_rhythm();
  r.bars[0].density = 33;
  el.rhythm = r;
  CHECK(mentions(validate(el), "density"));

  ProjectionElements notes;
  notes.notes = NoteElement{{{0, 60, 33, 90}}};
  CHECK(mentions(validate(notes), "duration"));
  notes.notes = NoteElement{{{0, 128, 8, 90}}};
  CHECK(mentions(validate(notes), "pitch"));
}

TEST_CASE("json round trip") {
  ProjectionElements el;
  el.emotion = EmotionElement{Emotion::Fear, {Emotion::Fear, Emotion::Quiet}};
  el.rhythm = two_bar_rhythm();
  auto j = projection_io::to_json(el, Modality::Video);
  std::optional<Modality> m;
  CHECK(projection_io::from_json(j, &m) == el);
  CHECK(m == Modality::Video);

  ProjectionElements g;
  g.genre = GenreElement{Genre::Folk};
  g.notes = NoteElement{{{4, 62, 3, 70}}};
  CHECK(projection_io::from_json(projection_io::to_json(g)) == g);

  j["emotion"] = "grumpy";
  CHECK_THROWS_AS(projection_io::from_json(j), Error);
  CHECK_THROWS_AS(projection_io::from_json(nlohmann::json::object()), Error);
}
