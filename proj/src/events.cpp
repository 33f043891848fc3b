#include "xmusic/events.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "xmusic/error.hpp"

namespace xmusic {

namespace {

constexpr std::array<std::string_view, 12> kRootNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                         "F#", "G",  "G#", "A",  "A#", "B"};

struct Quality {
  std::string_view name;
  std::array<bool, 12> tones;
};

constexpr Quality quality(std::string_view name, std::initializer_list<int> intervals) {
  Quality q{name, {}};
  for (int i : intervals) q.tones[i] = true;
  return q;
}

const std::array<Quality, vocab::kChordQualities> kQualities = {
    quality("M", {0, 4, 7}),        quality("m", {0, 3, 7}),        quality("o", {0, 3, 6}),
    quality("+", {0, 4, 8}),        quality("sus2", {0, 2, 7}),     quality("sus4", {0, 5, 7}),
    quality("7", {0, 4, 7, 10}),    quality("M7", {0, 4, 7, 11}),   quality("m7", {0, 3, 7, 10}),
    quality("o7", {0, 3, 6, 9}),    quality("/o7", {0, 3, 6, 10}),
};

struct Onset {
  std::int64_t step;
  int instrument;
  int pitch_index;
  int duration_index;
  int velocity_bin;

  auto key() const { return std::tie(step, instrument, pitch_index, duration_index, velocity_bin); }
};

}  // namespace

CompoundEvent CompoundEvent::blank(Family f, const VocabSpec& vocab) {
  CompoundEvent e;
  for (int i = 1; i < kAttributeCount; ++i) e.values[i] = static_cast<std::uint16_t>(vocab.base[i]);
  e.values[0] = static_cast<std::uint16_t>(f);
  return e;
}

CompoundEvent make_tag(const VocabSpec& v, std::optional<Emotion> e, std::optional<Genre> g) {
  auto ev = CompoundEvent::blank(Family::Tag, v);
  if (e) ev.set(Attribute::Emotion, static_cast<int>(*e));
  if (g) ev.set(Attribute::Genre, static_cast<int>(*g));
  return ev;
}

CompoundEvent make_bar(const VocabSpec& v, int density) {
  auto ev = CompoundEvent::blank(Family::Rhythm, v);
  ev.set(Attribute::BarBeat, vocab::kBarMarker);
  ev.set(Attribute::Density, density);
  ev.set(Attribute::Tempo, v.conti(Attribute::Tempo));
  ev.set(Attribute::Chord, v.conti(Attribute::Chord));
  return ev;
}

CompoundEvent make_beat(const VocabSpec& v, int position, int tempo_bin, int chord, int strength) {
  auto ev = CompoundEvent::blank(Family::Rhythm, v);
  ev.set(Attribute::BarBeat, position);
  ev.set(Attribute::Tempo, tempo_bin);
  ev.set(Attribute::Chord, chord);
  ev.set(Attribute::Strength, strength);
  return ev;
}

CompoundEvent make_instrument(const VocabSpec& v, InstrumentClass c) {
  auto ev = CompoundEvent::blank(Family::Instrument, v);
  ev.set(Attribute::Program, static_cast<int>(c));
  return ev;
}

CompoundEvent make_note(const VocabSpec& v, int pitch_index, int duration_index, int velocity_bin) {
  auto ev = CompoundEvent::blank(Family::Note, v);
  ev.set(Attribute::Pitch, pitch_index);
  ev.set(Attribute::Duration, duration_index);
  ev.set(Attribute::Velocity, velocity_bin);
  return ev;
}

CompoundEvent make_eos(const VocabSpec& v) { return CompoundEvent::blank(Family::Eos, v); }

int compute_density(std::size_t onsets_in_bar) {
  return static_cast<int>(std::min<std::size_t>(onsets_in_bar, vocab::kMaxDensity));
}

int compute_strength(std::size_t onsets_at_position) {
  return static_cast<int>(std::min<std::size_t>(onsets_at_position, vocab::kMaxStrength));
}

int detect_chord(std::span<const double, 12> w) {
  double total = 0;
  for (double x : w) total += x;
  if (total <= 0) return vocab::kNoChord;
  int best = vocab::kNoChord;
  double best_score = 0;
  int best_size = 0;
  for (int root = 0; root < 12; ++root) {
    for (int q = 0; q < vocab::kChordQualities; ++q) {
      double in = 0;
      int size = 0;
      for (int pc = 0; pc < 12; ++pc) {
        if (!kQualities[q].tones[(pc - root + 12) % 12]) continue;
        in += w[pc];
        ++size;
      }
      double score = in - (total - in);
      // equal scores: the smaller template explains the same notes with fewer tones
      if (best == vocab::kNoChord || score > best_score || (score == best_score && size < best_size)) {
        best = root * vocab::kChordQualities + q;
        best_score = score;
        best_size = size;
      }
    }
  }
  return best;
}

std::string chord_name(int chord) {
  if (chord < 0 || chord >= vocab::kNoChord) return "N.C.";
  return std::string(kRootNames[chord / vocab::kChordQualities]) +
         std::string(kQualities[chord % vocab::kChordQualities].name);
}

EventSequence encode(const Score& score, std::optional<Emotion> emotion, std::optional<Genre> genre,
                     const VocabSpec& vocab) {
  using namespace grid;
  auto unencodable = [](const std::string& m) { throw Error(ErrorCode::UnencodableScore, m); };
  if (score.ticks_per_quarter != kTicksPerQuarter) unencodable("score is not at 480 ticks per quarter");

  std::vector<Onset> onsets;
  std::vector<std::array<double, 12>> chroma;  // per half-bar
  auto add_chroma = [&](std::int64_t on, std::int64_t off, int pitch) {
    for (std::int64_t s = on; s < off; ++s) {
      std::size_t half = static_cast<std::size_t>(s / (kStepsPerBar / 2));
      if (chroma.size() <= half) chroma.resize(half + 1, std::array<double, 12>{});
      chroma[half][pitch % 12] += 1.0;
    }
  };

  for (const auto& track : score.tracks) {
    const bool drum = track.instrument == InstrumentClass::Drum;
    for (const auto& n : track.notes) {
      if (n.onset % kTicksPerStep || n.offset % kTicksPerStep || n.onset < 0 || n.offset <= n.onset)
        unencodable("note is off the 32nd-note grid");
      std::int64_t on = n.onset / kTicksPerStep;
      std::int64_t off = n.offset / kTicksPerStep;
      if (!drum) add_chroma(on, off, n.pitch);
      for (std::int64_t s = on; s < off; s += kMaxDurationSteps) {
        auto dur = static_cast<int>(std::min<std::int64_t>(off - s, kMaxDurationSteps));
        onsets.push_back({s, static_cast<int>(track.instrument),
                          drum ? vocab::kPitchDrumOffset + n.pitch : n.pitch, dur - 1,
                          velocity_bin(n.velocity)});
      }
    }
  }
  std::sort(onsets.begin(), onsets.end(), [](const Onset& a, const Onset& b) { return a.key() < b.key(); });

  std::map<std::int64_t, int> tempo_changes;  // step -> tempo bin
  for (const auto& tc : score.tempo_map) {
    if (tc.tick % kTicksPerStep) unencodable("tempo change is off the 32nd-note grid");
    tempo_changes[tc.tick / kTicksPerStep] = tempo_bin(tc.bpm);
  }
  if (tempo_changes.empty() || tempo_changes.begin()->first != 0)
    tempo_changes.emplace(0, tempo_bin(120.0));

  EventSequence seq;
  seq.labels = {emotion, genre};
  const bool default_tempo = tempo_changes.size() == 1 && tempo_changes.begin()->second == tempo_bin(120.0);
  if (onsets.empty() && default_tempo) {
    seq.events = {make_tag(vocab, emotion, genre), make_eos(vocab)};
    return seq;
  }

  std::int64_t last_step = tempo_changes.rbegin()->first;
  if (!onsets.empty()) last_step = std::max(last_step, onsets.back().step);
  const std::int64_t n_bars = last_step / kStepsPerBar + 1;
  chroma.resize(static_cast<std::size_t>(n_bars * 2), std::array<double, 12>{});

  std::size_t next = 0;
  int tempo = tempo_changes.begin()->second;
  for (std::int64_t bar = 0; bar < n_bars; ++bar) {
    const std::int64_t bar_start = bar * kStepsPerBar;
    const std::int64_t bar_end = bar_start + kStepsPerBar;
    std::size_t bar_end_idx = next;
    while (bar_end_idx < onsets.size() && onsets[bar_end_idx].step < bar_end) ++bar_end_idx;

    seq.events.push_back(make_tag(vocab, emotion, genre));
    seq.events.push_back(make_bar(vocab, compute_density(bar_end_idx - next)));

    std::vector<int> positions = {0, 8, 16, 24};
    for (std::size_t i = next; i < bar_end_idx; ++i)
      positions.push_back(static_cast<int>(onsets[i].step - bar_start));
    for (auto it = tempo_changes.lower_bound(bar_start); it != tempo_changes.end() && it->first < bar_end; ++it)
      positions.push_back(static_cast<int>(it->first - bar_start));
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

    for (int pos : positions) {
      const std::int64_t step = bar_start + pos;
      if (auto it = tempo_changes.find(step); it != tempo_changes.end()) tempo = it->second;
      std::size_t end = next;
      while (end < bar_end_idx && onsets[end].step == step) ++end;
      const int chord = detect_chord(std::span<const double, 12>(chroma[static_cast<std::size_t>(step / 16)]));
      seq.events.push_back(make_beat(vocab, pos, tempo, chord, compute_strength(end - next)));
      int current = -1;
      for (std::size_t i = next; i < end; ++i) {
        if (onsets[i].instrument != current) {
          current = onsets[i].instrument;
          seq.events.push_back(make_instrument(vocab, static_cast<InstrumentClass>(current)));
        }
        seq.events.push_back(
            make_note(vocab, onsets[i].pitch_index, onsets[i].duration_index, onsets[i].velocity_bin));
      }
      next = end;
    }
  }
  seq.events.push_back(make_eos(vocab));
  return seq;
}

namespace {

std::string walk(const EventSequence& seq, const VocabSpec& vocab, Decoded* out) {
  using namespace grid;
  const auto& ev = seq.events;
  if (ev.empty()) return "empty sequence";
  if (ev.front().family() != Family::Tag) return "sequence must begin with a Tag event";

  std::array<std::vector<Note>, kInstrumentClassCount> notes;
  std::vector<TempoChange> tempo_map;
  std::int64_t bar = -1;
  int pos = -1;
  int instrument = -1;
  bool awaiting_bar = false;
  bool awaiting_note = false;
  bool saw_eos = false;

  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    const std::string at = "event " + std::to_string(i) + ": ";
    if (saw_eos) return at + "event after EOS";
    if (e.values[0] >= kFamilyCount) return at + "family index out of range";
    for (int a = 1; a < kAttributeCount; ++a) {
      const auto attr = static_cast<Attribute>(a);
      if (e.values[a] >= vocab.size(attr))
        return at + std::string(kAttributeNames[a]) + " index " + std::to_string(e.values[a]) + " out of range";
      if (!family_activates(e.family(), attr) && e.values[a] != vocab.ignore(attr))
        return at + std::string(kAttributeNames[a]) + " must be IGNORE for " +
               std::string(kFamilyNames[e.values[0]]);
    }
    auto regular = [&](Attribute a) { return e.get(a) < vocab.base[index_of(a)]; };
    if (awaiting_note && e.family() != Family::Note) return at + "Instrument event must be followed by a Note";
    if (awaiting_bar && !(e.family() == Family::Rhythm && e.get(Attribute::BarBeat) == vocab::kBarMarker)) {
      const bool lone_tag = i == 1 && ev.size() == 2 && e.family() == Family::Eos;
      if (!lone_tag) return at + "Tag event must be followed by a bar event";
    }

    switch (e.family()) {
      case Family::Tag: {
        if (out) {
          SequenceLabels l;
          if (regular(Attribute::Emotion)) l.emotion = static_cast<Emotion>(e.get(Attribute::Emotion));
          if (regular(Attribute::Genre)) l.genre = static_cast<Genre>(e.get(Attribute::Genre));
          if (i == 0) out->labels = l;
          out->bar_labels.push_back(l);
        }
        awaiting_bar = true;
        break;
      }
      case Family::Rhythm: {
        const int bb = e.get(Attribute::BarBeat);
        if (bb == vocab::kBarMarker) {
          if (!awaiting_bar) return at + "bar event without a preceding Tag";
          if (!regular(Attribute::Density)) return at + "bar event needs a density";
          if (e.get(Attribute::Tempo) != vocab.conti(Attribute::Tempo) ||
              e.get(Attribute::Chord) != vocab.conti(Attribute::Chord))
            return at + "bar event must carry CONTI tempo and chord";
          if (e.get(Attribute::Strength) != vocab.ignore(Attribute::Strength))
            return at + "bar event must not carry strength";
          awaiting_bar = false;
          ++bar;
          pos = -1;
          instrument = -1;
        } else {
          if (bar < 0) return at + "beat event before any bar";
          if (bb <= pos) return at + "beat positions must increase within a bar";
          if (!regular(Attribute::Tempo) || !regular(Attribute::Chord) || !regular(Attribute::Strength))
            return at + "beat event needs tempo, chord and strength";
          if (e.get(Attribute::Density) != vocab.ignore(Attribute::Density))
            return at + "beat event must not carry density";
          pos = bb;
          instrument = -1;
          const double bpm = tempo_of_bin(e.get(Attribute::Tempo));
          const std::int64_t tick = (bar * kStepsPerBar + pos) * kTicksPerStep;
          if (tempo_map.empty() || tempo_map.back().bpm != bpm) tempo_map.push_back({tick, bpm});
        }
        break;
      }
      case Family::Instrument: {
        if (pos < 0) return at + "Instrument event before any beat event";
        if (!regular(Attribute::Program)) return at + "Instrument event needs a program";
        instrument = e.get(Attribute::Program);
        awaiting_note = true;
        break;
      }
      case Family::Note: {
        if (instrument < 0) return at + "Note event before any Instrument event";
        if (!regular(Attribute::Pitch) || !regular(Attribute::Duration) || !regular(Attribute::Velocity))
          return at + "Note event needs pitch, duration and velocity";
        const bool drum = instrument == static_cast<int>(InstrumentClass::Drum);
        const int p = e.get(Attribute::Pitch);
        if (drum != (p >= vocab::kPitchDrumOffset))
          return at + (drum ? "drum note needs a pseudo-pitch" : "melodic note cannot use a pseudo-pitch");
        awaiting_note = false;
        if (out) {
          const std::int64_t onset = (bar * kStepsPerBar + pos) * kTicksPerStep;
          const std::int64_t offset = onset + (e.get(Attribute::Duration) + 1) * kTicksPerStep;
          notes[instrument].push_back({drum ? p - vocab::kPitchDrumOffset : p, onset, offset,
                                       velocity_of_bin(e.get(Attribute::Velocity))});
        }
        break;
      }
      case Family::Eos:
        saw_eos = true;
        break;
    }
  }
  if (!saw_eos) return "sequence must end with EOS";

  if (out) {
    Score& s = out->score;
    s.ticks_per_quarter = kTicksPerQuarter;
    s.time_signature = {4, 4};
    s.tempo_map = tempo_map.empty() ? std::vector<TempoChange>{{0, grid::snap_tempo(120.0)}} : std::move(tempo_map);
    for (int c = 0; c < kInstrumentClassCount; ++c) {
      if (notes[c].empty()) continue;
      std::sort(notes[c].begin(), notes[c].end(), note_before);
      s.tracks.push_back({static_cast<InstrumentClass>(c), std::move(notes[c])});
    }
  }
  return {};
}

}  // namespace

Decoded decode(const EventSequence& seq, const VocabSpec& vocab) {
  Decoded out;
  if (auto err = walk(seq, vocab, &out); !err.empty()) throw Error(ErrorCode::MalformedSequence, err);
  return out;
}

std::string check_sequence(const EventSequence& seq, const VocabSpec& vocab) { return walk(seq, vocab, nullptr); }

}  // namespace xmusic
