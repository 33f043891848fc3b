#include "xmusic/synthetic.hpp"

#include <algorithm>
#include <array>

namespace xmusic::synthetic {

namespace {

using grid::kStepsPerBar;
using grid::kTicksPerStep;

constexpr std::array<std::array<int, 8>, kGenreCount> kGenrePatterns = {{
    {0, 4, 8, 12, 16, 20, 24, 28},   // rock
    {0, 8, 12, 16, 24, -1, -1, -1},  // pop
    {0, 8, 16, 24, -1, -1, -1, -1},  // country
    {0, 6, 8, 14, 16, 22, 24, 30},   // jazz
    {0, 8, 16, 20, 24, -1, -1, -1},  // classical
    {0, 12, 16, 24, -1, -1, -1, -1}, // folk
}};

std::vector<int> pattern_of(Genre g) {
  std::vector<int> out;
  for (int p : kGenrePatterns[static_cast<int>(g)])
    if (p >= 0) out.push_back(p);
  return out;
}

bool positive(Emotion e) {
  switch (e) {
    case Emotion::Exciting:
    case Emotion::Warm:
    case Emotion::Happy:
    case Emotion::Romantic:
    case Emotion::Funny:
    case Emotion::Magnificent:
      return true;
    default:
      return false;
  }
}

std::vector<int> scale_pitches(Emotion e) {
  static constexpr int major[] = {0, 2, 4, 5, 7, 9, 11};
  static constexpr int minor[] = {0, 2, 3, 5, 7, 8, 10};
  const int tonic = (static_cast<int>(e) * 7) % 12;
  auto [lo, hi] = register_range(register_of(e));
  std::vector<int> out;
  for (int p = lo; p <= hi + 12; ++p) {
    const int rel = ((p - tonic) % 12 + 12) % 12;
    const auto& steps = positive(e) ? major : minor;
    if (std::find(std::begin(steps), std::end(steps), rel) != std::end(steps)) out.push_back(p);
  }
  return out;
}

Note grid_note(int pitch, std::int64_t on_step, std::int64_t off_step, int velocity) {
  return {pitch, on_step * kTicksPerStep, off_step * kTicksPerStep, velocity};
}

}  // namespace

Score random_score(Rng& rng, const RandomScoreOptions& opts) {
  Score s;
  s.ticks_per_quarter = opts.ticks_per_quarter;
  const double ticks_per_step = opts.ticks_per_quarter / 8.0;
  const std::int64_t total_steps = static_cast<std::int64_t>(opts.bars) * kStepsPerBar;
  auto to_tick = [&](std::int64_t step) {
    double t = step * ticks_per_step;
    if (opts.off_grid) t += (rng.uniform() - 0.5) * ticks_per_step * 0.9;
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::llround(t)));
  };

  s.tempo_map.push_back({0, opts.off_grid ? 30.0 + rng.uniform() * 200.0
                                          : static_cast<double>(grid::tempo_of_bin(rng.uniform_int(0, 64)))});
  if (opts.tempo_changes) {
    const int changes = rng.uniform_int(0, 3);
    for (int i = 0; i < changes; ++i) {
      const double bpm = opts.off_grid ? 30.0 + rng.uniform() * 200.0
                                       : static_cast<double>(grid::tempo_of_bin(rng.uniform_int(0, 64)));
      s.tempo_map.push_back({to_tick(rng.uniform_int(1, static_cast<int>(total_steps) - 1)), bpm});
    }
    std::stable_sort(s.tempo_map.begin(), s.tempo_map.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
  }

  const int n_instruments = rng.uniform_int(1, std::max(1, opts.max_instruments));
  const int n_notes = rng.uniform_int(0, opts.max_notes);
  std::vector<InstrumentClass> classes;
  for (int i = 0; i < n_instruments; ++i) {
    int c = rng.uniform_int(0, opts.drums ? kInstrumentClassCount - 1 : kInstrumentClassCount - 2);
    classes.push_back(static_cast<InstrumentClass>(c));
  }
  for (auto c : classes) s.tracks.push_back({c, {}});
  for (int i = 0; i < n_notes && !s.tracks.empty(); ++i) {
    auto& track = s.tracks[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(s.tracks.size()) - 1))];
    const std::int64_t on = rng.uniform_int(0, static_cast<int>(total_steps) - 1);
    const std::int64_t len = rng.uniform_int(1, opts.max_duration_steps);
    const int pitch = track.instrument == InstrumentClass::Drum ? rng.uniform_int(35, 81) : rng.uniform_int(21, 108);
    const int velocity = opts.off_grid ? rng.uniform_int(1, 127) : grid::velocity_of_bin(rng.uniform_int(0, 43));
    std::int64_t on_tick = to_tick(on);
    std::int64_t off_tick = std::max(on_tick + 1, to_tick(on + len));
    track.notes.push_back({pitch, on_tick, off_tick, velocity});
  }
  for (auto& t : s.tracks) std::sort(t.notes.begin(), t.notes.end(), note_before);
  return s;
}

Score random_quantized_score(Rng& rng, const RandomScoreOptions& opts) {
  return quantize_score(random_score(rng, opts));
}

int register_of(Emotion e) { return static_cast<int>(e) % 3; }

std::pair<int, int> register_range(int reg) {
  switch (reg) {
    case 0: return {36, 47};
    case 1: return {60, 71};
    default: return {84, 95};
  }
}

Score register_piece(Rng& rng, Emotion emotion, int bars) {
  static const std::vector<std::vector<int>> patterns = {
      {0, 8, 16, 24}, {0, 8, 12, 16, 24}, {0, 4, 8, 16, 20, 24}, {0, 16}, {0, 8, 16, 20, 24, 28}};
  Score s;
  s.tempo_map = {{0, static_cast<double>(grid::tempo_of_bin(rng.uniform_int(20, 40)))}};
  Track t{InstrumentClass::Piano, {}};
  auto [lo, hi] = register_range(register_of(emotion));
  const auto& pattern = patterns[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(patterns.size()) - 1))];
  for (int b = 0; b < bars; ++b) {
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      const std::int64_t on = b * kStepsPerBar + pattern[i];
      const std::int64_t next = i + 1 < pattern.size() ? b * kStepsPerBar + pattern[i + 1] : (b + 1) * kStepsPerBar;
      t.notes.push_back(grid_note(rng.uniform_int(lo, hi), on, next, grid::velocity_of_bin(rng.uniform_int(20, 35))));
    }
  }
  s.tracks.push_back(std::move(t));
  return quantize_score(s);
}

std::vector<EventSequence> register_corpus(std::size_t count, std::uint64_t seed, int bars) {
  Rng rng(seed);
  std::vector<EventSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto e = static_cast<Emotion>(rng.uniform_int(0, kEmotionCount - 1));
    const auto g = static_cast<Genre>(rng.uniform_int(0, kGenreCount - 1));
    auto seq = encode(register_piece(rng, e, bars), e, g);
    seq.source = "register-" + std::to_string(i);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<QualityExample> quality_corpus(std::size_t count, std::uint64_t seed) {
  constexpr int kBars = 4;
  Rng rng(seed);
  std::vector<QualityExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    QualityExample ex;
    ex.emotion = static_cast<Emotion>(rng.uniform_int(0, kEmotionCount - 1));
    ex.genre = static_cast<Genre>(rng.uniform_int(0, kGenreCount - 1));
    const bool good = rng.bernoulli(0.5);
    bool bad_pitch = false;
    bool bad_rhythm = false;
    if (!good) {
      const int kind = rng.uniform_int(0, 2);
      bad_pitch = kind != 1;
      bad_rhythm = kind != 0;
    }
    ex.quality = good ? 1 : 0;

    const auto scale = scale_pitches(ex.emotion);
    auto [lo, hi] = register_range(register_of(ex.emotion));
    const auto pattern = pattern_of(ex.genre);
    Score s;
    s.tempo_map = {{0, static_cast<double>(grid::tempo_of_bin(rng.uniform_int(20, 40)))}};
    Track t{InstrumentClass::Piano, {}};
    for (int b = 0; b < kBars; ++b) {
      std::vector<int> positions = pattern;
      if (bad_rhythm) {
        positions.clear();
        const int n = rng.uniform_int(1, 4);
        for (int k = 0; k < n; ++k) positions.push_back(rng.uniform_int(0, kStepsPerBar - 1));
        std::sort(positions.begin(), positions.end());
        positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
      }
      for (std::size_t k = 0; k < positions.size(); ++k) {
        const std::int64_t on = b * kStepsPerBar + positions[k];
        const std::int64_t off =
            k + 1 < positions.size() ? b * kStepsPerBar + positions[k + 1] : (b + 1) * kStepsPerBar;
        int pitch = scale[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(scale.size()) - 1))];
        if (bad_pitch && rng.bernoulli(0.6)) pitch = rng.uniform_int(lo, hi);
        t.notes.push_back(grid_note(pitch, on, off, grid::velocity_of_bin(rng.uniform_int(25, 35))));
      }
    }
    s.tracks.push_back(std::move(t));
    ex.sequence = encode(quantize_score(s), ex.emotion, ex.genre);
    ex.sequence.source = "quality-" + std::to_string(i);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace xmusic::synthetic
