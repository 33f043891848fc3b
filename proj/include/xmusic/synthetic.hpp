/**
 * @file synthetic.hpp
 * @brief Generators for random scores and the labeled toy corpora used to
 * train and check the desk-scale models.
 */
#pragma once

#include <vector>

#include "xmusic/events.hpp"
#include "xmusic/rng.hpp"
#include "xmusic/score.hpp"

namespace xmusic::synthetic {

struct RandomScoreOptions {
  int bars = 4;                 // notes start within this many bars
  int max_notes = 48;
  int max_instruments = 3;
  bool drums = true;
  bool tempo_changes = true;
  int ticks_per_quarter = 480;
  bool off_grid = false;        // jitter ticks, velocities and tempos off the grid
  int max_duration_steps = 48;  // may exceed 32 to exercise splitting
};

/// A random valid Score (invariants hold) that is not necessarily quantized.
Score random_score(Rng& rng, const RandomScoreOptions& opts = {});

/// quantize_score(random_score(...)).
Score random_quantized_score(Rng& rng, const RandomScoreOptions& opts = {});

/// Pitch register an emotion selects in the register corpus: low, middle or high.
int register_of(Emotion e);
/// Inclusive MIDI pitch range of a register.
std::pair<int, int> register_range(int reg);

/// One labeled piano piece whose pitches all lie in the emotion's register.
/// Rhythm: one of a few fixed onset patterns, repeated per bar.
Score register_piece(Rng& rng, Emotion emotion, int bars);

/// `count` encoded pieces with emotions drawn uniformly from all 11 classes and
/// random genres.
std::vector<EventSequence> register_corpus(std::size_t count, std::uint64_t seed, int bars = 2);

struct QualityExample {
  EventSequence sequence;
  int quality = 0;  // 1 = meets the standard
  Emotion emotion{};
  Genre genre{};
};

/// Labeled pieces for selector training. Emotion sets the pitch register,
/// genre sets the rhythmic density, and quality depends on both: a piece is
/// high quality when its melody stays in-key and its rhythm is steady, with
/// the exact in-key/steady tests varying by emotion and genre.
std::vector<QualityExample> quality_corpus(std::size_t count, std::uint64_t seed);

}  // namespace xmusic::synthetic
