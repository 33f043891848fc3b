/**
 * @file selector.hpp
 * @brief Bidirectional encoder scoring whole event sequences for quality,
 * emotion and genre, and best-of-batch selection above a threshold.
 */
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "xmusic/event_embedding.hpp"
#include "xmusic/nn/transformer.hpp"
#include "xmusic/synthetic.hpp"

namespace xmusic {

struct SelectorConfig {
  static constexpr int kFullScaleLayers = 3;
  static constexpr int kFullScaleHeads = 8;
  static constexpr int kFullScaleHidden = 512;

  int layers = 2;
  int heads = 4;
  int hidden = 64;
  double embed_width_factor = 1.0 / 16;
  /// Longest sequence accepted by score().
  int context = 512;
  double threshold = 0.5;
  double learning_rate = 1e-3;
  double grad_clip = 0.5;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig.
  void validate() const;
  nlohmann::json to_json() const;
  static SelectorConfig from_json(const nlohmann::json& j);
  VocabSpec vocab() const { return VocabSpec::standard(embed_width_factor); }
};

inline constexpr int kQualityClasses = 2;

struct SelectorOutput {
  std::array<double, kQualityClasses> quality{};
  std::array<double, kEmotionCount> emotion{};
  std::array<double, kGenreCount> genre{};

  /// Probability of the high-quality class.
  double quality_score() const { return quality[1]; }
};

struct HeadMask {
  bool quality = true;
  bool emotion = true;
  bool genre = true;

  static HeadMask quality_only() { return {true, false, false}; }
  static HeadMask with_emotion() { return {true, true, false}; }
  static HeadMask all() { return {}; }
  bool operator==(const HeadMask&) const = default;
};

struct SelectorExample {
  EventSequence sequence;
  std::optional<int> quality;
  std::optional<Emotion> emotion;
  std::optional<Genre> genre;
};

std::vector<SelectorExample> to_selector_examples(const std::vector<synthetic::QualityExample>& xs);

struct SelectorTrainOptions {
  int steps = 300;
  int batch_size = 8;
  std::uint64_t seed = 1;
  HeadMask mask;
  double time_budget_s = 0;
  std::function<void(int step, double loss)> on_step;
};

struct SelectorTrainReport {
  std::vector<double> losses;
  int steps = 0;
  double seconds = 0;
};

class Selector {
 public:
  explicit Selector(const SelectorConfig& cfg);
  Selector(const SelectorConfig& cfg, nn::ParamStore params);

  Selector(const Selector&) = delete;
  Selector& operator=(const Selector&) = delete;
  Selector(Selector&&) = default;

  const SelectorConfig& config() const { return cfg_; }
  const VocabSpec& vocab() const { return vocab_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }

  /// Throws EmptySequence or ContextOverflow.
  SelectorOutput score(const EventSequence& seq) const;
  /// Scores sequences in parallel; same values as calling score() one by one.
  std::vector<SelectorOutput> score_batch(std::span<const EventSequence> batch) const;

  /// Summed cross-entropy over the enabled heads. Throws MissingLabels.
  nn::Var loss(nn::Graph& g, const SelectorExample& ex, const HeadMask& mask) const;
  /// Mean example loss; accumulates gradients when `backward`. Throws EmptyBatch.
  double batch_loss(std::span<const SelectorExample* const> batch, const HeadMask& mask, bool backward) const;

 private:
  void bind(Rng* rng);
  /// Tag labels are hidden from the encoder so the heads cannot read them off the input.
  std::vector<CompoundEvent> masked_input(const EventSequence& seq) const;

  SelectorConfig cfg_;
  VocabSpec vocab_;
  std::unique_ptr<nn::ParamStore> store_;
  std::unique_ptr<EventEmbedding> embed_;
  std::unique_ptr<nn::Transformer> core_;
  std::array<nn::Parameter*, 3> head_w_{};
  std::array<nn::Parameter*, 3> head_b_{};
};

/// Index of the highest score strictly above theta (lowest index on ties), or none.
std::optional<std::size_t> select_best(std::span<const double> quality_scores, double theta);
std::optional<std::size_t> select_best(const Selector& sel, std::span<const EventSequence> batch, double theta);

/// Trains the enabled heads; disabled heads are frozen. Throws MissingLabels
/// when an example lacks a label an enabled head needs.
SelectorTrainReport train_multitask(Selector& sel, const std::vector<SelectorExample>& data,
                                    const SelectorTrainOptions& opts);

struct SelectorAccuracy {
  double quality = 0;
  double emotion = 0;
  double genre = 0;
};

/// Argmax accuracy per head over labeled examples (heads with no labels report 0).
SelectorAccuracy evaluate_selector(const Selector& sel, const std::vector<SelectorExample>& data);

}  // namespace xmusic
