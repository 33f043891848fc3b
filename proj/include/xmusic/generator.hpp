/**
 * @file generator.hpp
 * @brief Autoregressive compound-event model with family-first prediction.
 *
 * The next event's family is predicted from the hidden state; every other
 * attribute head sees the hidden state concatenated with the embedding of
 * that family. Sampling follows the event grammar so every sampled sequence
 * decodes, and control elements force the tokens they determine.
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
#include "xmusic/events.hpp"
#include "xmusic/nn/transformer.hpp"
#include "xmusic/projection.hpp"

namespace xmusic {

struct GeneratorConfig {
  // reference configuration of the full-size model
  static constexpr int kFullScaleLayers = 30;
  static constexpr int kFullScaleHeads = 16;
  static constexpr int kFullScaleHidden = 1024;
  static constexpr double kFullScaleLearningRate = 3e-5;
  static constexpr double kFullScaleGradClip = 0.5;

  int layers = 2;
  int heads = 4;
  int hidden = 128;
  /// Scales the reference per-attribute embedding widths.
  double embed_width_factor = 1.0 / 16;
  int context = 256;
  double learning_rate = 1e-3;
  double grad_clip = kFullScaleGradClip;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  /// Steps without improvement of the smoothed loss before the rate halves.
  int plateau_patience = 50;

  /// Throws InvalidConfig.
  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
  VocabSpec vocab() const { return VocabSpec::standard(embed_width_factor); }
};

struct NextDistributions {
  std::vector<double> family;
  /// The family the attribute distributions are conditioned on.
  Family given_family = Family::Tag;
  /// Indexed by Attribute; the Family slot stays empty.
  std::array<std::vector<double>, kAttributeCount> attributes;
};

struct SampleOptions {
  double temperature = 1.0;
  /// Bars to generate; with rhythm control the rhythm's bar count caps it.
  int max_bars = 8;
  std::uint64_t seed = 1;
};

struct TrainOptions {
  int steps = 200;
  int batch_size = 8;
  std::uint64_t seed = 1;
  /// Stop early after this many seconds; <= 0 means no limit.
  double time_budget_s = 0;
  std::function<void(int step, double loss, double lr)> on_step;
};

struct TrainReport {
  std::vector<double> losses;
  std::vector<double> smoothed;
  int steps = 0;
  double seconds = 0;
  double final_lr = 0;
};

class Generator {
 public:
  /// Fresh parameters drawn from cfg.seed.
  explicit Generator(const GeneratorConfig& cfg);
  /// Binds to loaded parameters; throws InvalidCheckpoint on missing or misshaped tensors.
  Generator(const GeneratorConfig& cfg, nn::ParamStore params);

  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;

  const GeneratorConfig& config() const { return cfg_; }
  const VocabSpec& vocab() const { return vocab_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }
  const EventEmbedding& embedding() const { return *embed_; }

  /// Input row for an event at a position.
  std::vector<double> embed_event(const CompoundEvent& e, int position) const;

  /// Taped per-sequence loss: family CE plus the sum of attribute CEs over
  /// next-event targets, IGNORE targets excluded. Sequences longer than
  /// context + 1 are truncated.
  nn::Var sequence_loss(nn::Graph& g, const EventSequence& seq) const;
  /// Mean sequence loss over a batch; accumulates gradients when `backward`.
  /// Throws EmptyBatch.
  double batch_loss(std::span<const EventSequence* const> batch, bool backward) const;

  /// Distributions for the event following `prefix`. Attribute heads are
  /// conditioned on `family` when given, otherwise on the most likely family.
  /// Throws ContextOverflow or EmptySequence.
  NextDistributions predict_next(const EventSequence& prefix, std::optional<Family> family = std::nullopt) const;

  /// One event of `family` drawn from the attribute heads after `prefix`:
  /// active attributes are sampled within their base ranges, the rest are IGNORE.
  CompoundEvent sample_event(const EventSequence& prefix, Family family, double temperature, Rng& rng) const;

  /// Grammar-constrained autoregressive sampling under control elements.
  /// Temperatures <= 1e-6 decode greedily.
  EventSequence sample(const ProjectionElements& control, const SampleOptions& opts) const;

 private:
  friend class GeneratorSampler;
  void bind(Rng* rng);
  std::vector<double> head_logits(std::span<const double> h, Attribute a, Family f) const;
  std::vector<double> family_logits(std::span<const double> h) const;

  GeneratorConfig cfg_;
  VocabSpec vocab_;
  std::unique_ptr<nn::ParamStore> store_;
  std::unique_ptr<EventEmbedding> embed_;
  std::unique_ptr<nn::Transformer> core_;
  nn::Parameter* family_w_ = nullptr;
  nn::Parameter* family_b_ = nullptr;
  std::array<nn::Parameter*, kAttributeCount> head_w_{};
  std::array<nn::Parameter*, kAttributeCount> head_b_{};
};

/// One optimizer step on a batch; returns the batch loss before the update.
double train_step(Generator& gen, nn::Adam& opt, std::span<const EventSequence* const> batch);

/// Minibatch training with plateau halving of the learning rate. Deterministic given opts.seed.
TrainReport train_generator(Generator& gen, const std::vector<EventSequence>& corpus, const TrainOptions& opts);

/// The teacher-forced opening implied by a note control: the notes encoded on
/// piano under the rhythm's tempo map, cut after the last Note event.
std::vector<CompoundEvent> note_prefix(const ProjectionElements& control, const VocabSpec& vocab);

}  // namespace xmusic
