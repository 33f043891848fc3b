#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmusic/events.hpp"
#include "xmusic/nn/graph.hpp"
#include "xmusic/nn/params.hpp"
#include "xmusic/vocab.hpp"

namespace xmusic {

/// Per-attribute embedding tables (IGNORE and CONTI get their own rows),
/// concatenated, projected to the model width, plus a sinusoidal position
/// term added after the projection.
class EventEmbedding {
 public:
  /// Creates parameters under `prefix` when `rng` is given, else binds to existing ones.
  EventEmbedding(nn::ParamStore& store, const std::string& prefix, const VocabSpec& vocab, int hidden, int max_positions,
                 Rng* rng);

  /// Rows for events placed at positions first_position, first_position + 1, ...
  nn::Var forward(nn::Graph& g, std::span<const CompoundEvent> events, int first_position = 0) const;
  /// Tape-free single row.
  std::vector<double> row(const CompoundEvent& e, int position) const;
  /// Tape-free rows for a whole sequence.
  nn::Matrix rows(std::span<const CompoundEvent> events, int first_position = 0) const;

  nn::Parameter& table(Attribute a) const { return *tables_[static_cast<std::size_t>(index_of(a))]; }
  const nn::Matrix& positions() const { return positions_; }
  int hidden() const { return hidden_; }

 private:
  VocabSpec vocab_;
  int hidden_;
  std::array<nn::Parameter*, kAttributeCount> tables_{};
  nn::Parameter* proj_w_ = nullptr;
  nn::Parameter* proj_b_ = nullptr;
  nn::Matrix positions_;
};

nlohmann::json vocab_to_json(const VocabSpec& v);
/// Throws InvalidCheckpoint on malformed input.
VocabSpec vocab_from_json(const nlohmann::json& j);

}  // namespace xmusic
