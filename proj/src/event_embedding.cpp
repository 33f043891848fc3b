#include "xmusic/event_embedding.hpp"

#include <cmath>

#include "json.hpp"
#include "xmusic/error.hpp"
#include "xmusic/nn/kernels.hpp"
#include "xmusic/nn/transformer.hpp"

namespace xmusic {

EventEmbedding::EventEmbedding(nn::ParamStore& store, const std::string& prefix, const VocabSpec& vocab, int hidden,
                               int max_positions, Rng* rng)
    : vocab_(vocab), hidden_(hidden), positions_(nn::sinusoidal_positions(max_positions, hidden)) {
  auto bind = [&](const std::string& name, int r, int c, double scale) -> nn::Parameter* {
    if (rng) return &store.create(name, r, c, scale, *rng);
    nn::Parameter& p = store.at(name);
    if (p.value.rows != r || p.value.cols != c)
      throw Error(ErrorCode::InvalidCheckpoint, "parameter '" + name + "' has the wrong shape");
    return &p;
  };
  for (int a = 0; a < kAttributeCount; ++a) {
    const auto attr = static_cast<Attribute>(a);
    tables_[static_cast<std::size_t>(a)] =
        bind(prefix + ".embed." + std::string(kAttributeNames[a]), vocab.size(attr), vocab.embed_width[a], 1.0);
  }
  const int width = vocab.total_embed_width();
  proj_w_ = bind(prefix + ".embed.proj.w", width, hidden, 1.0 / std::sqrt(static_cast<double>(width)));
  if (rng)
    proj_b_ = &store.create_filled(prefix + ".embed.proj.b", 1, hidden, 0.0);
  else
    proj_b_ = bind(prefix + ".embed.proj.b", 1, hidden, 0.0);
}

nn::Var EventEmbedding::forward(nn::Graph& g, std::span<const CompoundEvent> events, int first_position) const {
  const int T = static_cast<int>(events.size());
  if (first_position + T > positions_.rows) throw Error(ErrorCode::ContextOverflow, "sequence longer than the context");
  std::vector<nn::Var> parts;
  std::vector<int> idx(static_cast<std::size_t>(T));
  for (int a = 0; a < kAttributeCount; ++a) {
    for (int t = 0; t < T; ++t) idx[static_cast<std::size_t>(t)] = events[static_cast<std::size_t>(t)].values[static_cast<std::size_t>(a)];
    parts.push_back(g.embedding(g.param(*tables_[static_cast<std::size_t>(a)]), idx));
  }
  nn::Var x = g.linear(g.concat_cols(parts), g.param(*proj_w_), g.param(*proj_b_));
  nn::Matrix pe(T, hidden_);
  for (int t = 0; t < T; ++t) std::copy(positions_.row(first_position + t), positions_.row(first_position + t) + hidden_, pe.row(t));
  return g.add(x, g.input(std::move(pe)));
}

nn::Matrix EventEmbedding::rows(std::span<const CompoundEvent> events, int first_position) const {
  const int T = static_cast<int>(events.size());
  if (first_position + T > positions_.rows) throw Error(ErrorCode::ContextOverflow, "sequence longer than the context");
  const int width = proj_w_->value.rows;
  nn::Matrix cat(T, width);
  for (int t = 0; t < T; ++t) {
    int c0 = 0;
    for (int a = 0; a < kAttributeCount; ++a) {
      const nn::Matrix& tab = tables_[static_cast<std::size_t>(a)]->value;
      const int v = events[static_cast<std::size_t>(t)].values[static_cast<std::size_t>(a)];
      if (v >= tab.rows) throw Error(ErrorCode::DimensionMismatch, "attribute index outside the embedding table");
      std::copy(tab.row(v), tab.row(v) + tab.cols, cat.row(t) + c0);
      c0 += tab.cols;
    }
  }
  nn::Matrix x = nn::linear_forward(cat, *proj_w_, *proj_b_);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < hidden_; ++j) x(t, j) += positions_(first_position + t, j);
  return x;
}

std::vector<double> EventEmbedding::row(const CompoundEvent& e, int position) const {
  return rows(std::span<const CompoundEvent>(&e, 1), position).data;
}

nlohmann::json vocab_to_json(const VocabSpec& v) {
  return {{"base", v.base}, {"special", v.special}, {"embed_width", v.embed_width}};
}

VocabSpec vocab_from_json(const nlohmann::json& j) {
  try {
    VocabSpec v;
    v.base = j.at("base").get<std::array<int, kAttributeCount>>();
    v.special = j.at("special").get<std::array<int, kAttributeCount>>();
    v.embed_width = j.at("embed_width").get<std::array<int, kAttributeCount>>();
    for (int a = 0; a < kAttributeCount; ++a)
      if (v.base[a] <= 0 || v.special[a] < 0 || v.embed_width[a] <= 0)
        throw Error(ErrorCode::InvalidCheckpoint, "vocabulary sizes must be positive");
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidCheckpoint, std::string("bad vocabulary: ") + e.what());
  }
}

}  // namespace xmusic
