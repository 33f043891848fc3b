#include "xmusic/selector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "xmusic/error.hpp"
#include "xmusic/nn/kernels.hpp"

namespace xmusic {

namespace {

constexpr std::array<const char*, 3> kHeadNames = {"quality", "emotion", "genre"};
constexpr std::array<int, 3> kHeadSizes = {kQualityClasses, kEmotionCount, kGenreCount};

bool enabled(const HeadMask& m, int head) { return head == 0 ? m.quality : head == 1 ? m.emotion : m.genre; }

}  // namespace

void SelectorConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (layers <= 0 || heads <= 0 || hidden <= 0) fail("layers, heads and hidden must be positive");
  if (hidden % heads != 0) fail("hidden must be divisible by heads");
  if (!(embed_width_factor > 0)) fail("embed_width_factor must be positive");
  if (context < 1) fail("context must be positive");
  if (!(threshold >= 0 && threshold <= 1)) fail("threshold must lie in [0, 1]");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (grad_clip < 0) fail("grad_clip must be non-negative");
}

nlohmann::json SelectorConfig::to_json() const {
  return {{"layers", layers},       {"heads", heads},
          {"hidden", hidden},       {"embed_width_factor", embed_width_factor},
          {"context", context},     {"threshold", threshold},
          {"learning_rate", learning_rate}, {"grad_clip", grad_clip},
          {"seed", seed}};
}

SelectorConfig SelectorConfig::from_json(const nlohmann::json& j) {
  SelectorConfig c;
  try {
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.embed_width_factor = j.value("embed_width_factor", c.embed_width_factor);
    c.context = j.value("context", c.context);
    c.threshold = j.value("threshold", c.threshold);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("selector config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<SelectorExample> to_selector_examples(const std::vector<synthetic::QualityExample>& xs) {
  std::vector<SelectorExample> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back({x.sequence, x.quality, x.emotion, x.genre});
  return out;
}

Selector::Selector(const SelectorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  vocab_ = cfg_.vocab();
  store_ = std::make_unique<nn::ParamStore>();
  Rng rng(cfg_.seed);
  bind(&rng);
}

Selector::Selector(const SelectorConfig& cfg, nn::ParamStore params) : cfg_(cfg) {
  cfg_.validate();
  vocab_ = cfg_.vocab();
  store_ = std::make_unique<nn::ParamStore>(std::move(params));
  bind(nullptr);
}

void Selector::bind(Rng* rng) {
  const int H = cfg_.hidden;
  embed_ = std::make_unique<EventEmbedding>(*store_, "sel", vocab_, H, cfg_.context, rng);
  core_ = std::make_unique<nn::Transformer>(*store_, "sel.core", nn::TransformerConfig{cfg_.layers, cfg_.heads, H, 4, false},
                                            rng);
  for (std::size_t h = 0; h < 3; ++h) {
    const std::string base = std::string("sel.head.") + kHeadNames[h];
    if (rng) {
      head_w_[h] = &store_->create(base + ".w", H, kHeadSizes[h], 1.0 / std::sqrt(static_cast<double>(H)), *rng);
      head_b_[h] = &store_->create_filled(base + ".b", 1, kHeadSizes[h], 0.0);
    } else {
      head_w_[h] = &store_->at(base + ".w");
      head_b_[h] = &store_->at(base + ".b");
      if (head_w_[h]->value.rows != H || head_w_[h]->value.cols != kHeadSizes[h] || head_b_[h]->value.cols != kHeadSizes[h])
        throw Error(ErrorCode::InvalidCheckpoint, "selector head '" + base + "' has the wrong shape");
    }
  }
}

std::vector<CompoundEvent> Selector::masked_input(const EventSequence& seq) const {
  if (seq.events.empty()) throw Error(ErrorCode::EmptySequence, "cannot score an empty sequence");
  if (static_cast<int>(seq.events.size()) > cfg_.context)
    throw Error(ErrorCode::ContextOverflow, "sequence of " + std::to_string(seq.events.size()) +
                                                " events exceeds the selector context of " + std::to_string(cfg_.context));
  std::vector<CompoundEvent> ev = seq.events;
  for (auto& e : ev)
    if (e.family() == Family::Tag) {
      e.set(Attribute::Emotion, vocab_.ignore(Attribute::Emotion));
      e.set(Attribute::Genre, vocab_.ignore(Attribute::Genre));
    }
  return ev;
}

SelectorOutput Selector::score(const EventSequence& seq) const {
  const auto ev = masked_input(seq);
  const nn::Matrix h = core_->infer(embed_->rows(ev));
  nn::Matrix pooled(1, h.cols);
  for (int t = 0; t < h.rows; ++t)
    for (int j = 0; j < h.cols; ++j) pooled(0, j) += h(t, j);
  for (double& x : pooled.data) x /= h.rows;
  SelectorOutput out;
  auto head = [&](std::size_t i, double* dst) {
    nn::Matrix p = nn::linear_forward(pooled, *head_w_[i], *head_b_[i]);
    nn::kernels::serial::softmax_rows(p.data.data(), 1, p.cols);
    std::copy(p.data.begin(), p.data.end(), dst);
  };
  head(0, out.quality.data());
  head(1, out.emotion.data());
  head(2, out.genre.data());
  return out;
}

std::vector<SelectorOutput> Selector::score_batch(std::span<const EventSequence> batch) const {
  std::vector<SelectorOutput> out(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
  const long n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = score(batch[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

nn::Var Selector::loss(nn::Graph& g, const SelectorExample& ex, const HeadMask& mask) const {
  const auto ev = masked_input(ex.sequence);
  nn::Var f = g.mean_rows(core_->forward(g, embed_->forward(g, ev)));
  std::vector<nn::Var> terms;
  for (int h = 0; h < 3; ++h) {
    if (!enabled(mask, h)) continue;
    int target = -1;
    if (h == 0 && ex.quality) target = *ex.quality;
    if (h == 1 && ex.emotion) target = static_cast<int>(*ex.emotion);
    if (h == 2 && ex.genre) target = static_cast<int>(*ex.genre);
    if (target < 0 || target >= kHeadSizes[static_cast<std::size_t>(h)])
      throw Error(ErrorCode::MissingLabels, std::string("example '") + ex.sequence.source + "' has no " +
                                                kHeadNames[static_cast<std::size_t>(h)] + " label");
    nn::Var logits = g.linear(f, g.param(*head_w_[static_cast<std::size_t>(h)]), g.param(*head_b_[static_cast<std::size_t>(h)]));
    terms.push_back(g.cross_entropy(logits, std::vector<int>{target}));
  }
  if (terms.empty()) throw Error(ErrorCode::InvalidConfig, "head mask enables no head");
  return g.sum(terms);
}

double Selector::batch_loss(std::span<const SelectorExample* const> batch, const HeadMask& mask, bool backward) const {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty training batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const SelectorExample* ex : batch) {
    nn::Graph g;
    nn::Var l = g.scale(loss(g, *ex, mask), inv);
    if (backward) g.backward(l);
    total += g.value(l).data[0];
  }
  return total;
}

std::optional<std::size_t> select_best(std::span<const double> scores, double theta) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > theta && (!best || scores[i] > scores[*best])) best = i;
  return best;
}

std::optional<std::size_t> select_best(const Selector& sel, std::span<const EventSequence> batch, double theta) {
  const auto outs = sel.score_batch(batch);
  std::vector<double> q;
  for (const auto& o : outs) q.push_back(o.quality_score());
  return select_best(q, theta);
}

SelectorTrainReport train_multitask(Selector& sel, const std::vector<SelectorExample>& data,
                                    const SelectorTrainOptions& opts) {
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "empty training set");
  if (opts.batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  for (const auto& ex : data) {
    if ((opts.mask.quality && !ex.quality) || (opts.mask.emotion && !ex.emotion) || (opts.mask.genre && !ex.genre))
      throw Error(ErrorCode::MissingLabels, "example '" + ex.sequence.source + "' lacks a label for an enabled head");
  }
  auto& store = sel.params();
  for (int h = 0; h < 3; ++h)
    store.set_frozen(std::string("sel.head.") + kHeadNames[static_cast<std::size_t>(h)] + ".", !enabled(opts.mask, h));
  nn::Adam opt({sel.config().learning_rate, 0.9, 0.999, 1e-8, sel.config().grad_clip});
  Rng rng(opts.seed);
  SelectorTrainReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<const SelectorExample*> batch(static_cast<std::size_t>(opts.batch_size));
  for (int step = 0; step < opts.steps; ++step) {
    for (auto& b : batch) b = &data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
    const double l = sel.batch_loss(batch, opts.mask, true);
    opt.step(store);
    rep.losses.push_back(l);
    rep.steps = step + 1;
    if (opts.on_step) opts.on_step(step, l);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.time_budget_s > 0 && rep.seconds >= opts.time_budget_s) break;
  }
  store.set_frozen("sel.", false);
  return rep;
}

SelectorAccuracy evaluate_selector(const Selector& sel, const std::vector<SelectorExample>& data) {
  std::vector<EventSequence> seqs;
  for (const auto& ex : data) seqs.push_back(ex.sequence);
  const auto outs = sel.score_batch(seqs);
  auto argmax = [](const auto& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); };
  std::array<int, 3> hit{}, total{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    if (ex.quality) { ++total[0]; hit[0] += argmax(outs[i].quality) == *ex.quality; }
    if (ex.emotion) { ++total[1]; hit[1] += argmax(outs[i].emotion) == static_cast<int>(*ex.emotion); }
    if (ex.genre) { ++total[2]; hit[2] += argmax(outs[i].genre) == static_cast<int>(*ex.genre); }
  }
  auto rate = [&](int h) { return total[h] ? static_cast<double>(hit[h]) / total[h] : 0.0; };
  return {rate(0), rate(1), rate(2)};
}

}  // namespace xmusic
