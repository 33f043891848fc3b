#include "xmusic/generator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "xmusic/error.hpp"
#include "xmusic/nn/kernels.hpp"

namespace xmusic {

namespace {

constexpr double kGreedyTemperature = 1e-6;

bool is_bar(const CompoundEvent& e) {
  return e.family() == Family::Rhythm && e.get(Attribute::BarBeat) == vocab::kBarMarker;
}

std::vector<double> softmax(std::vector<double> x) {
  nn::kernels::serial::softmax_rows(x.data(), 1, static_cast<int>(x.size()));
  return x;
}

// Index in [lo, hi] drawn from logits / temperature; greedy picks the lowest maximal index.
int choose(const std::vector<double>& logits, int lo, int hi, double temperature, Rng& rng) {
  if (temperature <= kGreedyTemperature) {
    int best = lo;
    for (int i = lo + 1; i <= hi; ++i)
      if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
    return best;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (int i = lo; i <= hi; ++i) m = std::max(m, logits[static_cast<std::size_t>(i)]);
  std::vector<double> w(static_cast<std::size_t>(hi - lo + 1));
  for (int i = lo; i <= hi; ++i) w[static_cast<std::size_t>(i - lo)] = std::exp((logits[static_cast<std::size_t>(i)] - m) / temperature);
  return lo + rng.categorical(w);
}

}  // namespace

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (layers <= 0 || heads <= 0 || hidden <= 0) fail("layers, heads and hidden must be positive");
  if (hidden % heads != 0) fail("hidden must be divisible by heads");
  if (!(embed_width_factor > 0)) fail("embed_width_factor must be positive");
  if (context < 2) fail("context must be at least 2");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (grad_clip < 0) fail("grad_clip must be non-negative");
  if (!(temperature > 0)) fail("temperature must be positive");
  if (plateau_patience <= 0) fail("plateau_patience must be positive");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"layers", layers},
          {"heads", heads},
          {"hidden", hidden},
          {"embed_width_factor", embed_width_factor},
          {"context", context},
          {"learning_rate", learning_rate},
          {"grad_clip", grad_clip},
          {"temperature", temperature},
          {"seed", seed},
          {"plateau_patience", plateau_patience}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.embed_width_factor = j.value("embed_width_factor", c.embed_width_factor);
    c.context = j.value("context", c.context);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.temperature = j.value("temperature", c.temperature);
    c.seed = j.value("seed", c.seed);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  vocab_ = cfg_.vocab();
  store_ = std::make_unique<nn::ParamStore>();
  Rng rng(cfg_.seed);
  bind(&rng);
}

Generator::Generator(const GeneratorConfig& cfg, nn::ParamStore params) : cfg_(cfg) {
  cfg_.validate();
  vocab_ = cfg_.vocab();
  store_ = std::make_unique<nn::ParamStore>(std::move(params));
  bind(nullptr);
}

void Generator::bind(Rng* rng) {
  const int H = cfg_.hidden;
  embed_ = std::make_unique<EventEmbedding>(*store_, "gen", vocab_, H, cfg_.context + 1, rng);
  core_ = std::make_unique<nn::Transformer>(*store_, "gen.core",
                                            nn::TransformerConfig{cfg_.layers, cfg_.heads, H, 4, true}, rng);
  auto mk = [&](const std::string& name, int r, int c, bool bias) -> nn::Parameter* {
    if (rng) return bias ? &store_->create_filled(name, r, c, 0.0) : &store_->create(name, r, c, 1.0 / std::sqrt(static_cast<double>(r)), *rng);
    nn::Parameter& p = store_->at(name);
    if (p.value.rows != r || p.value.cols != c)
      throw Error(ErrorCode::InvalidCheckpoint, "parameter '" + name + "' has the wrong shape");
    return &p;
  };
  family_w_ = mk("gen.head.family.w", H, kFamilyCount, false);
  family_b_ = mk("gen.head.family.b", 1, kFamilyCount, true);
  const int z = H + vocab_.embed_width[0];
  for (int a = 1; a < kAttributeCount; ++a) {
    const std::string base = "gen.head." + std::string(kAttributeNames[a]);
    const int n = vocab_.size(static_cast<Attribute>(a));
    head_w_[static_cast<std::size_t>(a)] = mk(base + ".w", z, n, false);
    head_b_[static_cast<std::size_t>(a)] = mk(base + ".b", 1, n, true);
  }
}

std::vector<double> Generator::embed_event(const CompoundEvent& e, int position) const {
  return embed_->row(e, position);
}

nn::Var Generator::sequence_loss(nn::Graph& g, const EventSequence& seq) const {
  if (seq.events.size() < 2) throw Error(ErrorCode::EmptySequence, "training needs at least two events");
  const std::size_t T = std::min<std::size_t>(seq.events.size(), static_cast<std::size_t>(cfg_.context) + 1) - 1;
  std::span<const CompoundEvent> inputs(seq.events.data(), T);
  std::span<const CompoundEvent> targets(seq.events.data() + 1, T);

  nn::Var h = core_->forward(g, embed_->forward(g, inputs));
  std::vector<int> fam(T);
  for (std::size_t t = 0; t < T; ++t) fam[t] = targets[t].values[0];
  std::vector<nn::Var> terms;
  terms.push_back(g.cross_entropy(g.linear(h, g.param(*family_w_), g.param(*family_b_)), fam));

  std::vector<nn::Var> zparts = {h, g.embedding(g.param(embed_->table(Attribute::Family)), fam)};
  nn::Var z = g.concat_cols(zparts);
  std::vector<int> tgt(T);
  for (int a = 1; a < kAttributeCount; ++a) {
    const auto attr = static_cast<Attribute>(a);
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
      const int v = targets[t].values[static_cast<std::size_t>(a)];
      tgt[t] = v == vocab_.ignore(attr) ? -1 : v;
      any = any || tgt[t] >= 0;
    }
    if (!any) continue;
    nn::Var logits = g.linear(z, g.param(*head_w_[static_cast<std::size_t>(a)]), g.param(*head_b_[static_cast<std::size_t>(a)]));
    terms.push_back(g.cross_entropy(logits, tgt));
  }
  return g.sum(terms);
}

double Generator::batch_loss(std::span<const EventSequence* const> batch, bool backward) const {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty training batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const EventSequence* seq : batch) {
    nn::Graph g;
    nn::Var l = g.scale(sequence_loss(g, *seq), inv);
    if (backward) g.backward(l);
    total += g.value(l).data[0];
  }
  return total;
}

std::vector<double> Generator::family_logits(std::span<const double> h) const {
  nn::Matrix x(1, cfg_.hidden);
  std::copy(h.begin(), h.end(), x.data.begin());
  return nn::linear_forward(x, *family_w_, *family_b_).data;
}

std::vector<double> Generator::head_logits(std::span<const double> h, Attribute a, Family f) const {
  const nn::Matrix& ft = embed_->table(Attribute::Family).value;
  nn::Matrix z(1, cfg_.hidden + ft.cols);
  std::copy(h.begin(), h.end(), z.data.begin());
  std::copy(ft.row(static_cast<int>(f)), ft.row(static_cast<int>(f)) + ft.cols, z.data.begin() + cfg_.hidden);
  const auto i = static_cast<std::size_t>(index_of(a));
  return nn::linear_forward(z, *head_w_[i], *head_b_[i]).data;
}

namespace {

std::vector<double> last_hidden(const EventEmbedding& embed, const nn::Transformer& core, const EventSequence& prefix,
                                int context) {
  if (prefix.events.empty()) throw Error(ErrorCode::EmptySequence, "prediction needs a non-empty prefix");
  if (static_cast<int>(prefix.events.size()) > context)
    throw Error(ErrorCode::ContextOverflow, "prefix of " + std::to_string(prefix.events.size()) +
                                                " events exceeds the context of " + std::to_string(context));
  nn::Matrix h = core.infer(embed.rows(prefix.events));
  return std::vector<double>(h.row(h.rows - 1), h.row(h.rows - 1) + h.cols);
}

}  // namespace

NextDistributions Generator::predict_next(const EventSequence& prefix, std::optional<Family> family) const {
  const auto h = last_hidden(*embed_, *core_, prefix, cfg_.context);
  NextDistributions out;
  out.family = softmax(family_logits(h));
  out.given_family = family.value_or(static_cast<Family>(std::max_element(out.family.begin(), out.family.end()) - out.family.begin()));
  for (int a = 1; a < kAttributeCount; ++a)
    out.attributes[static_cast<std::size_t>(a)] = softmax(head_logits(h, static_cast<Attribute>(a), out.given_family));
  return out;
}

CompoundEvent Generator::sample_event(const EventSequence& prefix, Family family, double temperature, Rng& rng) const {
  const auto h = last_hidden(*embed_, *core_, prefix, cfg_.context);
  CompoundEvent e = CompoundEvent::blank(family, vocab_);
  auto draw = [&](Attribute a, int lo, int hi) {
    e.set(a, choose(head_logits(h, a, family), lo, hi, temperature, rng));
  };
  auto base_max = [&](Attribute a) { return vocab_.base[index_of(a)] - 1; };
  switch (family) {
    case Family::Tag:
      draw(Attribute::Emotion, 0, base_max(Attribute::Emotion));
      draw(Attribute::Genre, 0, base_max(Attribute::Genre));
      break;
    case Family::Rhythm:
      draw(Attribute::BarBeat, 0, vocab::kBarMarker);
      if (is_bar(e)) {
        e.set(Attribute::Tempo, vocab_.conti(Attribute::Tempo));
        e.set(Attribute::Chord, vocab_.conti(Attribute::Chord));
        draw(Attribute::Density, 0, base_max(Attribute::Density));
      } else {
        draw(Attribute::Tempo, 0, base_max(Attribute::Tempo));
        draw(Attribute::Chord, 0, base_max(Attribute::Chord));
        draw(Attribute::Strength, 0, base_max(Attribute::Strength));
      }
      break;
    case Family::Instrument:
      draw(Attribute::Program, 0, base_max(Attribute::Program));
      break;
    case Family::Note:
      draw(Attribute::Pitch, 0, base_max(Attribute::Pitch));
      draw(Attribute::Duration, 0, base_max(Attribute::Duration));
      draw(Attribute::Velocity, 0, base_max(Attribute::Velocity));
      break;
    case Family::Eos:
      break;
  }
  return e;
}

std::vector<CompoundEvent> note_prefix(const ProjectionElements& control, const VocabSpec& vocab) {
  if (!control.notes || control.notes->notes.empty()) return {};
  using namespace grid;
  Score s;
  s.ticks_per_quarter = kTicksPerQuarter;
  if (control.rhythm && !control.rhythm->beats.empty()) {
    for (std::size_t b = 0; b < control.rhythm->beats.size(); ++b) {
      const double bpm = snap_tempo(control.rhythm->beats[b].tempo_bpm);
      if (s.tempo_map.empty() || s.tempo_map.back().bpm != bpm)
        s.tempo_map.push_back({static_cast<std::int64_t>(b) * kTicksPerQuarter, bpm});
    }
  } else {
    s.tempo_map.push_back({0, snap_tempo(120.0)});
  }
  Track piano{InstrumentClass::Piano, {}};
  for (const NoteItem& n : control.notes->notes) {
    const std::int64_t on = static_cast<std::int64_t>(n.onset_step) * kTicksPerStep;
    piano.notes.push_back({n.pitch, on, on + static_cast<std::int64_t>(n.duration_steps) * kTicksPerStep, n.velocity});
  }
  std::sort(piano.notes.begin(), piano.notes.end(), note_before);
  s.tracks.push_back(std::move(piano));
  std::optional<Emotion> emo;
  if (control.emotion) emo = control.emotion->global;
  std::optional<Genre> gen;
  if (control.genre) gen = control.genre->genre;
  EventSequence seq = encode(quantize_score(s), emo, gen, vocab);
  std::size_t last_note = 0;
  for (std::size_t i = 0; i < seq.events.size(); ++i)
    if (seq.events[i].family() == Family::Note) last_note = i;
  seq.events.resize(last_note + 1);
  return seq.events;
}

/// Grammar state machine plus control injection around a key/value cache.
class GeneratorSampler {
 public:
  GeneratorSampler(const Generator& gen, const ProjectionElements& control, const SampleOptions& opts)
      : gen_(gen), v_(gen.vocab_), control_(control), opts_(opts), rng_(opts.seed),
        cache_(gen.core_->make_cache(gen.cfg_.context)) {
    max_bars_ = std::max(1, opts.max_bars);
    if (control.rhythm && !control.rhythm->bars.empty())
      max_bars_ = std::min(max_bars_, static_cast<int>(control.rhythm->bars.size()));
  }

  EventSequence run() {
    std::vector<CompoundEvent> prefix = note_prefix(control_, v_);
    if (static_cast<int>(prefix.size()) >= gen_.cfg_.context)
      throw Error(ErrorCode::ContextOverflow, "note control does not fit in the context");
    for (CompoundEvent e : prefix) {
      if (e.family() == Family::Tag) e = forced_tag(bars_);
      if (is_bar(e)) {
        if (auto d = forced_density(bars_ - 1)) e.set(Attribute::Density, *d);
      } else if (e.family() == Family::Rhythm) {
        apply_beat_control(e);
      }
      push(e);
    }
    while (seq_.events.empty() || seq_.events.back().family() != Family::Eos) push(next());
    return std::move(seq_);
  }

 private:
  const Generator& gen_;
  const VocabSpec& v_;
  const ProjectionElements& control_;
  SampleOptions opts_;
  Rng rng_;
  nn::Transformer::Cache cache_;
  EventSequence seq_;
  std::vector<double> h_;
  int max_bars_ = 1;
  int bars_ = 0;  // Tag events so far
  int pos_ = -1;
  int instrument_ = -1;
  int quarter_tempo_ = -1;

  int n() const { return static_cast<int>(seq_.events.size()); }
  Family last() const { return seq_.events.back().family(); }

  const std::vector<double>& hidden() {
    while (cache_.length < n()) {
      const auto row = gen_.embed_->row(seq_.events[static_cast<std::size_t>(cache_.length)], cache_.length);
      h_ = gen_.core_->step(cache_, row);
    }
    return h_;
  }

  void push(const CompoundEvent& e) {
    switch (e.family()) {
      case Family::Tag: ++bars_; break;
      case Family::Rhythm:
        if (is_bar(e)) {
          pos_ = -1;
        } else {
          pos_ = e.get(Attribute::BarBeat);
          if (pos_ % grid::kStepsPerQuarter == 0) quarter_tempo_ = e.get(Attribute::Tempo);
        }
        instrument_ = -1;
        break;
      case Family::Instrument: instrument_ = e.get(Attribute::Program); break;
      default: break;
    }
    seq_.events.push_back(e);
  }

  const RhythmBeat* control_beat(int bar, int pos) const {
    if (!control_.rhythm || pos % grid::kStepsPerQuarter != 0) return nullptr;
    const std::size_t i = static_cast<std::size_t>(bar) * grid::kBeatsPerBar + static_cast<std::size_t>(pos / grid::kStepsPerQuarter);
    return i < control_.rhythm->beats.size() ? &control_.rhythm->beats[i] : nullptr;
  }

  std::optional<int> forced_density(int bar) const {
    if (!control_.rhythm || bar < 0 || bar >= static_cast<int>(control_.rhythm->bars.size())) return std::nullopt;
    return control_.rhythm->bars[static_cast<std::size_t>(bar)].density;
  }

  void apply_beat_control(CompoundEvent& e) const {
    const int pos = e.get(Attribute::BarBeat);
    if (const RhythmBeat* b = control_beat(bars_ - 1, pos)) {
      e.set(Attribute::Tempo, grid::tempo_bin(b->tempo_bpm));
      e.set(Attribute::Strength, b->strength);
    }
  }

  CompoundEvent forced_tag(int bar) const {
    CompoundEvent e = CompoundEvent::blank(Family::Tag, v_);
    if (control_.emotion) {
      const auto& el = *control_.emotion;
      const Emotion emo = bar < static_cast<int>(el.bars.size()) ? el.bars[static_cast<std::size_t>(bar)] : el.global;
      e.set(Attribute::Emotion, static_cast<int>(emo));
    }
    if (control_.genre) e.set(Attribute::Genre, static_cast<int>(control_.genre->genre));
    return e;
  }

  std::vector<Family> allowed() const {
    if (n() == 0) return {Family::Tag};
    const Family f = last();
    if (f == Family::Instrument) return {Family::Note};
    if (f == Family::Tag) return {Family::Rhythm};
    if (n() >= gen_.cfg_.context - 1) return {Family::Eos};
    if (f == Family::Rhythm && pos_ < 0) return {Family::Rhythm};
    std::vector<Family> out;
    if (pos_ >= 24 && bars_ < max_bars_) out.push_back(Family::Tag);
    if (pos_ < grid::kStepsPerBar - 1) out.push_back(Family::Rhythm);
    out.push_back(Family::Instrument);
    if (f == Family::Note) out.push_back(Family::Note);
    if (pos_ >= 24) out.push_back(Family::Eos);
    std::sort(out.begin(), out.end());
    return out;
  }

  int pick(Attribute a, Family f, int lo, int hi) {
    return choose(gen_.head_logits(hidden(), a, f), lo, hi, opts_.temperature, rng_);
  }

  CompoundEvent next() {
    const auto fams = allowed();
    Family f = fams.front();
    if (fams.size() > 1) {
      const auto logits = gen_.family_logits(hidden());
      std::vector<double> masked(kFamilyCount, -std::numeric_limits<double>::infinity());
      for (Family a : fams) masked[static_cast<std::size_t>(a)] = logits[static_cast<std::size_t>(a)];
      f = static_cast<Family>(choose(masked, static_cast<int>(fams.front()), static_cast<int>(fams.back()),
                                     opts_.temperature, rng_));
    }
    CompoundEvent e = CompoundEvent::blank(f, v_);
    auto base_max = [&](Attribute a) { return v_.base[index_of(a)] - 1; };
    switch (f) {
      case Family::Tag:
        e = forced_tag(bars_);
        if (n() > 0 && !control_.emotion) e.set(Attribute::Emotion, pick(Attribute::Emotion, f, 0, v_.ignore(Attribute::Emotion)));
        if (n() > 0 && !control_.genre) e.set(Attribute::Genre, pick(Attribute::Genre, f, 0, v_.ignore(Attribute::Genre)));
        break;
      case Family::Rhythm:
        if (last() == Family::Tag) {
          e.set(Attribute::BarBeat, vocab::kBarMarker);
          e.set(Attribute::Tempo, v_.conti(Attribute::Tempo));
          e.set(Attribute::Chord, v_.conti(Attribute::Chord));
          const auto d = forced_density(bars_ - 1);
          e.set(Attribute::Density, d ? *d : pick(Attribute::Density, f, 0, base_max(Attribute::Density)));
        } else {
          const int lo = pos_ + 1;
          int hi = 0;
          if (pos_ >= 24) hi = grid::kStepsPerBar - 1;
          else if (pos_ >= 0) hi = (pos_ / grid::kStepsPerQuarter + 1) * grid::kStepsPerQuarter;
          const int pos = lo == hi ? lo : pick(Attribute::BarBeat, f, lo, hi);
          e.set(Attribute::BarBeat, pos);
          const RhythmBeat* b = control_beat(bars_ - 1, pos);
          if (b) e.set(Attribute::Tempo, grid::tempo_bin(b->tempo_bpm));
          else if (control_.rhythm && pos % grid::kStepsPerQuarter != 0 && quarter_tempo_ >= 0) e.set(Attribute::Tempo, quarter_tempo_);
          else e.set(Attribute::Tempo, pick(Attribute::Tempo, f, 0, base_max(Attribute::Tempo)));
          e.set(Attribute::Chord, pick(Attribute::Chord, f, 0, base_max(Attribute::Chord)));
          e.set(Attribute::Strength, b ? b->strength : pick(Attribute::Strength, f, 0, base_max(Attribute::Strength)));
        }
        break;
      case Family::Instrument:
        e.set(Attribute::Program, pick(Attribute::Program, f, 0, base_max(Attribute::Program)));
        break;
      case Family::Note: {
        const bool drum = instrument_ == static_cast<int>(InstrumentClass::Drum);
        const int lo = drum ? vocab::kPitchDrumOffset : 0;
        const int hi = drum ? base_max(Attribute::Pitch) : vocab::kPitchDrumOffset - 1;
        e.set(Attribute::Pitch, pick(Attribute::Pitch, f, lo, hi));
        e.set(Attribute::Duration, pick(Attribute::Duration, f, 0, base_max(Attribute::Duration)));
        e.set(Attribute::Velocity, pick(Attribute::Velocity, f, 0, base_max(Attribute::Velocity)));
        break;
      }
      case Family::Eos:
        break;
    }
    return e;
  }
};

EventSequence Generator::sample(const ProjectionElements& control, const SampleOptions& opts) const {
  if (!(opts.temperature > 0)) throw Error(ErrorCode::InvalidConfig, "temperature must be positive");
  EventSequence out = GeneratorSampler(*this, control, opts).run();
  if (control.emotion) out.labels.emotion = control.emotion->global;
  if (control.genre) out.labels.genre = control.genre->genre;
  out.source = "generated";
  return out;
}

double train_step(Generator& gen, nn::Adam& opt, std::span<const EventSequence* const> batch) {
  const double loss = gen.batch_loss(batch, true);
  opt.step(gen.params());
  return loss;
}

TrainReport train_generator(Generator& gen, const std::vector<EventSequence>& corpus, const TrainOptions& opts) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyBatch, "empty training corpus");
  if (opts.batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  const auto& cfg = gen.config();
  nn::Adam opt({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng rng(opts.seed);
  TrainReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  double ema = 0, best = std::numeric_limits<double>::infinity();
  int since = 0;
  std::vector<const EventSequence*> batch(static_cast<std::size_t>(opts.batch_size));
  for (int step = 0; step < opts.steps; ++step) {
    for (auto& b : batch) b = &corpus[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(corpus.size()) - 1))];
    const double loss = train_step(gen, opt, batch);
    ema = step == 0 ? loss : 0.9 * ema + 0.1 * loss;
    rep.losses.push_back(loss);
    rep.smoothed.push_back(ema);
    if (ema < best - 1e-9) {
      best = ema;
      since = 0;
    } else if (++since >= cfg.plateau_patience) {
      opt.set_lr(opt.lr() * 0.5);
      since = 0;
    }
    rep.steps = step + 1;
    if (opts.on_step) opts.on_step(step, loss, opt.lr());
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.time_budget_s > 0 && rep.seconds >= opts.time_budget_s) break;
  }
  rep.final_lr = opt.lr();
  return rep;
}

}  // namespace xmusic
