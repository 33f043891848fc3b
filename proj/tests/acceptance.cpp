// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed here. `acceptance --only <name>` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"
#include "xmusic/dataset.hpp"
#include "xmusic/error.hpp"
#include "xmusic/events.hpp"
#include "xmusic/generator.hpp"
#include "xmusic/metrics.hpp"
#include "xmusic/selector.hpp"
#include "xmusic/synthetic.hpp"
#include "xmusic/xprojector.hpp"

using namespace xmusic;
using Clock = std::chrono::steady_clock;

namespace {

// Codec
constexpr int kCodecScores = 1000;
constexpr double kCodecBudgetS = 60;
// Metrics
constexpr int kMetricScores = 500;
constexpr double kUniformPceTol = 1e-9;
// Generator gradients
constexpr int kGradProbes = 20;
constexpr double kGradTol = 1e-4;
// Conditioning fidelity
constexpr double kTrainBudgetS = 600;
constexpr int kFidelitySteps = 2500;
constexpr int kFidelityCorpus = 2000;
constexpr int kFidelitySamples = 10000;
constexpr double kInRegisterMin = 0.90;
// Selector ablation
constexpr int kAblationSeeds = 5;
constexpr int kAblationTrain = 300;
constexpr int kAblationTest = 400;
constexpr int kAblationSteps = 300;
constexpr double kAblationBudgetS = 900;
// Selector with vs without
constexpr int kEffectCorpus = 2000;
constexpr int kEffectSteps = 1500;
constexpr int kEffectBatches = 60;
constexpr int kEffectBatchSize = 8;
constexpr double kEffectTheta = 0.5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome codec_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(20240);
  int failures = 0;
  for (int i = 0; i < kCodecScores; ++i) {
    const Score s = synthetic::random_quantized_score(rng);
    std::optional<Emotion> e;
    std::optional<Genre> g;
    if (rng.bernoulli(0.8)) e = static_cast<Emotion>(rng.uniform_int(0, kEmotionCount - 1));
    if (rng.bernoulli(0.8)) g = static_cast<Genre>(rng.uniform_int(0, kGenreCount - 1));
    try {
      const auto d = decode(encode(s, e, g));
      if (!(d.score == s) || !(d.labels == SequenceLabels{e, g})) ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }
  const double t = seconds_since(t0);
  return {failures == 0 && t < kCodecBudgetS, fmt("%d scores, %d failures, %.1f s (budget %.0f s)", kCodecScores, failures, t, kCodecBudgetS)};
}

Outcome vocabulary_audit() {
  // (base, special) per attribute, in table order
  const int expected[kAttributeCount][2] = {{5, 0},   {11, 1}, {6, 1},   {33, 1}, {65, 2}, {133, 2},
                                             {33, 1},  {37, 1}, {17, 1}, {256, 1}, {32, 1}, {44, 1}};
  const auto v = VocabSpec::standard();
  int mismatched = 0;
  for (int a = 0; a < kAttributeCount; ++a)
    if (v.base[static_cast<std::size_t>(a)] != expected[a][0] || v.special[static_cast<std::size_t>(a)] != expected[a][1]) ++mismatched;
  const bool ok = mismatched == 0 && v.total_base() == 672 && v.total_special() == 13;
  return {ok, fmt("%d base + %d special, %d attribute rows differ", v.total_base(), v.total_special(), mismatched)};
}

Outcome projector_formulas() {
  std::vector<std::string> bad;
  if (xp::video_tempo_raw(0, 45.0) != 60.0) bad.push_back("tempo(0, T) != 60");
  double prev = 0;
  bool mono = true, below = true;
  for (double r = 0; r <= 1e6; r = r < 1 ? r + 0.05 : r * 1.25) {
    const double t = xp::video_tempo_raw(static_cast<int>(std::llround(r * 1000)), 1000.0);
    mono = mono && t >= prev;
    below = below && t < 130.0;
    prev = t;
  }
  const double top = xp::video_tempo_raw(1000000, 1.0);
  below = below && top < 130.0 && top >= prev;
  if (!mono) bad.push_back("tempo not monotone");
  if (!below) bad.push_back("tempo reached 130");
  const double r1 = xp::video_tempo_raw(60, 60.0);
  if (std::abs(r1 - (60 + 70 * std::tanh(1.0))) > 1e-9 || xp::video_tempo(60, 60.0) != 113.0) bad.push_back("R=1 tempo");
  if (xp::video_bar_count(60.0, 120.0, 4) != 30) bad.push_back("(60 s, 120 bpm, 4) != 30 bars");
  std::vector<double> resnet(kEmotionCount, 0.0), clip(kEmotionCount, 0.0);
  resnet[static_cast<int>(Emotion::Sad)] = 0.6;
  resnet[static_cast<int>(Emotion::Happy)] = 0.4;
  clip[static_cast<int>(Emotion::Sad)] = 0.3;
  clip[static_cast<int>(Emotion::Happy)] = 0.7;
  // 0.4 + 2 * 0.7 = 1.8 beats 0.6 + 2 * 0.3 = 1.2
  if (xp::fuse_image_scores(resnet, clip, 1.0, 2.0) != Emotion::Happy) bad.push_back("fusion (1,2)");
  if (xp::fuse_image_scores(resnet, clip, 1.0, 0.0) != Emotion::Sad) bad.push_back("fusion (1,0)");
  std::string d = bad.empty() ? "tempo(0)=60, monotone < 130 up to R=1e6, R=1 -> 113, 30 bars, fusion -> happy" : "";
  for (const auto& b : bad) d += (d.empty() ? "" : "; ") + b;
  return {bad.empty(), d};
}

Outcome metric_oracles() {
  Rng rng(31);
  synthetic::RandomScoreOptions o;
  o.bars = 4;
  int mismatches = 0, checked = 0;
  for (int i = 0; i < kMetricScores; ++i) {
    const Score s = synthetic::random_quantized_score(rng, o);
    bool melodic = false;
    for (const auto& t : s.tracks) melodic = melodic || (t.instrument != InstrumentClass::Drum && !t.notes.empty());
    if (melodic) {
      mismatches += metrics::pce(s) != testing::naive_pce(s);
      ++checked;
    }
    try {
      const double g = metrics::gs(s);
      mismatches += g != testing::naive_gs(s);
      ++checked;
    } catch (const Error&) {
    }
    if (s.end_tick() > 0) {
      mismatches += metrics::ebr(s) != testing::naive_ebr(s);
      ++checked;
    }
  }
  Score uniform;
  Track t{InstrumentClass::Piano, {}};
  for (int p = 0; p < 12; ++p) t.notes.push_back({60 + p, p * 120, p * 120 + 60, 100});
  uniform.tracks.push_back(t);
  const double err = std::abs(metrics::pce(uniform) - std::log2(12.0));
  return {mismatches == 0 && err <= kUniformPceTol,
          fmt("%d scores, %d metric values compared, %d mismatches; |PCE_uniform - log2 12| = %.1e", kMetricScores, checked,
              mismatches, err)};
}

Outcome generator_gradients() {
  GeneratorConfig c;  // desk defaults: 2 layers
  Generator gen(c);
  auto corpus = synthetic::register_corpus(2, 77, 1);
  for (auto& s : corpus) s.events.resize(std::min<std::size_t>(s.events.size(), 24));
  std::vector<const EventSequence*> ptrs = {&corpus[0], &corpus[1]};
  const auto probes =
      testing::gradient_check(gen.params(), [&](bool backward) { return gen.batch_loss(ptrs, backward); }, kGradProbes, 13);
  double worst = 0;
  for (const auto& p : probes) worst = std::max(worst, p.rel_error);
  return {static_cast<int>(probes.size()) == kGradProbes && worst < kGradTol,
          fmt("%d layers, hidden %d, %zu probes, max relative error %.2e (tol %.0e)", c.layers, c.hidden, probes.size(), worst, kGradTol)};
}

GeneratorConfig fidelity_config() {
  GeneratorConfig c;
  c.hidden = 64;
  c.heads = 4;
  c.layers = 2;
  c.context = 128;
  c.learning_rate = 2e-3;
  c.seed = 5;
  return c;
}

struct TrainedGenerator {
  std::optional<Generator> gen;
  double seconds = 0;
  int steps = 0;
};

TrainedGenerator& toy_generator() {
  static TrainedGenerator tg;
  if (tg.gen) return tg;
  tg.gen.emplace(fidelity_config());
  TrainOptions o;
  o.steps = kFidelitySteps;
  o.batch_size = 8;
  o.seed = 3;
  o.time_budget_s = kTrainBudgetS;
  const auto rep = train_generator(*tg.gen, synthetic::register_corpus(kFidelityCorpus, 11, 2), o);
  tg.seconds = rep.seconds;
  tg.steps = rep.steps;
  return tg;
}

Outcome conditioning_fidelity() {
  auto& tg = toy_generator();
  std::size_t notes = 0, in_register = 0;
  int violations = 0;
  Rng pick(99);
  const auto t0 = Clock::now();
  for (int i = 0; i < kFidelitySamples; ++i) {
    const auto e = static_cast<Emotion>(pick.uniform_int(0, kEmotionCount - 1));
    ProjectionElements ctl;
    ctl.emotion = EmotionElement{e, {}};
    const auto seq = tg.gen->sample(ctl, {1.0, 2, static_cast<std::uint64_t>(i) + 1});
    if (!check_sequence(seq).empty()) {
      ++violations;
      continue;
    }
    try {
      const auto d = decode(seq);
      const auto [lo, hi] = synthetic::register_range(synthetic::register_of(e));
      for (const auto& t : d.score.tracks)
        for (const auto& n : t.notes) {
          ++notes;
          in_register += t.instrument != InstrumentClass::Drum && n.pitch >= lo && n.pitch <= hi;
        }
    } catch (const Error&) {
      ++violations;
    }
  }
  const double frac = notes ? static_cast<double>(in_register) / static_cast<double>(notes) : 0.0;
  const bool ok = tg.seconds <= kTrainBudgetS && frac >= kInRegisterMin && violations == 0;
  return {ok, fmt("trained %d steps in %.0f s (budget %.0f s); %d samples in %.0f s, %zu notes, %.2f%% in register (min %.0f%%), "
                  "%d decode/mask violations",
                  tg.steps, tg.seconds, kTrainBudgetS, kFidelitySamples, seconds_since(t0), notes, 100 * frac,
                  100 * kInRegisterMin, violations)};
}

SelectorConfig ablation_config(std::uint64_t seed) {
  SelectorConfig c;
  c.hidden = 32;
  c.heads = 4;
  c.layers = 1;
  c.seed = seed;
  return c;
}

Outcome selector_ablation() {
  const auto t0 = Clock::now();
  std::vector<double> one, three;
  std::string per_seed;
  for (int seed = 1; seed <= kAblationSeeds; ++seed) {
    const auto train = to_selector_examples(synthetic::quality_corpus(kAblationTrain, static_cast<std::uint64_t>(seed)));
    const auto test = to_selector_examples(synthetic::quality_corpus(kAblationTest, 1000 + static_cast<std::uint64_t>(seed)));
    for (const HeadMask mask : {HeadMask::quality_only(), HeadMask::all()}) {
      Selector sel(ablation_config(static_cast<std::uint64_t>(seed)));
      SelectorTrainOptions o;
      o.steps = kAblationSteps;
      o.seed = static_cast<std::uint64_t>(seed);
      o.mask = mask;
      train_multitask(sel, train, o);
      (mask == HeadMask::all() ? three : one).push_back(evaluate_selector(sel, test).quality);
    }
    per_seed += fmt(" %.3f/%.3f", one.back(), three.back());
  }
  const double m1 = std::accumulate(one.begin(), one.end(), 0.0) / kAblationSeeds;
  const double m3 = std::accumulate(three.begin(), three.end(), 0.0) / kAblationSeeds;
  int wins = 0;
  for (int i = 0; i < kAblationSeeds; ++i) wins += three[static_cast<std::size_t>(i)] >= one[static_cast<std::size_t>(i)];
  const double t = seconds_since(t0);
  return {m3 >= m1 && t <= kAblationBudgetS,
          fmt("held-out quality accuracy, mean 1-head %.3f vs 3-head %.3f; 3-head >= 1-head in %d/%d seeds (1-head/3-head:%s); "
              "%.0f s (budget %.0f s)",
              m1, m3, wins, kAblationSeeds, per_seed.c_str(), t, kAblationBudgetS)};
}

struct MetricMeans {
  double pce = 0, gs = 0, ebr = 0;
  int pce_n = 0, gs_n = 0, ebr_n = 0;
  void add(const metrics::MetricReport& r) {
    if (r.pce) pce += *r.pce, ++pce_n;
    if (r.gs) gs += *r.gs, ++gs_n;
    if (r.ebr) ebr += *r.ebr, ++ebr_n;
  }
  double mean_pce() const { return pce / pce_n; }
  double mean_gs() const { return gs / gs_n; }
  double mean_ebr() const { return ebr / ebr_n; }
};

// Generator trained on the same mixed-quality music the selector learns from.
Generator quality_generator() {
  Generator gen(fidelity_config());
  std::vector<EventSequence> corpus;
  for (auto& ex : synthetic::quality_corpus(kEffectCorpus, 21)) corpus.push_back(std::move(ex.sequence));
  TrainOptions o;
  o.steps = kEffectSteps;
  o.batch_size = 8;
  o.seed = 4;
  o.time_budget_s = kTrainBudgetS;
  train_generator(gen, corpus, o);
  return gen;
}

Outcome selector_effect() {
  const Generator gen = quality_generator();
  Selector sel(ablation_config(1));
  SelectorTrainOptions o;
  o.steps = kAblationSteps;
  o.mask = HeadMask::all();
  train_multitask(sel, to_selector_examples(synthetic::quality_corpus(kAblationTrain, 1)), o);

  MetricMeans all, chosen;
  int batches_selected = 0;
  Rng pick(5);
  for (int b = 0; b < kEffectBatches; ++b) {
    ProjectionElements ctl;
    ctl.emotion = EmotionElement{static_cast<Emotion>(pick.uniform_int(0, kEmotionCount - 1)), {}};
    std::vector<EventSequence> batch;
    for (int k = 0; k < kEffectBatchSize; ++k)
      batch.push_back(gen.sample(ctl, {1.0, 4, static_cast<std::uint64_t>(b * kEffectBatchSize + k) + 7}));
    std::vector<metrics::MetricReport> reports;
    for (const auto& s : batch) reports.push_back(metrics::evaluate(decode(s).score));
    for (const auto& r : reports) all.add(r);
    if (const auto best = select_best(sel, batch, kEffectTheta)) {
      chosen.add(reports[*best]);
      ++batches_selected;
    }
  }
  if (batches_selected == 0 || chosen.pce_n == 0 || chosen.gs_n == 0 || chosen.ebr_n == 0)
    return {false, fmt("no batch had a candidate above %.2f", kEffectTheta)};
  const bool ok = chosen.mean_pce() <= all.mean_pce() && chosen.mean_ebr() <= all.mean_ebr() && chosen.mean_gs() >= all.mean_gs();
  return {ok, fmt("%d/%d batches selected; PCE %.3f -> %.3f, EBR %.3f -> %.3f, GS %.3f -> %.3f (unfiltered -> selected)",
                  batches_selected, kEffectBatches, all.mean_pce(), chosen.mean_pce(), all.mean_ebr(), chosen.mean_ebr(),
                  all.mean_gs(), chosen.mean_gs())};
}

dataset::CorpusEntry entry_of(const std::string& path, const Score& s, const std::string& hash, double duration) {
  dataset::CorpusEntry e;
  e.path = path;
  e.hash = hash;
  e.profile = dataset::pitch_class_profile(s);
  e.duration_s = duration;
  return e;
}

Outcome dedup_properties() {
  Rng rng(41);
  int idempotence_failures = 0, threshold_failures = 0, pair_failures = 0, pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<dataset::CorpusEntry> corpus;
    const int n = rng.uniform_int(0, 12);
    for (int i = 0; i < n; ++i)
      corpus.push_back(entry_of("f" + std::to_string(rng.uniform_int(0, 99)) + "_" + std::to_string(i), Score{},
                                "h" + std::to_string(rng.uniform_int(0, 4)), 1));
    const auto once = dataset::dedup_exact(corpus);
    const auto twice = dataset::dedup_exact(once.kept);
    std::vector<std::string> a, b;
    for (const auto& e : once.kept) a.push_back(e.path);
    for (const auto& e : twice.kept) b.push_back(e.path);
    idempotence_failures += a != b || !twice.dropped.empty();
  }
  synthetic::RandomScoreOptions o;
  o.drums = false;
  for (int trial = 0; trial < 100; ++trial) {
    const Score s = synthetic::random_quantized_score(rng, o);
    if (s.note_count() == 0) continue;
    Score copy = s, nudged = s;
    for (auto& t : copy.tracks)
      for (auto& n : t.notes) n.velocity = std::max(1, n.velocity / 2);
    auto& last = nudged.tracks.front().notes.back();
    last.pitch = last.pitch < 127 ? last.pitch + 1 : last.pitch - 1;
    const auto orig = entry_of("a", s, "h1", 10);
    const bool identical_kept_apart = dataset::dedup_similarity({orig, entry_of("b", copy, "h2", 10)}, 1.0).kept.size() != 1;
    const auto nudged_entry = entry_of("c", nudged, "h3", 10);
    const bool distinct_merged = nudged_entry.profile != orig.profile &&
                                 dataset::dedup_similarity({orig, nudged_entry}, 1.0).kept.size() != 2;
    threshold_failures += identical_kept_apart || distinct_merged;
    ++pairs;
    pair_failures += dataset::dedup_similarity({orig, entry_of("b", copy, "h2", 10)}).kept.size() != 1;
  }
  return {idempotence_failures == 0 && threshold_failures == 0 && pair_failures == 0,
          fmt("idempotence failures %d/100; threshold-1.0 failures %d/%d; duplicate pairs not collapsed %d/%d", idempotence_failures,
              threshold_failures, pairs, pair_failures, pairs)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"codec-round-trip", codec_round_trip},       {"vocabulary-audit", vocabulary_audit},
      {"projector-formulas", projector_formulas},   {"metric-oracles", metric_oracles},
      {"generator-gradients", generator_gradients}, {"conditioning-fidelity", conditioning_fidelity},
      {"selector-ablation", selector_ablation},     {"selector-with-vs-without", selector_effect},
      {"dedup", dedup_properties},
  };
  std::set<std::string> only;
  for (int i = 1; i + 1 < argc; i += 2)
    if (std::string(argv[i]) == "--only") only.insert(argv[i + 1]);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto t0 = Clock::now();
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("%s %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
