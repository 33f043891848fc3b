#include <cmath>

#include "doctest.h"
#include "support/metric_oracles.hpp"
#include "xmusic/error.hpp"
#include "xmusic/metrics.hpp"
#include "xmusic/synthetic.hpp"

using namespace xmusic;
using namespace xmusic::testing;

namespace {

constexpr int kStep = 60;

Score piano(std::vector<std::pair<int, int>> step_pitch, int dur_steps = 1) {
  Score s;
  s.tempo_map = {{0, 119}};
  Track t{InstrumentClass::Piano, {}};
  for (auto [step, pitch] : step_pitch)
    t.notes.push_back({pitch, static_cast<std::int64_t>(step) * kStep, static_cast<std::int64_t>(step + dur_steps) * kStep, 100});
  s.tracks.push_back(t);
  return s;
}

}  // namespace

TEST_CASE("pitch class entropy") {
  CHECK(metrics::pce(piano({{0, 48}, {8, 60}, {16, 72}})) == 0.0);
  std::vector<std::pair<int, int>> all;
  for (int p = 0; p < 12; ++p) all.push_back({p * 2, 60 + p});
  CHECK(metrics::pce(piano(all)) == doctest::Approx(std::log2(12.0)).epsilon(1e-9));
  CHECK(std::abs(metrics::pce(piano(all)) - std::log2(12.0)) < 1e-9);
  Score drums = piano({{0, 36}});
  drums.tracks[0].instrument = InstrumentClass::Drum;
  CHECK_THROWS_AS(metrics::pce(drums), Error);
}

TEST_CASE("grooving pattern similarity") {
  CHECK(metrics::gs(piano({{0, 60}, {8, 60}, {32, 60}, {40, 60}, {64, 60}, {72, 60}})) == 1.0);
  std::vector<std::pair<int, int>> comp;
  for (int k = 0; k < 32; ++k) comp.push_back({k % 2 == 0 ? k : 32 + k, 60});
  CHECK(metrics::gs(piano(comp)) == 0.0);
  std::vector<std::pair<int, int>> eight = {{0, 60}};
  for (int k = 0; k < 9; ++k) eight.push_back({32 + (k == 0 ? 0 : k * 3), 60});
  // bar 0 = {0}; bar 1 = {0,3,6,...,24}: they differ in 8 slots
  CHECK(metrics::gs(piano(eight)) == doctest::Approx(0.75));
  CHECK_THROWS_AS(metrics::gs(piano({{0, 60}, {8, 62}})), Error);
}

TEST_CASE("empty beat rate") {
  CHECK(metrics::ebr(piano({{0, 60}, {8, 60}, {16, 60}, {24, 60}}, 8)) == 0.0);
  CHECK(metrics::ebr(piano({{0, 60}, {8, 60}, {24, 60}}, 8)) == doctest::Approx(0.25));
  Score empty;
  CHECK(metrics::ebr(empty, 4) == 1.0);
  CHECK_THROWS_AS(metrics::ebr(empty), Error);
}

TEST_CASE("metrics match brute force on random four-bar scores") {
  Rng rng(17);
  synthetic::RandomScoreOptions o;
  o.bars = 4;
  int pce_n = 0, gs_n = 0;
  for (int i = 0; i < 500; ++i) {
    const Score s = synthetic::random_quantized_score(rng, o);
    bool melodic = false;
    for (const auto& t : s.tracks) melodic = melodic || (t.instrument != InstrumentClass::Drum && !t.notes.empty());
    if (melodic) {
      CHECK(metrics::pce(s) == naive_pce(s));
      ++pce_n;
    }
    try {
      const double g = metrics::gs(s);
      CHECK(g == naive_gs(s));
      ++gs_n;
    } catch (const Error&) {
    }
    if (s.end_tick() > 0) CHECK(metrics::ebr(s) == naive_ebr(s));
  }
  CHECK(pce_n > 400);
  CHECK(gs_n > 300);
}

TEST_CASE("metric invariances") {
  Rng rng(4);
  synthetic::RandomScoreOptions o;
  o.bars = 4;
  o.drums = false;
  for (int i = 0; i < 100; ++i) {
    Score s = synthetic::random_quantized_score(rng, o);
    if (s.note_count() == 0) continue;
    const auto base = metrics::evaluate(s);
    Score up = s;
    for (auto& t : up.tracks)
      for (auto& n : t.notes) n.pitch = n.pitch + 12 <= 127 ? n.pitch + 12 : n.pitch - 12;
    CHECK(metrics::evaluate(up).pce == base.pce);
    Score shifted = s;
    for (auto& t : shifted.tracks)
      for (auto& n : t.notes) n.pitch = (n.pitch + 5) % 128;
    CHECK(metrics::evaluate(shifted).gs == base.gs);
    CHECK(metrics::evaluate(shifted).ebr == base.ebr);
    Score rev = s;
    std::reverse(rev.tracks.begin(), rev.tracks.end());
    const auto r = metrics::evaluate(rev);
    CHECK(r.pce == base.pce);
    CHECK(r.gs == base.gs);
    CHECK(r.ebr == base.ebr);
  }
}

TEST_CASE("parallel and serial batch evaluation agree") {
  Rng rng(9);
  std::vector<Score> scores;
  for (int i = 0; i < 64; ++i) scores.push_back(synthetic::random_quantized_score(rng));
  const auto a = metrics::serial::evaluate_batch(scores);
  const auto b = metrics::omp::evaluate_batch(scores);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pce == b[i].pce);
    CHECK(a[i].gs == b[i].gs);
    CHECK(a[i].ebr == b[i].ebr);
  }
  const auto sum = metrics::summarize(a);
  CHECK(sum.files == 64);
  const auto j = metrics::to_json(sum);
  CHECK(j["files"] == 64);
  const auto csv = metrics::to_csv(a);
  CHECK(csv.rfind("name,pce,gs,ebr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
}
