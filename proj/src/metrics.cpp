#include "xmusic/metrics.hpp"

#include <array>
#include <bitset>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "xmusic/error.hpp"

namespace xmusic::metrics {

namespace {

bool is_drum(const Track& t) { return t.instrument == InstrumentClass::Drum; }

std::int64_t onset_step(const Note& n, int tpq) { return grid::nearest_step(n.onset, tpq); }

}  // namespace

double pce(const Score& score) {
  std::array<double, 12> hist{};
  double total = 0;
  for (const auto& t : score.tracks) {
    if (is_drum(t)) continue;
    for (const auto& n : t.notes) {
      hist[static_cast<std::size_t>(n.pitch % 12)] += 1;
      total += 1;
    }
  }
  if (total == 0) throw Error(ErrorCode::NoMelodicNotes, "score has no non-drum notes");
  double h = 0;
  for (double c : hist)
    if (c > 0) h -= (c / total) * std::log2(c / total);
  return h;
}

double gs(const Score& score) {
  std::map<std::int64_t, std::bitset<grid::kStepsPerBar>> bars;
  for (const auto& t : score.tracks)
    for (const auto& n : t.notes) {
      const std::int64_t s = onset_step(n, score.ticks_per_quarter);
      bars[s / grid::kStepsPerBar].set(static_cast<std::size_t>(s % grid::kStepsPerBar));
    }
  if (bars.size() < 2)
    throw Error(ErrorCode::TooFewBars, "grooving similarity needs two bars with onsets, found " + std::to_string(bars.size()));
  std::vector<std::bitset<grid::kStepsPerBar>> g;
  for (const auto& [_, v] : bars) g.push_back(v);
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b) {
      sum += 1.0 - static_cast<double>((g[a] ^ g[b]).count()) / grid::kStepsPerBar;
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double ebr(const Score& score, std::optional<int> beats) {
  const int tpq = score.ticks_per_quarter;
  const std::int64_t span = beats ? *beats : (score.end_tick() + tpq - 1) / tpq;
  if (span < 1) throw Error(ErrorCode::EmptyScore, "score spans less than one beat");
  std::set<std::int64_t> hit;
  for (const auto& t : score.tracks)
    for (const auto& n : t.notes) {
      const std::int64_t beat = onset_step(n, tpq) / grid::kStepsPerQuarter;
      if (beat < span) hit.insert(beat);
    }
  return static_cast<double>(span - static_cast<std::int64_t>(hit.size())) / static_cast<double>(span);
}

MetricReport evaluate(const Score& score, const std::string& name) {
  MetricReport r;
  r.name = name;
  auto attempt = [&](std::optional<double>& slot, auto&& fn) {
    try {
      slot = fn();
    } catch (const Error& e) {
      r.errors.push_back(e.what());
    }
  };
  attempt(r.pce, [&] { return pce(score); });
  attempt(r.gs, [&] { return gs(score); });
  attempt(r.ebr, [&] { return ebr(score); });
  return r;
}

CorpusSummary summarize(std::span<const MetricReport> reports) {
  CorpusSummary s;
  s.files = reports.size();
  double p = 0, g = 0, e = 0;
  for (const auto& r : reports) {
    if (r.pce) { p += *r.pce; ++s.pce_count; }
    if (r.gs) { g += *r.gs; ++s.gs_count; }
    if (r.ebr) { e += *r.ebr; ++s.ebr_count; }
  }
  if (s.pce_count) s.pce = p / static_cast<double>(s.pce_count);
  if (s.gs_count) s.gs = g / static_cast<double>(s.gs_count);
  if (s.ebr_count) s.ebr = e / static_cast<double>(s.ebr_count);
  return s;
}

namespace serial {
std::vector<MetricReport> evaluate_batch(std::span<const Score> scores) {
  std::vector<MetricReport> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back(evaluate(scores[i], std::to_string(i)));
  return out;
}
}  // namespace serial

namespace omp {
std::vector<MetricReport> evaluate_batch(std::span<const Score> scores) {
  std::vector<MetricReport> out(scores.size());
  const long n = static_cast<long>(scores.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = evaluate(scores[static_cast<std::size_t>(i)], std::to_string(i));
  return out;
}
}  // namespace omp

std::string to_csv(std::span<const MetricReport> reports) {
  std::ostringstream os;
  os.precision(17);
  os << "name,pce,gs,ebr\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : reports) {
    os << r.name << ',';
    cell(r.pce);
    os << ',';
    cell(r.gs);
    os << ',';
    cell(r.ebr);
    os << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const CorpusSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"schema", "xmusic.metrics_summary"},
          {"version", 1},
          {"files", s.files},
          {"pce", {{"mean", opt(s.pce)}, {"count", s.pce_count}}},
          {"gs", {{"mean", opt(s.gs)}, {"count", s.gs_count}}},
          {"ebr", {{"mean", opt(s.ebr)}, {"count", s.ebr_count}}}};
}

}  // namespace xmusic::metrics
