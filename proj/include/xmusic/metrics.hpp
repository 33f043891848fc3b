/**
 * @file metrics.hpp
 * @brief Objective metrics: pitch-class histogram entropy, grooving pattern
 * similarity and empty beat rate.
 */
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmusic/score.hpp"

namespace xmusic::metrics {

/// Base-2 entropy of the 12-bin pitch-class histogram of non-drum onsets.
/// Throws NoMelodicNotes.
double pce(const Score& score);

/// Mean over all pairs of bars that hold onsets of 1 - hamming(g_a, g_b) / 32,
/// where g is the bar's 32-slot binary onset vector (drums included).
/// Throws TooFewBars when fewer than two bars hold onsets.
double gs(const Score& score);

/// Fraction of quarter beats without an onset. The piece spans `beats`
/// quarters when given, else up to the last note offset rounded up to a
/// whole beat. Throws EmptyScore when the span is shorter than one beat.
double ebr(const Score& score, std::optional<int> beats = std::nullopt);

struct MetricReport {
  std::string name;
  std::optional<double> pce;
  std::optional<double> gs;
  std::optional<double> ebr;
  /// Why a metric is missing, one entry per failure.
  std::vector<std::string> errors;
};

MetricReport evaluate(const Score& score, const std::string& name = "");

struct CorpusSummary {
  std::size_t files = 0;
  std::optional<double> pce;
  std::optional<double> gs;
  std::optional<double> ebr;
  std::size_t pce_count = 0;
  std::size_t gs_count = 0;
  std::size_t ebr_count = 0;
};

/// Means over the reports that carry each metric.
CorpusSummary summarize(std::span<const MetricReport> reports);

namespace serial {
std::vector<MetricReport> evaluate_batch(std::span<const Score> scores);
}
namespace omp {
std::vector<MetricReport> evaluate_batch(std::span<const Score> scores);
}
inline std::vector<MetricReport> evaluate_batch(std::span<const Score> scores) { return omp::evaluate_batch(scores); }

/// Per-file CSV with header name,pce,gs,ebr (empty cells for missing values).
std::string to_csv(std::span<const MetricReport> reports);
nlohmann::json to_json(const CorpusSummary& s);

}  // namespace xmusic::metrics
