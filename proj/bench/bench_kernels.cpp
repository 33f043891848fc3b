// Serial reference kernels against their OpenMP versions.
// Run with OMP_NUM_THREADS set to compare thread counts.
#include <benchmark/benchmark.h>

#include <vector>

#include "xmusic/metrics.hpp"
#include "xmusic/nn/kernels.hpp"
#include "xmusic/rng.hpp"
#include "xmusic/selector.hpp"
#include "xmusic/synthetic.hpp"

using namespace xmusic;
namespace k = xmusic::nn::kernels;

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <void (*Matmul)(const double*, const double*, double*, int, int, int, bool)>
void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_buffer(static_cast<std::size_t>(n) * n, 1);
  const auto b = random_buffer(static_cast<std::size_t>(n) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    Matmul(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

template <void (*Softmax)(double*, int, int)>
void BM_softmax(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto src = random_buffer(static_cast<std::size_t>(n) * n, 3);
  std::vector<double> x = src;
  for (auto _ : state) {
    x = src;
    Softmax(x.data(), n, n);
    benchmark::DoNotOptimize(x.data());
  }
}

const std::vector<Score>& metric_corpus() {
  static const std::vector<Score> scores = [] {
    Rng rng(5);
    synthetic::RandomScoreOptions o;
    o.bars = 8;
    std::vector<Score> v;
    for (int i = 0; i < 256; ++i) v.push_back(synthetic::random_quantized_score(rng, o));
    return v;
  }();
  return scores;
}

void BM_metrics_serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(metrics::serial::evaluate_batch(metric_corpus()));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(metric_corpus().size()));
}

void BM_metrics_omp(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(metrics::omp::evaluate_batch(metric_corpus()));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(metric_corpus().size()));
}

void BM_selector_score_batch(benchmark::State& state) {
  SelectorConfig c;
  c.hidden = 32;
  c.heads = 4;
  const Selector sel(c);
  std::vector<EventSequence> batch;
  for (const auto& ex : synthetic::quality_corpus(16, 3)) batch.push_back(ex.sequence);
  for (auto _ : state) benchmark::DoNotOptimize(sel.score_batch(batch));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch.size()));
}

}  // namespace

BENCHMARK(BM_matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul<k::omp::matmul>)->Name("matmul/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_softmax<k::serial::softmax_rows>)->Name("softmax_rows/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_softmax<k::omp::softmax_rows>)->Name("softmax_rows/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_metrics_serial)->Name("metrics_batch/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_metrics_omp)->Name("metrics_batch/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_selector_score_batch)->Name("selector_score_batch/omp")->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
