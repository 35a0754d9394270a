#include <benchmark/benchmark.h>

#include "ecgtta/augment.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/rng.hpp"

using namespace ecgtta;

namespace {

EcgRecord make_record(std::size_t n, std::uint32_t fs, std::uint64_t seed) {
  EcgRecord r;
  r.id = "bench";
  r.fs_hz = fs;
  r.label = Label::Normal;
  r.samples.resize(n);
  Rng rng(seed);
  for (auto& v : r.samples) v = static_cast<float>(rng.normal());
  return r;
}

}  // namespace

static void BM_Preprocess300Hz30s(benchmark::State& state) {
  EcgRecord rec = make_record(9000, 300, 1);
  PreprocessConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(preprocess(rec, cfg, Phase::Eval));
}
BENCHMARK(BM_Preprocess300Hz30s);

static void BM_RunningMedian(benchmark::State& state) {
  EcgRecord rec = make_record(static_cast<std::size_t>(state.range(0)), 300, 2);
  for (auto _ : state) benchmark::DoNotOptimize(remove_baseline(rec, 0.6));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunningMedian)->Arg(3000)->Arg(12000);

static void BM_ZeroPhaseBandpass(benchmark::State& state) {
  EcgRecord rec = make_record(static_cast<std::size_t>(state.range(0)), 300, 3);
  for (auto _ : state) benchmark::DoNotOptimize(butterworth_bandpass(rec, 0.5, 40.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ZeroPhaseBandpass)->Arg(3000)->Arg(12000);

static void BM_Spectrogram(benchmark::State& state) {
  EcgRecord rec = make_record(3000, 100, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compute_spectrogram(rec, 64, 32));
}
BENCHMARK(BM_Spectrogram);

static void BM_AugmentRecord(benchmark::State& state) {
  EcgRecord rec = make_record(3000, 100, 5);
  AugmentPolicy policy;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(augment_record(rec, policy, rng));
}
BENCHMARK(BM_AugmentRecord);
