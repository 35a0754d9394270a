#include <benchmark/benchmark.h>

#include "ecgtta/nn.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/rng.hpp"
#include "ecgtta/tta.hpp"

using namespace ecgtta;

namespace {

struct ModelFixture {
  nn::ModelConfig cfg;
  PreprocessConfig pre;
  nn::DualNetModel model;
  EcgRecord rec;
  Spectrogram spec;

  ModelFixture() {
    model = nn::init_model(cfg, pre.target_len,
                           (pre.target_len - pre.spec_window) / pre.spec_hop + 1,
                           pre.spec_window / 2 + 1, 99);
    rec.id = "bench";
    rec.fs_hz = pre.target_fs_hz;
    rec.label = Label::AF;
    rec.samples.resize(static_cast<std::size_t>(pre.target_len));
    Rng rng(7);
    for (auto& v : rec.samples) v = static_cast<float>(rng.normal());
    spec = compute_spectrogram(rec, pre.spec_window, pre.spec_hop);
  }
};

ModelFixture& fixture() {
  static ModelFixture f;
  return f;
}

}  // namespace

static void BM_ForwardEval(benchmark::State& state) {
  ModelFixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(nn::forward(f.model, f.rec.samples, f.spec, Phase::Eval));
}
BENCHMARK(BM_ForwardEval);

static void BM_ForwardBackward(benchmark::State& state) {
  ModelFixture& f = fixture();
  nn::BatchItem item{f.rec.samples, &f.spec, Label::AF};
  for (auto _ : state)
    benchmark::DoNotOptimize(nn::backward(f.model, std::span<const nn::BatchItem>(&item, 1), 1));
}
BENCHMARK(BM_ForwardBackward);

static void BM_TtaPredict(benchmark::State& state) {
  ModelFixture& f = fixture();
  TtaConfig cfg;
  cfg.n_runs = static_cast<int>(state.range(0));
  cfg.seed = 11;
  for (auto _ : state)
    benchmark::DoNotOptimize(tta_predict_preprocessed(f.model, f.rec, f.pre, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TtaPredict)->Arg(1)->Arg(25);
