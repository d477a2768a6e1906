// Throughput of the hot paths: pooled attention scaling, whole-model forward
// and backward, inference strategies on a page, and the SSIM metric.

#include <benchmark/benchmark.h>

#include "docstormer/blocks.hpp"
#include "docstormer/degrade.hpp"
#include "docstormer/losses.hpp"
#include "docstormer/metrics.hpp"
#include "docstormer/networks.hpp"
#include "docstormer/pfili.hpp"
#include "docstormer/tape.hpp"

using namespace docstormer;

namespace {

// Pooled attention over a square feature map; time should grow roughly with
// the pixel count since the attention matrix has a fixed size.
void BM_AstmForward(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  Rng rng(1);
  ParameterSet<float> params;
  Astm<float> astm(AstmConfig{36, 1, 16, 16}, 1.0, params, "astm", rng);
  const Tensorf x = init::uniform<float>(Shape{36, side, side}, 0.f, 1.f, rng);
  TapeScope no_tape(nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(astm.forward(x));
  state.SetComplexityN(side * side);
}
BENCHMARK(BM_AstmForward)->RangeMultiplier(2)->Range(32, 256)->Unit(benchmark::kMillisecond)->Complexity();

void BM_TinyForward(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  DocStormer<float> model(model_preset("tiny"), 1);
  const Tensorf x = synthetic_page(side, side, 1);
  TapeScope no_tape(nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_TinyForward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

// One training step's worth of autodiff work without the optimizer.
void BM_TinyForwardBackward(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  DocStormer<float> model(model_preset("tiny"), 1);
  auto params = model.params();
  Rng rng(2);
  const SamplePair pair = synthesize_sample(synthetic_page(side, side, 2), random_specs(rng));
  for (auto _ : state) {
    params.zero_grad();
    Tape tape;
    TapeScope scope(&tape);
    const auto out = model.forward(pair.degraded);
    backward(l_ds(out.enhanced, pair.ground_truth, out.priors, pair.priors), tape);
  }
}
BENCHMARK(BM_TinyForwardBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Strategy(benchmark::State& state) {
  const auto strategy = static_cast<Strategy>(state.range(0));
  DocStormer<float> model(model_preset("tiny"), 1);
  ImageModel m = [&](const Tensorf& x) { return model.forward(x).enhanced; };
  const Tensorf page = synthetic_page(768, 1024, 3);
  InferenceOptions opt;
  opt.work_h = 384;
  opt.work_w = 512;
  TapeScope no_tape(nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(run_strategy(strategy, m, page, opt));
  state.SetLabel(std::string(strategy_name(strategy)));
}
BENCHMARK(BM_Strategy)
    ->Arg(static_cast<int>(Strategy::Full))
    ->Arg(static_cast<int>(Strategy::Bicubic))
    ->Arg(static_cast<int>(Strategy::Patches))
    ->Arg(static_cast<int>(Strategy::Pfili))
    ->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  const Tensorf a = synthetic_page(side, side, 4), b = synthetic_page(side, side, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Ssim)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
