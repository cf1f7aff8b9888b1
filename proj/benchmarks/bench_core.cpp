#include <benchmark/benchmark.h>

#include "lidsn/data/epochs.hpp"
#include "lidsn/data/preprocess.hpp"
#include "lidsn/data/synth.hpp"
#include "lidsn/model/network.hpp"
#include "lidsn/ops.hpp"

using namespace lidsn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  RngStream rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), grad);
}

model::ModelConfig synth_geometry() {
  model::ModelConfig cfg;
  cfg.n_channels = 8;
  cfg.n_samples = 512;
  return cfg;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_DepthwiseConv(benchmark::State& state) {
  const Tensor x = random_tensor({8, 40, 1000}, 3), w = random_tensor({40, 25}, 4), b = random_tensor({40}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_depthwise(x, w, b));
}
BENCHMARK(BM_DepthwiseConv);

static void BM_ForwardEvalReference(benchmark::State& state) {
  model::LidsnModel m(model::ModelConfig::bnci2014001(), 1);
  const Tensor x = random_tensor({22, 1000}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(x));
}
BENCHMARK(BM_ForwardEvalReference)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  model::LidsnModel m(synth_geometry(), 1);
  const Tensor x = random_tensor({batch, 8, 512}, 7);
  const std::vector<int> labels(batch, 1);
  const std::vector<double> weights{1.0, 1.0};
  RngStream rng(8);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = weighted_cross_entropy(m.forward(x, Mode::train, rng), labels, weights);
    backward(loss, tape);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_SynthGenerate(benchmark::State& state) {
  const data::SynthSpec spec = data::SynthSpec::two_class_default();
  for (auto _ : state) benchmark::DoNotOptimize(data::synth_generate(spec, 1));
}
BENCHMARK(BM_SynthGenerate)->Unit(benchmark::kMillisecond);

static void BM_EuclideanAlign(benchmark::State& state) {
  const data::EpochSet set = data::synth_generate(data::SynthSpec::two_class_default(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(data::euclidean_align(set));
}
BENCHMARK(BM_EuclideanAlign)->Unit(benchmark::kMillisecond);

static void BM_RpsdFeatures(benchmark::State& state) {
  const data::EpochSet set = data::synth_generate(data::SynthSpec::two_class_default(), 3);
  data::RpsdParams p;
  p.outer_seconds = 2.0;
  p.inner_seconds = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(data::rpsd_features(set, p));
}
BENCHMARK(BM_RpsdFeatures)->Unit(benchmark::kMillisecond);

static void BM_EpochCodec(benchmark::State& state) {
  const data::EpochSet set = data::synth_generate(data::SynthSpec::two_class_default(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(data::decode_epochs(data::encode_epochs(set)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(set.data.size() * 4));
}
BENCHMARK(BM_EpochCodec)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
