// Microbenchmarks for the kernels on the simulation hot path: covariance
// estimation, the eigensolver, feature extraction, pair synthesis, and the
// classifier forward pass. Run with --benchmark_filter=... to focus.

#include <benchmark/benchmark.h>

#include "covdiff/classifier.hpp"
#include "covdiff/matkit.hpp"
#include "covdiff/rng.hpp"
#include "covdiff/scenario.hpp"
#include "covdiff/sensing.hpp"

using namespace covdiff;

namespace {

ComplexMatrix random_block(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  ComplexMatrix m(rows, cols);
  for (auto& e : m.entries()) e = rng.cnormal();
  return m;
}

void BM_Scm(benchmark::State& state) {
  const auto l = static_cast<std::size_t>(state.range(0));
  const ComplexMatrix y = random_block(4, l, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scm(y, l));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(l));
}
BENCHMARK(BM_Scm)->Arg(980)->Arg(4900);

void BM_HermitianEig4x4(benchmark::State& state) {
  const ComplexMatrix y = random_block(4, 980, 2);
  const ComplexMatrix r = scm(y, 980);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hermitian_eig(r));
  }
}
BENCHMARK(BM_HermitianEig4x4);

void BM_SenseFeatures(benchmark::State& state) {
  const ComplexMatrix y_t = random_block(4, 980, 3);
  const ComplexMatrix y_t1 = random_block(4, 980, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sense_features(y_t, y_t1, 980));
  }
}
BENCHMARK(BM_SenseFeatures);

void BM_GeneratePair(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.channel.kind =
      state.range(0) == 0 ? ChannelKind::FlatRayleigh : ChannelKind::TdlA;
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_pair(cfg, 2, rng));
  }
}
BENCHMARK(BM_GeneratePair)->Arg(0)->Arg(1)->ArgNames({"tdl"});

void BM_ClassifierForward(benchmark::State& state) {
  const TwoStreamMlp model(ClassifierVariant::Full, 4, 4, 6);
  const auto batch = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  RealMatrix inputs(batch, model.input_width());
  for (auto& v : inputs.data) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.logits(inputs));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_ClassifierForward)->Arg(1)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
