// Microbenchmarks for the hot paths: pair scoring, template fusion, and the
// uncertainty head forward pass. Run ./pfe_bench --benchmark_min_time=1 for
// steadier numbers.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/fusion.hpp"
#include "pfe/rng.hpp"
#include "pfe/uncertainty_head.hpp"

namespace {

pfe::GaussianEmbedding RandomEmbedding(pfe::Rng& rng, std::size_t dim) {
  pfe::GaussianEmbedding e;
  e.mu.resize(dim);
  e.sigma_sq.resize(dim);
  for (std::size_t l = 0; l < dim; ++l) {
    e.mu[l] = rng.normal();
    e.sigma_sq[l] = rng.uniform(0.25, 4.0);
  }
  return e;
}

void BM_MlsScore(benchmark::State& state) {
  pfe::Rng rng(1);
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  const pfe::GaussianEmbedding a = RandomEmbedding(rng, dim);
  const pfe::GaussianEmbedding b = RandomEmbedding(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(pfe::mls_score(a, b).value);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MlsScore)->Arg(16)->Arg(512);

void BM_CosineScore(benchmark::State& state) {
  pfe::Rng rng(2);
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  const pfe::GaussianEmbedding a = RandomEmbedding(rng, dim);
  const pfe::GaussianEmbedding b = RandomEmbedding(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(pfe::cosine_score(a, b).value);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CosineScore)->Arg(16)->Arg(512);

void BM_FuseBatch(benchmark::State& state) {
  pfe::Rng rng(3);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<pfe::GaussianEmbedding> members;
  for (std::size_t i = 0; i < n; ++i) members.push_back(RandomEmbedding(rng, 16));
  for (auto _ : state) {
    pfe::GaussianEmbedding fused = pfe::fuse_batch(members);
    benchmark::DoNotOptimize(fused.mu.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FuseBatch)->Arg(2)->Arg(10)->Arg(100);

void BM_HeadForward(benchmark::State& state) {
  pfe::Rng rng(4);
  const std::size_t count = static_cast<std::size_t>(state.range(0));
  pfe::HeadConfig config;
  config.input_dim = 20;
  config.hidden_dim = 20;
  config.output_dim = 16;
  const pfe::UncertaintyHead head = pfe::UncertaintyHead::random_init(config, rng);
  std::vector<double> inputs(count * config.input_dim);
  for (double& x : inputs) x = rng.normal();
  for (auto _ : state) {
    std::vector<double> variances = head.forward_inference(inputs, count);
    benchmark::DoNotOptimize(variances.data());
  }
  state.SetItemsProcessed(state.iterations() * count);
}
BENCHMARK(BM_HeadForward)->Arg(1)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
