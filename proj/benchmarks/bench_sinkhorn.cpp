#include <benchmark/benchmark.h>

#include <random>

#include "softtopk/backward.hpp"
#include "softtopk/soft_topk.hpp"

namespace {

using namespace softtopk;

Vector gaussian_scores(Index n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

EotConfig fixed_budget(double eps, int iters) {
  EotConfig cfg;
  cfg.epsilon = eps;
  cfg.max_iter = iters;
  return cfg;
}

void BM_TopkForward(benchmark::State& state) {
  const Index n = state.range(0);
  const ScoreVector x(gaussian_scores(n));
  const EotConfig cfg = fixed_budget(1e-2, 100);
  for (auto _ : state) {
    benchmark::DoNotOptimize(soft_topk(x, 5, cfg).a);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_TopkForward)->Range(1 << 10, 1 << 17)->Complexity();

void BM_TopkForwardBackward(benchmark::State& state) {
  const Index n = state.range(0);
  const ScoreVector x(gaussian_scores(n));
  const EotConfig cfg = fixed_budget(1e-2, 100);
  const Vector probe = Vector::Ones(n) / static_cast<double>(n);
  for (auto _ : state) {
    const TopkOutput out = soft_topk(x, 5, cfg);
    benchmark::DoNotOptimize(vjp_soft_topk(probe, out, cfg).grad_x);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_TopkForwardBackward)->Range(1 << 10, 1 << 17)->Complexity();

void BM_BackwardOnly(benchmark::State& state) {
  const Index n = state.range(0);
  const ScoreVector x(gaussian_scores(n));
  const EotConfig cfg = fixed_budget(1e-2, 100);
  const TopkOutput out = soft_topk(x, 5, cfg);
  const Vector probe = Vector::Ones(n) / static_cast<double>(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vjp_soft_topk(probe, out, cfg).grad_x);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_BackwardOnly)->Range(1 << 10, 1 << 17)->Complexity();

void BM_SortedForward(benchmark::State& state) {
  const Index n = state.range(0);
  const ScoreVector x(gaussian_scores(n));
  const EotConfig cfg = fixed_budget(1e-2, 100);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sorted_soft_topk(x, 8, cfg).a);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_SortedForward)->Range(1 << 10, 1 << 15)->Complexity();

}  // namespace

BENCHMARK_MAIN();
