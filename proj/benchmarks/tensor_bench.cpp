#include <benchmark/benchmark.h>

#include <random>

#include "anchorparse/tensor.hpp"

namespace anchorparse {
namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool grad) {
  std::normal_distribution<double> normal;
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return Tensor::from_values({rows, cols}, std::move(v), grad);
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = random_matrix(n, n, rng, false), b = random_matrix(n, n, rng, false);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  Tensor a = random_matrix(n, n, rng, true), b = random_matrix(n, n, rng, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    backward(sum(matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_SoftmaxCrossEntropy(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  Tensor logits = random_matrix(rows, 512, rng, true);
  std::vector<int> targets(rows);
  for (std::size_t i = 0; i < rows; ++i) targets[i] = static_cast<int>(i % 512);
  const Mask ignore(rows, 0);
  for (auto _ : state) {
    logits.zero_grad();
    backward(cross_entropy_from_logits(logits, targets, ignore));
  }
}
BENCHMARK(BM_SoftmaxCrossEntropy)->Arg(64)->Arg(512);

}  // namespace
}  // namespace anchorparse
