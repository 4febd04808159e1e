// Serial reference vs OpenMP kernels, plus the sampled forward passes that
// dominate fine-tuning and SFNN evaluation.
#include <benchmark/benchmark.h>

#include "sfnn/kernels.hpp"
#include "sfnn/network.hpp"
#include "sfnn/rng.hpp"

using namespace sfnn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double density = 1.0) {
  RngStream rng(seed);
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform() < density ? rng.uniform(-1.0, 1.0) : 0.0;
  return m;
}

template <Matrix (*F)(const Matrix&, const Matrix&)>
void BM_MatmulNt(benchmark::State& state) {
  // Shapes of the layer products: batch x fan_in times (width x fan_in)^T.
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto inner = static_cast<std::size_t>(state.range(1));
  const auto cols = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(rows, inner, 1);
  const Matrix b = random_matrix(cols, inner, 2);
  for (auto _ : state) benchmark::DoNotOptimize(F(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * inner * cols));
}

template <Matrix (*F)(const Matrix&, const Matrix&)>
void BM_MatmulTn(benchmark::State& state) {
  // Weight gradient shape: delta^T * activations.
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(rows, n, 3);
  const Matrix b = random_matrix(rows, m, 4);
  for (auto _ : state) benchmark::DoNotOptimize(F(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * n * m));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 784, 200})->Args({128, 200, 200})->Args({2560, 200, 200})->Unit(benchmark::kMicrosecond);
}

NetworkSpec mnist_simplified() {
  NetworkSpec s;
  s.input_dim = 784;
  s.layers = {{StochasticBinary{ClippedScaled{0.02, ActivationKind::ReLU, false}}, 200},
              {Squash{50.0, SquashKind::Sigmoid, ActivationKind::ReLU, false}, 200}};
  s.output = SoftmaxHead{10};
  return s;
}

void BM_SimplifiedMcForward(benchmark::State& state) {
  const NetworkSpec spec = mnist_simplified();
  const Params p = init_params(spec, RngStream(5));
  const Matrix x = random_matrix(128, 784, 6);
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(forward_simplified_mc(spec, p, x, m, RngStream(7)));
}

void BM_DnnStarForward(benchmark::State& state) {
  const NetworkSpec spec = mnist_simplified();
  const Params p = init_params(spec, RngStream(5));
  const Matrix x = random_matrix(128, 784, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward_dnn_star(spec, p, x));
}

}  // namespace

BENCHMARK_TEMPLATE(BM_MatmulNt, kernels::serial::matmul_nt)->Apply(shapes);
BENCHMARK_TEMPLATE(BM_MatmulNt, kernels::parallel::matmul_nt)->Apply(shapes);
BENCHMARK_TEMPLATE(BM_MatmulTn, kernels::serial::matmul_tn)->Apply(shapes);
BENCHMARK_TEMPLATE(BM_MatmulTn, kernels::parallel::matmul_tn)->Apply(shapes);
BENCHMARK(BM_SimplifiedMcForward)->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DnnStarForward)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
