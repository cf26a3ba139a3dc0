#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "xtbench/kernels.hpp"
#include "xtbench/rng.hpp"
#include "xtbench/tensor.hpp"

using namespace xtb;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : t.vec()) v = normal(rng);
  return t;
}

void bm_matmul_serial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    matmul_serial(a, b, c);
    benchmark::DoNotOptimize(c.vec().data());
  }
}

void bm_matmul_omp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    matmul_omp(a, b, c);
    benchmark::DoNotOptimize(c.vec().data());
  }
}

void bm_conv2d_serial(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({16, 8, side, side}, 3);
  const Tensor w = random_tensor({8, 8, 4, 4}, 4);
  const Tensor bias = random_tensor({8}, 5);
  const Conv2dAttrs attrs = Conv2dAttrs::same(4);
  Tensor y({16, 8, side, side});
  for (auto _ : state) {
    conv2d_serial(x, w, bias, attrs, y);
    benchmark::DoNotOptimize(y.vec().data());
  }
}

void bm_conv2d_omp(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({16, 8, side, side}, 3);
  const Tensor w = random_tensor({8, 8, 4, 4}, 4);
  const Tensor bias = random_tensor({8}, 5);
  const Conv2dAttrs attrs = Conv2dAttrs::same(4);
  Tensor y({16, 8, side, side});
  for (auto _ : state) {
    conv2d_omp(x, w, bias, attrs, y);
    benchmark::DoNotOptimize(y.vec().data());
  }
}

void bm_blur_serial(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::vector<double> in(static_cast<size_t>(side) * side), out(in.size());
  auto rng = make_rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : in) v = normal(rng);
  for (auto _ : state) {
    gaussian_blur_serial(in.data(), out.data(), side, 3.0);
    benchmark::DoNotOptimize(out.data());
  }
}

void bm_blur_omp(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::vector<double> in(static_cast<size_t>(side) * side), out(in.size());
  auto rng = make_rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : in) v = normal(rng);
  for (auto _ : state) {
    gaussian_blur_omp(in.data(), out.data(), side, 3.0);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul_serial)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul_omp)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_conv2d_serial)->Arg(8)->Arg(64);
BENCHMARK(bm_conv2d_omp)->Arg(8)->Arg(64);
BENCHMARK(bm_blur_serial)->Arg(64)->Arg(256);
BENCHMARK(bm_blur_omp)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
