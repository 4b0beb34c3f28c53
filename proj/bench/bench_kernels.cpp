// Serial reference kernels against their OpenMP counterparts, plus one full
// training step at the default benchmark sizes.
#include <benchmark/benchmark.h>

#include <random>

#include "unida/data.hpp"
#include "unida/kernels.hpp"
#include "unida/trainer.hpp"

namespace {

using namespace unida;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t({r, c});
  for (auto& v : t.data()) v = n(rng);
  return t;
}

template <auto Kernel>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Tensor a = random_matrix(m, k, 1), b = random_matrix(k, n, 2);
  Tensor c({m, n});
  for (auto _ : state) {
    Kernel(a.data(), b.data(), c.data(), kernels::MatDims{m, k, n});
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void BM_MatmulGradRhs(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Tensor a = random_matrix(m, k, 3), g = random_matrix(m, n, 4);
  Tensor db({k, n});
  for (auto _ : state) {
    Kernel(a.data(), g.data(), db.data(), kernels::MatDims{m, k, n});
    benchmark::DoNotOptimize(db.data().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 16, 64})->Args({64, 64, 32})->Args({1024, 64, 64})->Args({4096, 32, 64});
}

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Name("matmul/serial")->Apply(shapes);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Apply(shapes);
BENCHMARK(BM_MatmulGradRhs<kernels::serial::matmul_grad_rhs>)
    ->Name("matmul_grad_rhs/serial")
    ->Apply(shapes);
BENCHMARK(BM_MatmulGradRhs<kernels::parallel::matmul_grad_rhs>)
    ->Name("matmul_grad_rhs/parallel")
    ->Apply(shapes);

void BM_TrainStep(benchmark::State& state) {
  const auto spec = LabelSetSpec::dense(4, 2, 6);
  const auto [src, tgt] = gen_synthetic(spec, SyntheticOptions{}, 0);
  const auto source = source_samples(src, spec);
  TrainConfig cfg;
  cfg.total_steps = 1u << 30;
  const auto arch = make_architecture(cfg, src.dim(), spec.source_classes().size());
  Trainer trainer(ModelBundle::init(arch.feature, arch.label, arch.domain, 0), cfg);
  std::mt19937_64 rng(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.train_step(sample_batch(source, tgt.features, 64, rng)));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
