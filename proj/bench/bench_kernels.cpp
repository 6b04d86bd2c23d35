// Serial reference kernels against their OpenMP counterparts, plus a full
// GNN forward pass under both execution modes.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <algorithm>

#include "boxgnn/gnn.hpp"
#include "boxgnn/kernels.hpp"
#include "boxgnn/rng.hpp"
#include "boxgnn/synthetic.hpp"

using namespace boxgnn;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(r, c);
  for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return t;
}

kernels::Exec exec_of(const benchmark::State& s) {
  return s.range(1) ? kernels::Exec::Parallel : kernels::Exec::Serial;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor(n, n, 1);
  const Tensor b = random_tensor(n, n, 2);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b, false, false, exec));
  state.SetLabel(exec == kernels::Exec::Parallel ? "openmp" : "serial");
}
BENCHMARK(BM_Matmul)->ArgsProduct({{64, 256}, {0, 1}});

void BM_SegmentMax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor(n, 64, 3);
  Rng rng(4);
  std::vector<std::vector<std::size_t>> groups(n / 8);
  for (std::size_t i = 0; i < n; ++i) groups[rng.below(groups.size())].push_back(i);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::segment_max_rows(x, groups, exec));
  state.SetLabel(exec == kernels::Exec::Parallel ? "openmp" : "serial");
}
BENCHMARK(BM_SegmentMax)->ArgsProduct({{4096, 32768}, {0, 1}});

void BM_GnnForward(benchmark::State& state) {
  SyntheticSpec spec;
  spec.genes = static_cast<std::size_t>(state.range(0));
  spec.traits_per_gene = 3;
  const auto data = generate_synthetic(spec);
  ParameterSet params;
  Rng rng(5);
  const auto gnn = HeteroGnn::create(data.graph, 2, std::vector<DomainDims>(data.graph.num_domains(), {16, 64}),
                                     params, rng);
  const auto idx = gnn.index(data.graph);
  kernels::set_num_threads(state.range(1) ? std::max(2, omp_get_max_threads()) : 1);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(gnn.forward(params.bind(tape), idx));
  }
  kernels::set_num_threads(1);
  state.SetLabel(state.range(1) ? "openmp" : "serial");
}
BENCHMARK(BM_GnnForward)->ArgsProduct({{200, 1000}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
