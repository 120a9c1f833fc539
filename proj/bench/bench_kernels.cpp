// Serial reference vs OpenMP paths of the data-parallel kernels.

#include <benchmark/benchmark.h>

#include "micpdag/formulation.hpp"
#include "micpdag/kernels.hpp"
#include "micpdag/model.hpp"
#include "micpdag/relaxation.hpp"

using namespace micpdag;

namespace {

kernels::Exec exec_of(const benchmark::State& st) {
  return st.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

Dataset dataset(std::size_t m, std::size_t n) {
  const Dag d = random_dag(m, m, 7);
  const SemParameters sem = random_sem(d, {-0.8, -0.6, 0.6, 0.8}, ValueSet{{0.5, 1.0, 1.5}}, 7);
  return generate_data(sem, n, GaussianNoise{}, 7);
}

void BM_SampleCovariance(benchmark::State& st) {
  const Dataset data = dataset(static_cast<std::size_t>(st.range(1)), 4000);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::sample_covariance(data, exec_of(st)));
}
BENCHMARK(BM_SampleCovariance)->ArgsProduct({{0, 1}, {20, 60}})->ArgNames({"parallel", "m"});

void BM_ScoreDags(benchmark::State& st) {
  const std::size_t m = 12;
  const SymmetricMatrix s = sample_covariance(dataset(m, 500));
  std::vector<Dag> dags;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) dags.push_back(random_dag(m, 2 * m, seed));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::score_dags(s, dags, 0.05, exec_of(st)));
}
BENCHMARK(BM_ScoreDags)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_NodeRelaxation(benchmark::State& st) {
  const std::size_t m = static_cast<std::size_t>(st.range(1));
  const SymmetricMatrix s = sample_covariance(dataset(m, 500));
  const MicpProblem p = build_problem(s, EdgeSet::complete(m), 0.05);
  CutPool cuts(m);
  for (std::size_t k = 0; k < m; ++k)
    for (double a : {0.5, 1.0, 2.0}) cuts.add(oa_cut_at(k, a, kDiagonalFloor));
  const BnbNode root = root_node(p);
  RelaxOptions opt;
  opt.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(solve_node_relaxation(p, root, cuts, opt));
}
BENCHMARK(BM_NodeRelaxation)->ArgsProduct({{0, 1}, {20, 40}})->ArgNames({"parallel", "m"});

}  // namespace

BENCHMARK_MAIN();
