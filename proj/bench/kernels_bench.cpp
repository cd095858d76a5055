// Serial reference against the OpenMP kernel for each parallel hot spot.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "stoplab/evaluation.hpp"
#include "stoplab/expert.hpp"
#include "stoplab/knn.hpp"

using namespace stoplab;

namespace {

PointCloud random_cloud(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PointCloud c(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) c.row(i)[j] = z(rng);
  }
  return c;
}

void BM_KnnAverage(benchmark::State& st, bool parallel) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto cloud = random_cloud(n, 2, 1);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i % 7);
  for (auto _ : st) {
    auto out = parallel ? knn_average_parallel(cloud, v, 50) : knn_average_serial(cloud, v, 50);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_KnnIndices(benchmark::State& st, bool parallel) {
  const auto cloud = random_cloud(static_cast<std::size_t>(st.range(0)), 2, 2);
  for (auto _ : st) {
    auto out = parallel ? knn_indices_parallel(cloud, 12) : knn_indices_serial(cloud, 12);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_RegressionDP(benchmark::State& st, bool parallel) {
  const auto spec = EnvSpec::defaults(EnvKind::BmgG);
  std::vector<RawPath> paths;
  for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(st.range(0)); ++s) paths.push_back(simulate_bm_path(spec, s));
  const auto gains = expert_gains(spec, 0.99);
  for (auto _ : st) {
    auto r = backward_induction_regression(paths, gains, 50, parallel ? KernelMode::Parallel : KernelMode::Serial);
    benchmark::DoNotOptimize(r.labels.data());
  }
}

std::vector<EvalPath> eval_paths(std::size_t n) {
  const auto spec = EnvSpec::defaults(EnvKind::BmG);
  std::vector<EvalPath> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = simulate_bm_path(spec, i);
    EvalPath e;
    e.states.resize(2, p.length());
    for (int t = 0; t < p.length(); ++t) e.states.col(t) = Eigen::Vector2d(p.states[t].coords[0], p.states[t].coords[1]);
    e.n_labeled = p.length();
    out.push_back(std::move(e));
  }
  return out;
}

void BM_Evaluate(benchmark::State& st, bool parallel) {
  StopModel m;
  m.q_net = MultiHeadNet(NetConfig{2, {64, 64}, {2}}, 3);
  const auto paths = eval_paths(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    auto r = evaluate(m, paths, parallel ? EvalMode::Parallel : EvalMode::Serial);
    benchmark::DoNotOptimize(r.balanced_accuracy);
  }
}

void BM_ExportSurfaces(benchmark::State& st, bool parallel) {
  StopModel m;
  m.q_net = MultiHeadNet(NetConfig{2, {64, 64}, {2}}, 4);
  GridSpec g;
  g.nx = g.ny = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto s = export_surfaces(m, g, {0, 25}, parallel ? EvalMode::Parallel : EvalMode::Serial);
    benchmark::DoNotOptimize(s.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_KnnAverage, serial, false)->Arg(250)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_KnnAverage, parallel, true)->Arg(250)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_KnnIndices, serial, false)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_KnnIndices, parallel, true)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RegressionDP, serial, false)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RegressionDP, parallel, true)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Evaluate, serial, false)->Arg(75)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Evaluate, parallel, true)->Arg(75)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ExportSurfaces, serial, false)->Arg(81)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ExportSurfaces, parallel, true)->Arg(81)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
