#include <benchmark/benchmark.h>

#include "ideotrace/evaluation.hpp"
#include "ideotrace/model.hpp"
#include "ideotrace/optimizer.hpp"
#include "ideotrace/rng.hpp"
#include "ideotrace/stats.hpp"
#include "ideotrace/synthgen.hpp"

using namespace ideotrace;

namespace {

SynthTruth& fixture() {
  static SynthTruth truth = [] {
    SynthConfig cfg;
    cfg.n_websites = 50;
    cfg.n_users = 200;
    cfg.latent_dim = 2;
    cfg.n_steps = 4;
    cfg.separation = 4.0;
    cfg.min_shares_per_bin = 4;
    cfg.seed = 17;
    return generate(cfg);
  }();
  return truth;
}

Hyperparameters bench_hp() {
  Hyperparameters hp;
  hp.latent_dim = 2;
  hp.beta = 2.0;
  hp.gamma = 0.05;
  hp.lambda = 0.05;
  hp.tau = 0.05;
  return hp;
}

}  // namespace

static void BM_Loss(benchmark::State& state) {
  auto& truth = fixture();
  auto hp = bench_hp();
  auto model = init_state(50, 200, 2, 4, 1);
  for (auto _ : state) {
    auto breakdown = loss(model, truth.observations, truth.graph, hp);
    benchmark::DoNotOptimize(breakdown.total);
  }
}
BENCHMARK(BM_Loss);

static void BM_Gradients(benchmark::State& state) {
  auto& truth = fixture();
  auto hp = bench_hp();
  auto model = init_state(50, 200, 2, 4, 1);
  for (auto _ : state) {
    auto g = gradients(model, truth.observations, truth.graph, hp);
    benchmark::DoNotOptimize(g.W);
  }
}
BENCHMARK(BM_Gradients);

static void BM_TrainEpochs(benchmark::State& state) {
  auto& truth = fixture();
  auto hp = bench_hp();
  AdamConfig adam;
  adam.learning_rate = 0.05;
  adam.max_epochs = static_cast<int>(state.range(0));
  adam.tolerance = 0;  // run the full budget
  adam.seed = 1;
  for (auto _ : state) {
    auto report = train(truth.observations, truth.graph, hp, adam);
    benchmark::DoNotOptimize(report.loss_trace.back());
  }
}
BENCHMARK(BM_TrainEpochs)->Arg(10)->Arg(50);

static void BM_KMeans2(benchmark::State& state) {
  auto& truth = fixture();
  for (auto _ : state) {
    auto result = kmeans2(truth.planted.C[0], 7);
    benchmark::DoNotOptimize(result.objective);
  }
}
BENCHMARK(BM_KMeans2);

static void BM_PcaProject(benchmark::State& state) {
  auto& truth = fixture();
  for (auto _ : state) {
    auto pca = pca_project(truth.planted.W);
    benchmark::DoNotOptimize(pca.eigenvalue);
  }
}
BENCHMARK(BM_PcaProject);

static void BM_Spearman(benchmark::State& state) {
  std::vector<double> x(state.range(0)), y(state.range(0));
  Rng rng(3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = rng.uniform_int(7);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(spearman(x, y));
  }
}
BENCHMARK(BM_Spearman)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
