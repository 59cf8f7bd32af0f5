#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "emix/env/spurious_capture.hpp"
#include "emix/learner/learner.hpp"
#include "emix/runtime.hpp"
#include "emix/surprise/surprise.hpp"
#include "emix/verify/checks.hpp"

using namespace emix;

namespace {

const bool kAllocatorTuned = [] {
  tune_allocator();
  return true;
}();

void BM_EnergyLse(benchmark::State& state) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  Matrix v(static_cast<Eigen::Index>(state.range(0)), 3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(surprise::energy_lse(v));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnergyLse)->Arg(64)->Arg(1600);

void BM_EnvStep(benchmark::State& state) {
  env::EnvConfig cfg;
  cfg.p_storm = 0.05;
  env::SpuriousCapture e(cfg);
  Rng rng(2);
  std::uniform_int_distribution<int> a(0, cfg.n_actions() - 1);
  std::vector<int> joint(cfg.n_agents);
  std::uint64_t seed = 0;
  e.reset(seed);
  for (auto _ : state) {
    if (e.done()) e.reset(++seed);
    for (auto& x : joint) x = a(rng);
    benchmark::DoNotOptimize(e.step(joint));
  }
}
BENCHMARK(BM_EnvStep);

void BM_TrainStep(benchmark::State& state) {
  env::EnvConfig env_cfg;
  const learn::EnvDims dims{env_cfg.n_agents, env_cfg.n_actions(), env_cfg.obs_dim(), env_cfg.state_dim()};
  learn::LearnerConfig cfg;
  cfg.algo = static_cast<learn::Algo>(state.range(0));
  learn::Learner learner(cfg, dims, 3);
  Rng rng(4);
  const auto batch = verify::random_batch(dims, cfg.batch_size, env_cfg.episode_limit, rng);
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step(batch));
  state.SetLabel(std::string(learn::to_string(cfg.algo)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(learn::Algo::kQmix))
    ->Arg(static_cast<int>(learn::Algo::kTwinQmix))
    ->Arg(static_cast<int>(learn::Algo::kEmix))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
