#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emix/env/spurious_capture.hpp"
#include "emix/learner/episode.hpp"
#include "emix/learner/learner.hpp"

namespace emix::learn {

struct TrainConfig {
  env::EnvConfig env;
  LearnerConfig learner;
  std::uint64_t total_steps = 200'000;
  std::uint64_t eval_interval = 5'000;
  int eval_episodes = 32;
  std::uint64_t checkpoint_interval = 0;  // 0: final checkpoint only
  int trace_episodes = 0;                 // training episodes dumped to trace.jsonl

  void validate() const;
};

/// One row of metrics.jsonl. Training statistics are means over the
/// gradient steps since the previous record (NaN when there were none).
struct MetricsRecord {
  std::uint64_t step = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double abs_td_error = 0.0;
  double energy_ratio_mean = 0.0;
  double energy_ratio_abs_mean = 0.0;
  double epsilon = 0.0;
  double loss = 0.0;
  std::uint64_t updates = 0;
  std::uint64_t episodes = 0;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  int episodes = 0;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  bool aborted = false;
  std::string error;
  nn::ParamSet final_params;
};

/// Chooses a joint action from (observations, last actions).
using Policy = std::function<std::vector<int>(const Matrix& observations, std::span<const int> last_actions)>;

/// Plays one episode from reset(seed) to termination or the limit.
Episode rollout(env::SpuriousCapture& environment, std::uint64_t seed, const Policy& policy);

/// Greedy (epsilon = 0) evaluation of the learner's online parameters.
EvalResult evaluate_greedy(const Learner& learner, const env::EnvConfig& env_cfg, int episodes, std::uint64_t seed,
                           std::vector<Episode>* keep = nullptr);

/// Uniformly random joint actions; the success floor for the learners.
EvalResult evaluate_random(const env::EnvConfig& env_cfg, int episodes, std::uint64_t seed);

/// Runs the full training loop: epsilon-greedy rollouts into a circular
/// episode buffer, one gradient step per train_every env steps once the
/// buffer holds more than batch_size episodes, target syncs on the env-step
/// schedule, and greedy evaluations every eval_interval steps (the first at
/// step 0). With `run_dir` set, writes metrics.jsonl, checkpoints and the
/// optional trace there. Exceptions from the components abort the run; the
/// abort is recorded in metrics.jsonl and reported in the result.
RunResult train_run(const TrainConfig& cfg, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& run_dir = std::nullopt);

}  // namespace emix::learn
