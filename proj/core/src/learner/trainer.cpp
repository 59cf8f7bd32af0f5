#include "emix/learner/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "emix/agent/agent_net.hpp"
#include "emix/errors.hpp"
#include "emix/learner/metrics_io.hpp"
#include "emix/learner/replay_buffer.hpp"
#include "emix/nn/checkpoint.hpp"

namespace emix::learn {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

EnvDims dims_of(const env::EnvConfig& cfg) {
  return {cfg.n_agents, cfg.n_actions(), cfg.obs_dim(), cfg.state_dim()};
}

struct IntervalStats {
  double loss = 0.0;
  double abs_td = 0.0;
  double e_mean = 0.0;
  double e_abs = 0.0;
  std::uint64_t updates = 0;

  void add(const LossOutput& o) {
    loss += o.loss;
    abs_td += o.abs_td_error;
    e_mean += o.e_mean;
    e_abs += o.e_abs_mean;
    ++updates;
  }
  double mean(double v) const { return updates ? v / static_cast<double>(updates) : std::nan(""); }
};

}  // namespace

void TrainConfig::validate() const {
  env.validate();
  resolve(learner);
  if (total_steps == 0) throw ConfigError("total_steps must be positive");
  if (eval_interval == 0) throw ConfigError("eval_interval must be positive");
  if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (trace_episodes < 0) throw ConfigError("trace_episodes must be >= 0");
}

Episode rollout(env::SpuriousCapture& environment, std::uint64_t seed, const Policy& policy) {
  const auto& cfg = environment.config();
  const int n = cfg.n_agents;
  auto start = environment.reset(seed);
  std::vector<Vector> states{start.state};
  std::vector<Matrix> obs{start.observations};
  Episode ep;
  ep.n_agents = n;
  std::vector<int> last(static_cast<std::size_t>(n), -1);
  while (!environment.done()) {
    const std::vector<int> u = policy(obs.back(), last);
    const env::StepResult r = environment.step(u);
    ep.actions.insert(ep.actions.end(), u.begin(), u.end());
    ep.rewards.push_back(r.reward);
    ep.terminated.push_back(r.terminated);
    ep.episode_return += r.reward;
    states.push_back(r.state);
    obs.push_back(r.observations);
    last = u;
  }
  ep.length = static_cast<int>(ep.rewards.size());
  ep.success = env::is_success(environment);
  ep.states.resize(ep.length + 1, cfg.state_dim());
  ep.observations.resize(static_cast<Index>(ep.length + 1) * n, cfg.obs_dim());
  for (int t = 0; t <= ep.length; ++t) {
    ep.states.row(t) = states[static_cast<std::size_t>(t)].transpose();
    ep.observations.middleRows(static_cast<Index>(t) * n, n) = obs[static_cast<std::size_t>(t)];
  }
  return ep;
}

EvalResult evaluate_greedy(const Learner& learner, const env::EnvConfig& env_cfg, int episodes, std::uint64_t seed,
                           std::vector<Episode>* keep) {
  env::SpuriousCapture environment(env_cfg);
  Rng seeds(seed);
  Rng unused(0);
  const auto avail = agent::all_available(env_cfg.n_agents, env_cfg.n_actions());
  const Policy greedy = [&](const Matrix& obs, std::span<const int> last) {
    return agent::select_actions(learner.act_q(obs, last), 0.0, avail, unused);
  };
  EvalResult res;
  res.episodes = episodes;
  for (int i = 0; i < episodes; ++i) {
    Episode ep = rollout(environment, seeds(), greedy);
    res.success_rate += ep.success ? 1.0 : 0.0;
    res.mean_return += ep.episode_return;
    res.mean_length += ep.length;
    if (keep != nullptr) keep->push_back(std::move(ep));
  }
  res.success_rate /= episodes;
  res.mean_return /= episodes;
  res.mean_length /= episodes;
  return res;
}

EvalResult evaluate_random(const env::EnvConfig& env_cfg, int episodes, std::uint64_t seed) {
  env::SpuriousCapture environment(env_cfg);
  Rng seeds(seed);
  Rng action_rng(mix_seed(seed, 7));
  std::uniform_int_distribution<int> pick(0, env_cfg.n_actions() - 1);
  const Policy random = [&](const Matrix&, std::span<const int>) {
    std::vector<int> u(static_cast<std::size_t>(env_cfg.n_agents));
    for (auto& a : u) a = pick(action_rng);
    return u;
  };
  EvalResult res;
  res.episodes = episodes;
  for (int i = 0; i < episodes; ++i) {
    const Episode ep = rollout(environment, seeds(), random);
    res.success_rate += ep.success ? 1.0 : 0.0;
    res.mean_return += ep.episode_return;
    res.mean_length += ep.length;
  }
  res.success_rate /= episodes;
  res.mean_return /= episodes;
  res.mean_length /= episodes;
  return res;
}

RunResult train_run(const TrainConfig& cfg, std::uint64_t seed, const std::optional<std::filesystem::path>& run_dir) {
  cfg.validate();
  RunResult result;
  std::ofstream metrics_out;
  std::ofstream trace_out;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    metrics_out.open(*run_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_out) throw FileError("cannot write " + (*run_dir / "metrics.jsonl").string());
    if (cfg.trace_episodes > 0) trace_out.open(*run_dir / "trace.jsonl", std::ios::trunc);
  }

  Learner learner(cfg.learner, dims_of(cfg.env), mix_seed(seed, 1));
  env::SpuriousCapture environment(cfg.env);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.learner.buffer_capacity));
  Rng episode_seeds(mix_seed(seed, 2));
  Rng action_rng(mix_seed(seed, 3));
  Rng replay_rng(mix_seed(seed, 4));
  Rng eval_seeds(mix_seed(seed, 5));
  const auto avail = agent::all_available(cfg.env.n_agents, cfg.env.n_actions());

  std::uint64_t t_env = 0;
  std::uint64_t episodes = 0;
  std::uint64_t since_train = 0;
  std::uint64_t next_eval = 0;
  std::uint64_t next_checkpoint = cfg.checkpoint_interval;
  IntervalStats stats;

  auto emit = [&](std::uint64_t step) {
    const EvalResult ev = evaluate_greedy(learner, cfg.env, cfg.eval_episodes, eval_seeds());
    MetricsRecord r;
    r.step = step;
    r.success_rate = ev.success_rate;
    r.mean_return = ev.mean_return;
    r.abs_td_error = stats.mean(stats.abs_td);
    r.energy_ratio_mean = stats.mean(stats.e_mean);
    r.energy_ratio_abs_mean = stats.mean(stats.e_abs);
    r.loss = stats.mean(stats.loss);
    r.epsilon = agent::epsilon_at(t_env, cfg.learner.epsilon);
    r.updates = stats.updates;
    r.episodes = episodes;
    result.records.push_back(r);
    if (metrics_out.is_open()) metrics_out << to_json(r).dump() << '\n' << std::flush;
    stats = IntervalStats{};
  };

  try {
    learner.sync_all(0);
    emit(0);
    next_eval = cfg.eval_interval;
    const Policy behaviour = [&](const Matrix& obs, std::span<const int> last) {
      const double eps = agent::epsilon_at(t_env, cfg.learner.epsilon);
      auto u = agent::select_actions(learner.act_q(obs, last), eps, avail, action_rng);
      ++t_env;
      learner.sync_targets(t_env);
      return u;
    };
    while (t_env < cfg.total_steps) {
      Episode ep = rollout(environment, episode_seeds(), behaviour);
      if (trace_out.is_open() && episodes < static_cast<std::uint64_t>(cfg.trace_episodes)) {
        write_trace(trace_out, ep, episodes);
      }
      ++episodes;
      since_train += static_cast<std::uint64_t>(ep.length);
      buffer.insert(std::move(ep));

      if (cfg.learner.train_every > 0) {
        if (buffer.size() > static_cast<std::size_t>(cfg.learner.batch_size)) {
          while (since_train >= cfg.learner.train_every) {
            since_train -= cfg.learner.train_every;
            const EpisodeBatch batch =
                buffer.sample(static_cast<std::size_t>(cfg.learner.batch_size), replay_rng, cfg.env.n_actions());
            stats.add(learner.train_step(batch));
          }
        } else {
          since_train = 0;
        }
      }

      if (run_dir && cfg.checkpoint_interval > 0) {
        while (t_env >= next_checkpoint) {
          nn::save_checkpoint(*run_dir / ("checkpoint_" + std::to_string(next_checkpoint) + ".bin"), learner.online());
          next_checkpoint += cfg.checkpoint_interval;
        }
      }
      while (t_env >= next_eval && next_eval <= cfg.total_steps) {
        emit(next_eval);
        next_eval += cfg.eval_interval;
      }
    }
    if (run_dir) nn::save_checkpoint(*run_dir / "final.bin", learner.online());
  } catch (const std::exception& ex) {
    result.aborted = true;
    result.error = ex.what();
    if (metrics_out.is_open()) {
      nlohmann::json j{{"step", t_env}, {"aborted", true}, {"error", ex.what()}};
      metrics_out << j.dump() << '\n' << std::flush;
    }
  }
  result.final_params = learner.online();
  return result;
}

}  // namespace emix::learn
