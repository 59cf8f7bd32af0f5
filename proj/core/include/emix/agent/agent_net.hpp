#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emix/nn/dense.hpp"
#include "emix/nn/param_set.hpp"

namespace emix::agent {

struct AgentNetConfig {
  int obs_dim = 0;
  int n_actions = 0;
  int n_agents = 0;
  int hidden = 64;
};

/// Shared-parameter per-agent utility network. Input per agent is
/// [observation | one-hot last action | one-hot agent id]; output is one
/// Q-value per action. Parameters are registered under "agent.".
class AgentNet {
 public:
  AgentNet(nn::ParamSet& params, AgentNetConfig cfg);

  const AgentNetConfig& config() const { return cfg_; }
  int input_dim() const { return cfg_.obs_dim + cfg_.n_actions + cfg_.n_agents; }

  void init(nn::ParamSet& params, Rng& rng) const { mlp_.init(params, rng); }

  /// Assembles one input row per observation row. `last_actions[i]` is the
  /// previous action of row i (-1 for none); `agent_ids[i]` is its agent.
  /// Throws DimensionError naming the offending block.
  Matrix build_inputs(const Matrix& observations, std::span<const int> last_actions,
                      std::span<const int> agent_ids) const;

  /// rows x n_actions Q-values.
  Matrix forward(const nn::ParamSet& params, const Matrix& inputs, nn::MlpTape* tape) const;
  Matrix backward(nn::ParamSet& params, const Matrix& grad_q, const nn::MlpTape& tape) const;

 private:
  AgentNetConfig cfg_;
  nn::Mlp mlp_;
};

/// Per-agent availability mask: avail[a][u] == true if action u is allowed.
using AvailMask = std::vector<std::vector<bool>>;

AvailMask all_available(int n_agents, int n_actions);

/// epsilon-greedy per agent: with probability epsilon uniform over available
/// actions, otherwise the available argmax (ties -> lowest action id).
/// Throws ConfigError for an agent with no available action.
std::vector<int> select_actions(const Matrix& q, double epsilon, const AvailMask& avail, Rng& rng);

/// Greedy available argmax with lowest-index tie-break.
int greedy_action(const Eigen::Ref<const RowVector>& q, const std::vector<bool>& avail);

struct EpsilonSchedule {
  double start = 1.0;
  double finish = 0.05;
  std::uint64_t anneal_steps = 50'000;
};

/// Linear anneal from start to finish over anneal_steps env steps, constant after.
double epsilon_at(std::uint64_t t, const EpsilonSchedule& schedule);

}  // namespace emix::agent
