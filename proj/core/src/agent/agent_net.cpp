#include "emix/agent/agent_net.hpp"

#include <string>

#include "emix/errors.hpp"

namespace emix::agent {

AgentNet::AgentNet(nn::ParamSet& params, AgentNetConfig cfg)
    : cfg_(cfg),
      mlp_(params, "agent",
           {cfg.obs_dim + cfg.n_actions + cfg.n_agents, cfg.hidden, cfg.hidden, cfg.n_actions},
           nn::Activation::kRelu, nn::Activation::kIdentity) {
  if (cfg.obs_dim <= 0 || cfg.n_actions <= 0 || cfg.n_agents <= 0 || cfg.hidden <= 0) {
    throw ConfigError("agent net: dimensions must be positive");
  }
}

Matrix AgentNet::build_inputs(const Matrix& observations, std::span<const int> last_actions,
                              std::span<const int> agent_ids) const {
  const Index rows = observations.rows();
  if (observations.cols() != cfg_.obs_dim) {
    throw DimensionError("agent input: observation block has width " + std::to_string(observations.cols()) +
                         ", expected " + std::to_string(cfg_.obs_dim));
  }
  if (static_cast<Index>(last_actions.size()) != rows) {
    throw DimensionError("agent input: last-action block has " + std::to_string(last_actions.size()) +
                         " rows, expected " + std::to_string(rows));
  }
  if (static_cast<Index>(agent_ids.size()) != rows) {
    throw DimensionError("agent input: agent-id block has " + std::to_string(agent_ids.size()) +
                         " rows, expected " + std::to_string(rows));
  }
  Matrix x = Matrix::Zero(rows, input_dim());
  x.leftCols(cfg_.obs_dim) = observations;
  for (Index i = 0; i < rows; ++i) {
    const int u = last_actions[static_cast<std::size_t>(i)];
    if (u >= cfg_.n_actions || u < -1) {
      throw DimensionError("agent input: last-action block holds out-of-range action " + std::to_string(u));
    }
    if (u >= 0) x(i, cfg_.obs_dim + u) = 1.0;
    const int id = agent_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= cfg_.n_agents) {
      throw DimensionError("agent input: agent-id block holds out-of-range id " + std::to_string(id));
    }
    x(i, cfg_.obs_dim + cfg_.n_actions + id) = 1.0;
  }
  return x;
}

Matrix AgentNet::forward(const nn::ParamSet& params, const Matrix& inputs, nn::MlpTape* tape) const {
  if (inputs.cols() != input_dim()) {
    throw DimensionError("agent net: input width " + std::to_string(inputs.cols()) + ", expected " +
                         std::to_string(input_dim()));
  }
  return mlp_.forward(params, inputs, tape);
}

Matrix AgentNet::backward(nn::ParamSet& params, const Matrix& grad_q, const nn::MlpTape& tape) const {
  return mlp_.backward(params, grad_q, tape);
}

AvailMask all_available(int n_agents, int n_actions) {
  return AvailMask(static_cast<std::size_t>(n_agents), std::vector<bool>(static_cast<std::size_t>(n_actions), true));
}

int greedy_action(const Eigen::Ref<const RowVector>& q, const std::vector<bool>& avail) {
  int best = -1;
  for (Index u = 0; u < q.size(); ++u) {
    if (!avail[static_cast<std::size_t>(u)]) continue;
    if (best < 0 || q[u] > q[best]) best = static_cast<int>(u);
  }
  if (best < 0) throw ConfigError("no available action");
  return best;
}

std::vector<int> select_actions(const Matrix& q, double epsilon, const AvailMask& avail, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in [0, 1]");
  if (static_cast<Index>(avail.size()) != q.rows()) {
    throw DimensionError("availability mask rows do not match Q rows");
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<int> actions(static_cast<std::size_t>(q.rows()));
  for (Index a = 0; a < q.rows(); ++a) {
    const auto& mask = avail[static_cast<std::size_t>(a)];
    if (static_cast<Index>(mask.size()) != q.cols()) {
      throw DimensionError("availability mask width does not match n_actions");
    }
    std::vector<int> allowed;
    for (Index u = 0; u < q.cols(); ++u) {
      if (mask[static_cast<std::size_t>(u)]) allowed.push_back(static_cast<int>(u));
    }
    if (allowed.empty()) throw ConfigError("agent " + std::to_string(a) + " has no available action");
    // Always draw the coin so the RNG stream does not depend on epsilon.
    const bool explore = coin(rng) < epsilon;
    if (explore) {
      std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
      actions[static_cast<std::size_t>(a)] = allowed[pick(rng)];
    } else {
      actions[static_cast<std::size_t>(a)] = greedy_action(q.row(a), mask);
    }
  }
  return actions;
}

double epsilon_at(std::uint64_t t, const EpsilonSchedule& s) {
  if (s.anneal_steps == 0 || t >= s.anneal_steps) return s.finish;
  const double frac = static_cast<double>(t) / static_cast<double>(s.anneal_steps);
  return s.start + frac * (s.finish - s.start);
}

}  // namespace emix::agent
