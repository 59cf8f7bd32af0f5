#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "emix/nn/types.hpp"

namespace emix::env {

/// Discrete per-agent actions.
enum Action : int {
  kStay = 0,
  kUp = 1,
  kDown = 2,
  kLeft = 3,
  kRight = 4,
  kCapture = 5,
};
inline constexpr int kNumActions = 6;

struct EnvConfig {
  int grid_size = 7;
  int n_agents = 3;
  int n_prey = 2;
  int sight_radius = 2;
  int episode_limit = 50;
  double p_storm = 0.05;
  int storm_duration = 5;
  double storm_noise_scale = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// 2 + 3 * n_prey + 3 * (n_agents - 1) + 4
  int obs_dim() const { return 2 + 3 * n_prey + 3 * (n_agents - 1) + kDistractorDim; }
  /// 2 * (n_agents + n_prey) + n_prey + 3
  int state_dim() const { return 2 * (n_agents + n_prey) + n_prey + 3; }
  int n_actions() const { return kNumActions; }

  static constexpr int kDistractorDim = 4;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct StepInfo {
  int captures = 0;
  bool storm_active = false;
};

struct StepResult {
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  Matrix observations;  // n_agents x obs_dim
  Vector state;
  StepInfo info;
};

struct ResetResult {
  Vector state;
  Matrix observations;
};

/// Cooperative capture gridworld with random "storm" episodes.
///
/// Agents move on a grid_size x grid_size board. A prey is captured when at
/// least two agents that are 4-adjacent to it choose kCapture in the same
/// step (+10 each capture, -0.1 per step). While a storm is active, prey
/// teleport to random free cells and observation offsets plus a distractor
/// block receive Gaussian noise. See docs/environment.md.
class SpuriousCapture {
 public:
  explicit SpuriousCapture(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }

  ResetResult reset(std::uint64_t seed);

  /// Starts an episode from explicit positions (all prey alive, no storm).
  /// The rng is seeded with `seed` for prey moves. Throws ConfigError for
  /// wrong counts, out-of-bounds or overlapping cells.
  ResetResult place(const std::vector<Cell>& agents, const std::vector<Cell>& prey, std::uint64_t seed = 0);

  /// Throws std::out_of_range naming the agent for an invalid action id and
  /// UsageError when the episode is over or reset() was never called.
  StepResult step(std::span<const int> joint_action);

  Vector state() const;
  Matrix observations() const;

  int t() const { return t_; }
  bool done() const { return done_; }
  bool storm_active() const { return storm_remaining_ > 0; }
  int prey_alive_count() const;
  const std::vector<Cell>& agent_cells() const { return agents_; }
  const std::vector<Cell>& prey_cells() const { return prey_; }
  const std::vector<bool>& prey_alive() const { return alive_; }

 private:
  bool occupied(Cell c, int ignore_prey) const;
  bool in_bounds(Cell c) const;
  Cell random_free_cell(int ignore_prey);

  EnvConfig cfg_;
  Rng rng_;
  std::vector<Cell> agents_;
  std::vector<Cell> prey_;
  std::vector<bool> alive_;
  int storm_remaining_ = 0;
  int t_ = 0;
  bool done_ = true;
  bool started_ = false;
};

/// Rebuilds every agent's observation from a global state vector. Agrees
/// bit-for-bit with the observations emitted by reset()/step(), storm noise
/// included (noise is a deterministic function of cfg.seed and the state).
Matrix state_to_agent_views(const Vector& state, const EnvConfig& cfg);

/// Episode counts as a success iff every prey was captured before the limit.
bool is_success(const SpuriousCapture& env);

}  // namespace emix::env
