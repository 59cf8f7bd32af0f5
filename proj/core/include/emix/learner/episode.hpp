#pragma once

#include <span>
#include <vector>

#include "emix/nn/types.hpp"

namespace emix::learn {

/// One recorded episode of `length` steps. Row t of `states` is s_t for
/// t = 0..length; observation rows are laid out (t, agent).
struct Episode {
  int length = 0;
  int n_agents = 0;
  Matrix states;                // (length + 1) x state_dim
  Matrix observations;          // (length + 1) * n_agents x obs_dim
  std::vector<int> actions;     // length * n_agents
  std::vector<double> rewards;  // length
  std::vector<bool> terminated; // length
  double episode_return = 0.0;
  bool success = false;
};

/// Padded, masked batch of episodes. Time is padded to the longest episode
/// in the batch (max_t); padded steps carry zero state/observation rows and
/// mask 0.
struct EpisodeBatch {
  int batch_size = 0;
  int max_t = 0;
  int n_agents = 0;
  int n_actions = 0;
  Matrix states;             // B * (max_t + 1) x state_dim, row b*(max_t+1)+t
  Matrix observations;       // B * (max_t + 1) * N x obs_dim, row (b*(max_t+1)+t)*N+a
  std::vector<int> actions;  // B * max_t * N, row-major (b, t, a); 0 in padding
  Vector rewards;            // B * max_t
  Vector mask;               // B * max_t, 1 = valid
  Vector terminated;         // B * max_t

  Index state_row(int b, int t) const { return static_cast<Index>(b) * (max_t + 1) + t; }
  Index obs_row(int b, int t, int a) const { return state_row(b, t) * n_agents + a; }
  Index step_index(int b, int t) const { return static_cast<Index>(b) * max_t + t; }
  int action(int b, int t, int a) const {
    return actions[static_cast<std::size_t>(step_index(b, t) * n_agents + a)];
  }
  Index steps() const { return static_cast<Index>(batch_size) * max_t; }
  double valid_count() const { return mask.sum(); }

  /// Throws DimensionError / ConfigError if the layout or invariants
  /// (prefix mask, finite rewards, actions in range) are violated.
  void validate() const;
};

EpisodeBatch make_batch(std::span<const Episode* const> episodes, int n_actions);

}  // namespace emix::learn
