#include "emix/learner/episode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emix/errors.hpp"

namespace emix::learn {

void EpisodeBatch::validate() const {
  const Index steps_n = steps();
  if (rewards.size() != steps_n || mask.size() != steps_n || terminated.size() != steps_n) {
    throw DimensionError("episode batch: per-step arrays do not match B x T");
  }
  if (states.rows() != static_cast<Index>(batch_size) * (max_t + 1)) {
    throw DimensionError("episode batch: state rows do not match B x (T+1)");
  }
  if (observations.rows() != states.rows() * n_agents) {
    throw DimensionError("episode batch: observation rows do not match B x (T+1) x N");
  }
  if (static_cast<Index>(actions.size()) != steps_n * n_agents) {
    throw DimensionError("episode batch: action count does not match B x T x N");
  }
  for (int b = 0; b < batch_size; ++b) {
    bool ended = false;
    for (int t = 0; t < max_t; ++t) {
      const double m = mask[step_index(b, t)];
      if (m != 0.0 && m != 1.0) throw ConfigError("episode batch: mask must be 0/1");
      if (ended && m == 1.0) throw ConfigError("episode batch: mask is not a prefix");
      if (m == 0.0) ended = true;
    }
  }
  if (!rewards.allFinite()) throw NumericError("episode batch: non-finite reward");
  for (int a : actions) {
    if (a < 0 || a >= n_actions) throw ConfigError("episode batch: action out of range");
  }
}

EpisodeBatch make_batch(std::span<const Episode* const> episodes, int n_actions) {
  if (episodes.empty()) throw UsageError("make_batch: no episodes");
  EpisodeBatch batch;
  batch.batch_size = static_cast<int>(episodes.size());
  batch.n_agents = episodes.front()->n_agents;
  batch.n_actions = n_actions;
  for (const Episode* e : episodes) batch.max_t = std::max(batch.max_t, e->length);
  const Index state_dim = episodes.front()->states.cols();
  const Index obs_dim = episodes.front()->observations.cols();
  const int n = batch.n_agents;
  const int tp1 = batch.max_t + 1;

  batch.states = Matrix::Zero(static_cast<Index>(batch.batch_size) * tp1, state_dim);
  batch.observations = Matrix::Zero(static_cast<Index>(batch.batch_size) * tp1 * n, obs_dim);
  batch.actions.assign(static_cast<std::size_t>(batch.steps() * n), 0);
  batch.rewards = Vector::Zero(batch.steps());
  batch.mask = Vector::Zero(batch.steps());
  batch.terminated = Vector::Zero(batch.steps());

  for (int b = 0; b < batch.batch_size; ++b) {
    const Episode& e = *episodes[static_cast<std::size_t>(b)];
    if (e.n_agents != n || e.states.cols() != state_dim || e.observations.cols() != obs_dim) {
      throw DimensionError("make_batch: episodes have inconsistent shapes");
    }
    batch.states.middleRows(batch.state_row(b, 0), e.length + 1) = e.states;
    batch.observations.middleRows(batch.obs_row(b, 0, 0), static_cast<Index>(e.length + 1) * n) =
        e.observations;
    for (int t = 0; t < e.length; ++t) {
      const Index k = batch.step_index(b, t);
      batch.rewards[k] = e.rewards[static_cast<std::size_t>(t)];
      batch.mask[k] = 1.0;
      batch.terminated[k] = e.terminated[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
      for (int a = 0; a < n; ++a) {
        batch.actions[static_cast<std::size_t>(k * n + a)] =
            e.actions[static_cast<std::size_t>(t * n + a)];
      }
    }
  }
  return batch;
}

}  // namespace emix::learn
