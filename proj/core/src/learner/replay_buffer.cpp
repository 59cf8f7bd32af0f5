#include "emix/learner/replay_buffer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "emix/errors.hpp"

namespace emix::learn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::insert(Episode episode) {
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (n == 0 || n > episodes_.size()) {
    throw UsageError("cannot sample " + std::to_string(n) + " episodes from a buffer holding " +
                     std::to_string(episodes_.size()));
  }
  std::vector<std::size_t> all(episodes_.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(n);
  return all;
}

EpisodeBatch ReplayBuffer::sample(std::size_t n, Rng& rng, int n_actions) const {
  const auto idx = sample_indices(n, rng);
  std::vector<const Episode*> picked;
  picked.reserve(n);
  for (std::size_t i : idx) picked.push_back(&episodes_[i]);
  return make_batch(picked, n_actions);
}

}  // namespace emix::learn
