#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "emix/learner/episode.hpp"

namespace emix::learn {

/// Circular episode buffer; the oldest episode is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void insert(Episode episode);

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Episode& at(std::size_t i) const { return episodes_.at(i); }

  /// Indices of `n` distinct episodes drawn uniformly (without replacement).
  /// Throws UsageError if fewer than n episodes are stored.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

  EpisodeBatch sample(std::size_t n, Rng& rng, int n_actions) const;

 private:
  std::size_t capacity_;
  std::deque<Episode> episodes_;
};

}  // namespace emix::learn
