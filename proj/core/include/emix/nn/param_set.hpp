#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emix/nn/types.hpp"

namespace emix::nn {

/// One named parameter array plus its gradient slot. 1-D arrays of length n
/// are stored as 1 x n matrices; `shape` keeps the declared rank.
struct ParamEntry {
  std::string name;
  std::vector<Index> shape;
  Matrix value;
  Matrix grad;

  Index size() const { return value.size(); }
};

/// Ordered, uniquely named collection of parameter arrays for one or more
/// networks. Layers refer to entries by index so a ParamSet can be copied
/// (target networks) and evaluated through the same layer objects.
class ParamSet {
 public:
  ParamSet() = default;

  /// Registers a zero-initialised entry. Throws ConfigError on a duplicate
  /// name or a non-positive dimension.
  std::size_t add(std::string name, std::vector<Index> shape);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Index of the entry called `name`; throws std::out_of_range if absent.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grads();

  /// Total number of scalars across all entries.
  Index scalar_count() const;

  /// Copies values (not grads, not step_count) from `other`. Shapes and names
  /// must match exactly.
  void copy_values_from(const ParamSet& other);

  /// True when names, shapes and values are bitwise identical.
  bool same_values(const ParamSet& other) const;

  /// Squared L2 norm of all gradients.
  double grad_norm_squared() const;

  std::uint64_t step_count = 0;

 private:
  std::vector<ParamEntry> entries_;
};

/// Flat view over the scalars of a ParamSet, entry by entry in row-major
/// order. Used by finite-difference checks and tests.
struct FlatCoord {
  std::size_t entry;
  Index offset;
};

FlatCoord flat_coord(const ParamSet& params, Index flat_index);

}  // namespace emix::nn
