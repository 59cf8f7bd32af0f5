#include "emix/nn/param_set.hpp"

#include <cstring>
#include <stdexcept>

#include "emix/errors.hpp"

namespace emix::nn {

std::size_t ParamSet::add(std::string name, std::vector<Index> shape) {
  if (contains(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  if (shape.empty() || shape.size() > 2) {
    throw ConfigError("parameter '" + name + "' must have rank 1 or 2");
  }
  for (Index d : shape) {
    if (d <= 0) throw ConfigError("parameter '" + name + "' has a non-positive dimension");
  }
  const Index rows = shape.size() == 1 ? 1 : shape[0];
  const Index cols = shape.size() == 1 ? shape[0] : shape[1];
  ParamEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.value = Matrix::Zero(rows, cols);
  e.grad = Matrix::Zero(rows, cols);
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

void ParamSet::zero_grads() {
  for (auto& e : entries_) e.grad.setZero();
}

Index ParamSet::scalar_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.size();
  return n;
}

void ParamSet::copy_values_from(const ParamSet& other) {
  if (other.entries_.size() != entries_.size()) {
    throw DimensionError("copy_values_from: entry count mismatch");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].shape != other.entries_[i].shape) {
      throw DimensionError("copy_values_from: entry '" + entries_[i].name + "' does not match");
    }
    entries_[i].value = other.entries_[i].value;
  }
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (other.entries_.size() != entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.shape != b.shape) return false;
    if (std::memcmp(a.value.data(), b.value.data(),
                    static_cast<std::size_t>(a.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

double ParamSet::grad_norm_squared() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.grad.squaredNorm();
  return s;
}

FlatCoord flat_coord(const ParamSet& params, Index flat_index) {
  if (flat_index < 0) throw std::out_of_range("negative flat index");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (flat_index < params[i].size()) return {i, flat_index};
    flat_index -= params[i].size();
  }
  throw std::out_of_range("flat index past end of ParamSet");
}

}  // namespace emix::nn
