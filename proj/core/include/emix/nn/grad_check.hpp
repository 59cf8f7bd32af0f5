#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "emix/nn/param_set.hpp"

namespace emix::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_offset = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares the analytic gradients already stored in `params` (grad slots)
/// with central differences (f(p+h) - f(p-h)) / 2h. `f` must be
/// deterministic and must not rely on the grad slots. Checks every scalar
/// when there are at most `samples` of them, otherwise a random subset of
/// `samples` coordinates drawn with `seed`.
///
/// Relative error per coordinate is |a - n| / max(|a| + |n|, abs_floor) so
/// coordinates whose true gradient is ~0 are judged on an absolute scale.
GradCheckReport finite_diff_check(const std::function<double(const ParamSet&)>& f,
                                  ParamSet& params, double h, double tol,
                                  std::size_t samples = 200, std::uint64_t seed = 0,
                                  double abs_floor = 1e-7);

}  // namespace emix::nn
