#pragma once

#include <optional>
#include <vector>

#include "emix/nn/param_set.hpp"

namespace emix::nn {

struct OptimizerConfig {
  double learning_rate = 5e-4;
  double decay = 0.99;
  double epsilon_stability = 1e-5;
  std::optional<double> grad_clip_norm = 10.0;

  void validate() const;
};

/// RMSProp with optional global-norm clipping:
///   v <- decay * v + (1 - decay) * g^2
///   p <- p - lr * g / (sqrt(v) + eps)
/// The squared-gradient averages are owned here, one per ParamSet entry.
class RmsProp {
 public:
  RmsProp(const ParamSet& params, OptimizerConfig cfg);

  const OptimizerConfig& config() const { return cfg_; }

  /// Applies one update and increments params.step_count. Returns the
  /// gradient norm before clipping. Throws NumericError naming the first
  /// parameter with a non-finite gradient; no parameter is modified then.
  double step(ParamSet& params);

  const std::vector<Matrix>& square_averages() const { return sq_avg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Matrix> sq_avg_;
};

}  // namespace emix::nn
