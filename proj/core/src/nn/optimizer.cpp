#include "emix/nn/optimizer.hpp"

#include <cmath>

#include "emix/errors.hpp"

namespace emix::nn {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("decay must be in (0, 1)");
  if (!(epsilon_stability > 0.0)) throw ConfigError("epsilon_stability must be > 0");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be > 0");
}

RmsProp::RmsProp(const ParamSet& params, OptimizerConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  sq_avg_.reserve(params.size());
  for (const auto& e : params) sq_avg_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
}

double RmsProp::step(ParamSet& params) {
  if (params.size() != sq_avg_.size()) {
    throw DimensionError("optimizer state does not match ParamSet");
  }
  for (const auto& e : params) {
    if (!e.grad.allFinite()) throw NumericError("non-finite gradient in parameter '" + e.name + "'");
  }
  const double norm = std::sqrt(params.grad_norm_squared());
  double scale = 1.0;
  if (cfg_.grad_clip_norm && norm > *cfg_.grad_clip_norm) {
    scale = *cfg_.grad_clip_norm / (norm + 1e-6);
  }
  const double lr = cfg_.learning_rate;
  const double decay = cfg_.decay;
  const double eps = cfg_.epsilon_stability;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params[i];
    auto& v = sq_avg_[i];
    double* p = e.value.data();
    const double* g = e.grad.data();
    double* s = v.data();
    for (Index k = 0; k < e.size(); ++k) {
      const double gk = g[k] * scale;
      s[k] = decay * s[k] + (1.0 - decay) * gk * gk;
      p[k] -= lr * gk / (std::sqrt(s[k]) + eps);
    }
  }
  ++params.step_count;
  return norm;
}

}  // namespace emix::nn
