#include "emix/surprise/surprise.hpp"

#include <cmath>
#include <string>

#include "emix/errors.hpp"

namespace emix::surprise {

Vector energy_lse(const Matrix& v) {
  if (v.cols() == 0) throw DimensionError("energy_lse: need at least one agent column");
  if (!v.allFinite()) throw NumericError("energy_lse: non-finite input");
  Vector out(v.rows());
  for (Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    double s = 0.0;
    for (Index a = 0; a < v.cols(); ++a) s += std::exp(v(i, a) - m);
    out[i] = m + std::log(s);
  }
  return out;
}

Matrix energy_lse_grad(const Matrix& v) {
  Matrix g(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    double s = 0.0;
    for (Index a = 0; a < v.cols(); ++a) {
      g(i, a) = std::exp(v(i, a) - m);
      s += g(i, a);
    }
    g.row(i) /= s;
  }
  return g;
}

EnergyRatio energy_ratio(const SurpriseEstimate& v, double beta, EnergyOrder order) {
  if (v.v_surp.rows() != v.v_surp_target.rows() || v.v_surp.cols() != v.v_surp_target.cols()) {
    throw DimensionError("energy_ratio: online and target surprise shapes differ");
  }
  const Vector current = energy_lse(v.v_surp);
  const Vector next = energy_lse(v.v_surp_target);
  EnergyRatio r;
  r.beta = beta;
  r.e = order == EnergyOrder::kNextOverCurrent ? Vector(next - current) : Vector(current - next);
  return r;
}

Matrix energy_ratio_grad_online(const SurpriseEstimate& v, EnergyOrder order) {
  Matrix g = energy_lse_grad(v.v_surp);
  if (order == EnergyOrder::kNextOverCurrent) g = -g;
  return g;
}

namespace {

// Welford accumulator per (agent, feature).
struct Moments {
  Matrix mean;
  Matrix m2;
  double count = 0.0;

  Moments(Index n, Index d) : mean(Matrix::Zero(n, d)), m2(Matrix::Zero(n, d)) {}

  void add(const Eigen::Ref<const Matrix>& x) {
    count += 1.0;
    const Matrix delta = x - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(x - mean);
  }

  Matrix stddev() const {
    if (count == 0.0) return Matrix::Zero(mean.rows(), mean.cols());
    return (m2 / count).cwiseMax(0.0).cwiseSqrt();
  }
};

}  // namespace

Matrix compute_sigma(const learn::EpisodeBatch& batch, SigmaSource which) {
  const Index n = batch.n_agents;
  const Index d = batch.observations.cols();
  Moments mom(n, d);
  const int shift = which == SigmaSource::kNext ? 1 : 0;
  for (int b = 0; b < batch.batch_size; ++b) {
    for (int t = 0; t < batch.max_t; ++t) {
      if (batch.mask[batch.step_index(b, t)] == 0.0) continue;
      mom.add(batch.observations.middleRows(batch.obs_row(b, t + shift, 0), n));
    }
  }
  if (mom.count == 0.0) throw UsageError("compute_sigma: batch has no valid step");
  return mom.stddev();
}

std::vector<Matrix> compute_sigma_per_episode(const learn::EpisodeBatch& batch, SigmaSource which) {
  const Index n = batch.n_agents;
  const Index d = batch.observations.cols();
  const int shift = which == SigmaSource::kNext ? 1 : 0;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(batch.batch_size));
  for (int b = 0; b < batch.batch_size; ++b) {
    Moments mom(n, d);
    for (int t = 0; t < batch.max_t; ++t) {
      if (batch.mask[batch.step_index(b, t)] == 0.0) continue;
      mom.add(batch.observations.middleRows(batch.obs_row(b, t + shift, 0), n));
    }
    out.push_back(mom.stddev());
  }
  return out;
}

SurpriseMixer::SurpriseMixer(nn::ParamSet& params, SurpriseMixerConfig cfg)
    : cfg_(cfg),
      mlp_(params, "surprise",
           {cfg.state_dim + cfg.n_agents * cfg.n_actions + cfg.n_agents * cfg.obs_dim, cfg.hidden, cfg.hidden,
            cfg.n_agents},
           nn::Activation::kRelu, nn::Activation::kIdentity) {}

int SurpriseMixer::input_dim() const {
  return cfg_.state_dim + cfg_.n_agents * cfg_.n_actions + cfg_.n_agents * cfg_.obs_dim;
}

Matrix SurpriseMixer::build_inputs(const Matrix& states, std::span<const int> joint_actions,
                                   std::span<const Matrix> sigma, std::span<const int> sigma_of_row) const {
  const Index rows = states.rows();
  const int n = cfg_.n_agents;
  if (states.cols() != cfg_.state_dim) {
    throw DimensionError("surprise input: state width " + std::to_string(states.cols()) + ", expected " +
                         std::to_string(cfg_.state_dim));
  }
  if (static_cast<Index>(joint_actions.size()) != rows * n) {
    throw DimensionError("surprise input: joint action count does not match rows x N");
  }
  if (sigma.empty()) throw DimensionError("surprise input: no sigma provided");
  for (const auto& s : sigma) {
    if (s.rows() != n || s.cols() != cfg_.obs_dim) {
      throw DimensionError("surprise input: sigma must be N x obs_dim");
    }
  }
  if (!sigma_of_row.empty() && static_cast<Index>(sigma_of_row.size()) != rows) {
    throw DimensionError("surprise input: sigma_of_row length does not match rows");
  }
  const Index act_off = cfg_.state_dim;
  const Index sig_off = act_off + n * cfg_.n_actions;
  const Index sig_len = static_cast<Index>(n) * cfg_.obs_dim;
  Matrix x = Matrix::Zero(rows, input_dim());
  x.leftCols(cfg_.state_dim) = states;
  for (Index i = 0; i < rows; ++i) {
    for (int a = 0; a < n; ++a) {
      const int u = joint_actions[static_cast<std::size_t>(i * n + a)];
      if (u < 0 || u >= cfg_.n_actions) throw DimensionError("surprise input: action out of range");
      x(i, act_off + a * cfg_.n_actions + u) = 1.0;
    }
    const std::size_t which = sigma_of_row.empty() ? 0 : static_cast<std::size_t>(sigma_of_row[static_cast<std::size_t>(i)]);
    if (which >= sigma.size()) throw DimensionError("surprise input: sigma index out of range");
    x.row(i).segment(sig_off, sig_len) = Eigen::Map<const RowVector>(sigma[which].data(), sig_len);
  }
  return x;
}

Matrix SurpriseMixer::forward(const nn::ParamSet& params, const Matrix& inputs, nn::MlpTape* tape) const {
  if (inputs.cols() != input_dim()) throw DimensionError("surprise mixer: input width mismatch");
  return mlp_.forward(params, inputs, tape);
}

Matrix SurpriseMixer::backward(nn::ParamSet& params, const Matrix& grad_v, const nn::MlpTape& tape) const {
  return mlp_.backward(params, grad_v, tape);
}

}  // namespace emix::surprise
