#include "emix/mixer/mixer.hpp"

#include <cmath>
#include <string>

#include "emix/errors.hpp"

namespace emix::mix {

std::string_view to_string(MixerKind k) {
  switch (k) {
    case MixerKind::kQmix: return "qmix";
    case MixerKind::kVdn: return "vdn";
    case MixerKind::kIql: return "iql";
  }
  return "?";
}

MixerKind mixer_kind_from_string(std::string_view s) {
  if (s == "qmix") return MixerKind::kQmix;
  if (s == "vdn") return MixerKind::kVdn;
  if (s == "iql") return MixerKind::kIql;
  throw ConfigError("unknown mixer kind '" + std::string(s) + "'");
}

void MixerConfig::validate() const {
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (hypernet_hidden <= 0) throw ConfigError("hypernet_hidden must be positive");
  if (hypernet_layers != 1 && hypernet_layers != 2) throw ConfigError("hypernet_layers must be 1 or 2");
}

Mixer::Mixer(nn::ParamSet& params, MixerConfig cfg, int n_agents, int state_dim)
    : cfg_(cfg), n_agents_(n_agents), state_dim_(state_dim) {
  cfg_.validate();
  if (n_agents <= 0 || state_dim <= 0) throw ConfigError("mixer: dimensions must be positive");
  if (cfg_.kind != MixerKind::kQmix) return;
  using nn::Activation;
  const Index s = state_dim;
  const Index e = cfg_.embed_dim;
  const Index h = cfg_.hypernet_hidden;
  if (cfg_.hypernet_layers == 1) {
    hyper_w1_.emplace(params, "mixer.hyper_w1", std::vector<Index>{s, e * n_agents}, Activation::kRelu,
                      Activation::kAbs);
    hyper_w2_.emplace(params, "mixer.hyper_w2", std::vector<Index>{s, e}, Activation::kRelu, Activation::kAbs);
  } else {
    hyper_w1_.emplace(params, "mixer.hyper_w1", std::vector<Index>{s, h, e * n_agents}, Activation::kRelu,
                      Activation::kAbs);
    hyper_w2_.emplace(params, "mixer.hyper_w2", std::vector<Index>{s, h, e}, Activation::kRelu,
                      Activation::kAbs);
  }
  hyper_b1_.emplace(params, "mixer.hyper_b1", std::vector<Index>{s, e}, Activation::kRelu,
                    Activation::kIdentity);
  hyper_b2_.emplace(params, "mixer.hyper_b2", std::vector<Index>{s, e, 1}, Activation::kRelu,
                    Activation::kIdentity);
}

void Mixer::init(nn::ParamSet& params, Rng& rng) const {
  if (cfg_.kind != MixerKind::kQmix) return;
  hyper_w1_->init(params, rng);
  hyper_b1_->init(params, rng);
  hyper_w2_->init(params, rng);
  hyper_b2_->init(params, rng);
}

HyperWeights Mixer::hypernet_forward(const nn::ParamSet& params, const Matrix& states, HyperTape* tape) const {
  if (cfg_.kind != MixerKind::kQmix) throw ConfigError("hypernet_forward requires a qmix mixer");
  if (states.cols() != state_dim_) {
    throw DimensionError("mixer: state width " + std::to_string(states.cols()) + ", expected " +
                         std::to_string(state_dim_));
  }
  HyperWeights hw;
  hw.w1 = hyper_w1_->forward(params, states, tape ? &tape->w1 : nullptr);
  hw.b1 = hyper_b1_->forward(params, states, tape ? &tape->b1 : nullptr);
  hw.w2 = hyper_w2_->forward(params, states, tape ? &tape->w2 : nullptr);
  hw.b2 = hyper_b2_->forward(params, states, tape ? &tape->b2 : nullptr);
  return hw;
}

MixerOutput Mixer::mix(const nn::ParamSet& params, const Matrix& chosen_q, const Matrix& states,
                       MixTape* tape) const {
  if (chosen_q.cols() != n_agents_) {
    throw DimensionError("mixer: chosen_q has " + std::to_string(chosen_q.cols()) + " columns, expected " +
                         std::to_string(n_agents_));
  }
  MixerOutput out;
  out.agent_q = chosen_q;
  if (cfg_.kind == MixerKind::kIql) return out;
  if (cfg_.kind == MixerKind::kVdn) {
    out.q_tot = chosen_q.rowwise().sum();
    if (tape != nullptr) {
      tape->chosen_q = chosen_q;
      tape->filled = true;
    }
    return out;
  }

  if (states.rows() != chosen_q.rows()) throw DimensionError("mixer: state and q row counts differ");
  HyperWeights hw = hypernet_forward(params, states, tape ? &tape->hyper_tape : nullptr);
  const Index rows = chosen_q.rows();
  const Index e = cfg_.embed_dim;
  Matrix hidden_pre(rows, e);
  out.q_tot.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    const Eigen::Map<const Matrix> w1(hw.w1.row(i).data(), n_agents_, e);
    RowVector pre = chosen_q.row(i) * w1 + hw.b1.row(i);
    hidden_pre.row(i) = pre;
    double q = hw.b2(i, 0);
    for (Index k = 0; k < e; ++k) {
      const double x = pre[k];
      q += (x > 0.0 ? x : std::expm1(x)) * hw.w2(i, k);
    }
    out.q_tot[i] = q;
  }
  if (tape != nullptr) {
    tape->chosen_q = chosen_q;
    tape->states = states;
    tape->hyper = std::move(hw);
    tape->hidden_pre = std::move(hidden_pre);
    tape->filled = true;
  }
  return out;
}

Matrix Mixer::backward(nn::ParamSet& params, const Vector& grad_q_tot, const MixTape& tape) const {
  if (cfg_.kind == MixerKind::kIql) throw ConfigError("iql has no joint head to differentiate");
  if (!tape.filled) throw UsageError("mixer backward called without a forward pass");
  const Index rows = tape.chosen_q.rows();
  if (grad_q_tot.size() != rows) throw DimensionError("mixer backward: gradient length mismatch");
  if (cfg_.kind == MixerKind::kVdn) {
    return grad_q_tot.replicate(1, n_agents_);
  }

  const Index e = cfg_.embed_dim;
  const auto& hw = tape.hyper;
  Matrix g_w1(rows, n_agents_ * e);
  Matrix g_b1(rows, e);
  Matrix g_w2(rows, e);
  Matrix g_b2(rows, 1);
  Matrix g_q(rows, n_agents_);
  for (Index i = 0; i < rows; ++i) {
    const double g = grad_q_tot[i];
    g_b2(i, 0) = g;
    RowVector g_pre(e);
    for (Index k = 0; k < e; ++k) {
      const double x = tape.hidden_pre(i, k);
      const double h = x > 0.0 ? x : std::expm1(x);
      g_w2(i, k) = g * h;
      g_pre[k] = g * hw.w2(i, k) * (x > 0.0 ? 1.0 : std::exp(x));
    }
    g_b1.row(i) = g_pre;
    const Eigen::Map<const Matrix> w1(hw.w1.row(i).data(), n_agents_, e);
    Eigen::Map<Matrix> gw1(g_w1.row(i).data(), n_agents_, e);
    gw1.noalias() = tape.chosen_q.row(i).transpose() * g_pre;
    g_q.row(i).noalias() = g_pre * w1.transpose();
  }
  hyper_w1_->backward(params, g_w1, tape.hyper_tape.w1);
  hyper_b1_->backward(params, g_b1, tape.hyper_tape.b1);
  hyper_w2_->backward(params, g_w2, tape.hyper_tape.w2);
  hyper_b2_->backward(params, g_b2, tape.hyper_tape.b2);
  return g_q;
}

double Mixer::mix_with(const HyperWeights& hw, Index row, const double* q) const {
  if (cfg_.kind == MixerKind::kVdn) {
    double s = 0.0;
    for (int a = 0; a < n_agents_; ++a) s += q[a];
    return s;
  }
  if (cfg_.kind == MixerKind::kIql) throw ConfigError("iql has no joint head");
  const Index e = cfg_.embed_dim;
  double out = hw.b2(row, 0);
  for (Index k = 0; k < e; ++k) {
    double x = hw.b1(row, k);
    for (int a = 0; a < n_agents_; ++a) x += q[a] * hw.w1(row, a * e + k);
    out += (x > 0.0 ? x : std::expm1(x)) * hw.w2(row, k);
  }
  return out;
}

Matrix Mixer::q_tot_jacobian(const MixTape& tape) const {
  if (!tape.filled) throw UsageError("mixer jacobian requires a forward pass");
  const Index rows = tape.chosen_q.rows();
  if (cfg_.kind == MixerKind::kVdn) return Matrix::Ones(rows, n_agents_);
  if (cfg_.kind == MixerKind::kIql) throw ConfigError("iql has no joint head");
  const Index e = cfg_.embed_dim;
  Matrix jac(rows, n_agents_);
  for (Index i = 0; i < rows; ++i) {
    RowVector g_pre(e);
    for (Index k = 0; k < e; ++k) {
      const double x = tape.hidden_pre(i, k);
      g_pre[k] = tape.hyper.w2(i, k) * (x > 0.0 ? 1.0 : std::exp(x));
    }
    const Eigen::Map<const Matrix> w1(tape.hyper.w1.row(i).data(), n_agents_, e);
    jac.row(i).noalias() = g_pre * w1.transpose();
  }
  return jac;
}

}  // namespace emix::mix
