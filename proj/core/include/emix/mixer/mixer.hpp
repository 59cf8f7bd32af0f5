#pragma once

#include <optional>
#include <string_view>

#include "emix/nn/dense.hpp"
#include "emix/nn/param_set.hpp"

namespace emix::mix {

enum class MixerKind { kQmix, kVdn, kIql };

std::string_view to_string(MixerKind k);
MixerKind mixer_kind_from_string(std::string_view s);

struct MixerConfig {
  MixerKind kind = MixerKind::kQmix;
  int embed_dim = 32;
  int hypernet_hidden = 64;
  // 1: W hypernets are single linear maps of the state.
  // 2: state -> hypernet_hidden (relu) -> weights.
  int hypernet_layers = 2;

  void validate() const;
};

/// Per-sample mixing weights emitted by the hypernetworks. Row i belongs to
/// sample i; w1 is laid out (agent, embed) row-major.
struct HyperWeights {
  Matrix w1;  // rows x (N * embed), >= 0
  Matrix b1;  // rows x embed
  Matrix w2;  // rows x embed, >= 0
  Matrix b2;  // rows x 1
};

struct HyperTape {
  nn::MlpTape w1, b1, w2, b2;
};

struct MixTape {
  Matrix chosen_q;
  Matrix states;
  HyperWeights hyper;
  HyperTape hyper_tape;
  Matrix hidden_pre;  // rows x embed
  bool filled = false;
};

struct MixerOutput {
  Vector q_tot;     // empty for kIql
  Matrix agent_q;   // rows x N (the chosen utilities, passed through)
};

/// QMIX / VDN / IQL heads. Parameters are registered under "mixer." (QMIX
/// only; VDN and IQL have none).
///
/// QMIX: q_tot = elu(q . |W1(s)| + b1(s)) . |W2(s)| + b2(s), with b2 a
/// two-layer relu network of the state.
class Mixer {
 public:
  Mixer(nn::ParamSet& params, MixerConfig cfg, int n_agents, int state_dim);

  const MixerConfig& config() const { return cfg_; }
  int n_agents() const { return n_agents_; }
  int state_dim() const { return state_dim_; }

  void init(nn::ParamSet& params, Rng& rng) const;

  /// QMIX only; throws ConfigError for other kinds.
  HyperWeights hypernet_forward(const nn::ParamSet& params, const Matrix& states, HyperTape* tape) const;

  MixerOutput mix(const nn::ParamSet& params, const Matrix& chosen_q, const Matrix& states,
                  MixTape* tape) const;

  /// Takes d loss / d q_tot (one entry per row), accumulates hypernet grads
  /// and returns d loss / d chosen_q.
  Matrix backward(nn::ParamSet& params, const Vector& grad_q_tot, const MixTape& tape) const;

  /// q_tot for a single utility vector `q` (length N) using the weights of
  /// row `row` of `hw`. For kVdn `hw` is ignored.
  double mix_with(const HyperWeights& hw, Index row, const double* q) const;

  /// d q_tot / d chosen_q per row, from the forward tape (no param grads).
  Matrix q_tot_jacobian(const MixTape& tape) const;

 private:
  MixerConfig cfg_;
  int n_agents_;
  int state_dim_;
  std::optional<nn::Mlp> hyper_w1_;
  std::optional<nn::Mlp> hyper_b1_;
  std::optional<nn::Mlp> hyper_w2_;
  std::optional<nn::Mlp> hyper_b2_;
};

}  // namespace emix::mix
