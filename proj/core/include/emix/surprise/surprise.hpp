#pragma once

#include <span>
#include <vector>

#include "emix/learner/episode.hpp"
#include "emix/nn/dense.hpp"
#include "emix/nn/param_set.hpp"

namespace emix::surprise {

// ---------------------------------------------------------------------------
// Energy operator

/// Row-wise log-sum-exp over the agent axis: m + log sum_a exp(v_a - m),
/// m = max_a v_a. Throws NumericError on non-finite input, DimensionError
/// when there are no columns.
Vector energy_lse(const Matrix& v);

/// Row-wise softmax, i.e. d energy_lse / d v.
Matrix energy_lse_grad(const Matrix& v);

/// Which partition function sits in the numerator of E.
enum class EnergyOrder {
  kNextOverCurrent,  // E = lse(V'(s',u',sigma')) - lse(V(s,u,sigma))
  kCurrentOverNext,  // E = lse(V(s,u,sigma)) - lse(V'(s',u',sigma'))
};

struct SurpriseEstimate {
  Matrix v_surp;         // rows x N, online network on (s, u, sigma)
  Matrix v_surp_target;  // rows x N, target network on (s', u', sigma')
};

struct EnergyRatio {
  Vector e;
  double beta = 0.0;
};

EnergyRatio energy_ratio(const SurpriseEstimate& v, double beta,
                         EnergyOrder order = EnergyOrder::kNextOverCurrent);

/// d E / d v_surp per row (the target term carries no gradient).
Matrix energy_ratio_grad_online(const SurpriseEstimate& v, EnergyOrder order = EnergyOrder::kNextOverCurrent);

// ---------------------------------------------------------------------------
// Deviation features

enum class SigmaSource { kCurrent, kNext };
enum class SigmaPooling { kBatch, kEpisode };

/// Population standard deviation, per agent and observation feature, of
/// the observations at mask-valid steps. kCurrent uses z_t, kNext uses
/// z_{t+1}, both over valid t. Result is N x obs_dim. Throws UsageError if
/// the batch has no valid step.
Matrix compute_sigma(const learn::EpisodeBatch& batch, SigmaSource which);

/// Same, pooled per episode: one N x obs_dim matrix per batch entry.
/// Episodes without valid steps get a zero matrix.
std::vector<Matrix> compute_sigma_per_episode(const learn::EpisodeBatch& batch, SigmaSource which);

// ---------------------------------------------------------------------------
// Surprise mixer

struct SurpriseMixerConfig {
  int state_dim = 0;
  int n_agents = 0;
  int n_actions = 0;
  int obs_dim = 0;
  int hidden = 64;
};

/// V_surp: [state | one-hot joint action | flattened sigma] -> relu(hidden)
/// -> relu(hidden) -> N outputs, one per agent. Parameters under "surprise.".
class SurpriseMixer {
 public:
  SurpriseMixer(nn::ParamSet& params, SurpriseMixerConfig cfg);

  const SurpriseMixerConfig& config() const { return cfg_; }
  int input_dim() const;

  void init(nn::ParamSet& params, Rng& rng) const { mlp_.init(params, rng); }

  /// `joint_actions` has rows * N entries laid out (row, agent). `sigma`
  /// holds either one N x obs_dim matrix broadcast to every row, or one per
  /// row group as selected by `sigma_of_row` (may be empty for broadcast).
  Matrix build_inputs(const Matrix& states, std::span<const int> joint_actions,
                      std::span<const Matrix> sigma, std::span<const int> sigma_of_row = {}) const;

  Matrix forward(const nn::ParamSet& params, const Matrix& inputs, nn::MlpTape* tape) const;
  Matrix backward(nn::ParamSet& params, const Matrix& grad_v, const nn::MlpTape& tape) const;

 private:
  SurpriseMixerConfig cfg_;
  nn::Mlp mlp_;
};

}  // namespace emix::surprise
