#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "emix/agent/agent_net.hpp"
#include "emix/learner/episode.hpp"
#include "emix/mixer/mixer.hpp"
#include "emix/nn/optimizer.hpp"
#include "emix/nn/param_set.hpp"
#include "emix/surprise/surprise.hpp"

namespace emix::learn {

enum class Algo { kEmix, kQmix, kTwinQmix, kVdn, kIql };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view s);

/// How the m target copies are refreshed.
enum class SyncMode {
  kStaggered,     // target i syncs when (t - i * interval / m) % interval == 0
  kSimultaneous,  // every target syncs when t % interval == 0
};

/// Order of the max over next joint actions and the min over targets.
enum class TargetReduction {
  kMinOfMax,  // each target's own greedy joint value, then min across targets
  kMaxOfMin,  // exhaustive max over joint actions of min_i Q_i(u', s')
};

std::string_view to_string(SyncMode m);
std::string_view to_string(TargetReduction r);
std::string_view to_string(surprise::EnergyOrder o);
std::string_view to_string(surprise::SigmaPooling p);

struct LearnerConfig {
  Algo algo = Algo::kEmix;
  std::optional<int> m_targets;           // default 2 for emix/twinqmix, 1 otherwise
  std::optional<double> beta;             // default 0.01 for emix
  std::optional<mix::MixerKind> mixer;    // emix/twinqmix only; default qmix
  double gamma = 0.99;
  int batch_size = 32;
  int buffer_capacity = 5000;
  std::uint64_t update_interval = 1000;   // env steps between syncs of one target
  std::uint64_t train_every = 25;         // env steps per gradient step; 0 = never train
  nn::OptimizerConfig optimizer;
  agent::EpsilonSchedule epsilon;
  int agent_hidden = 64;
  int embed_dim = 32;
  int hypernet_hidden = 64;
  int hypernet_layers = 2;
  int surprise_hidden = 64;
  SyncMode sync_mode = SyncMode::kStaggered;
  TargetReduction reduction = TargetReduction::kMinOfMax;
  surprise::EnergyOrder energy_order = surprise::EnergyOrder::kNextOverCurrent;
  surprise::SigmaPooling sigma_pooling = surprise::SigmaPooling::kBatch;
  bool train_surprise = true;             // false freezes the surprise mixer
};

/// Effective settings after applying the algorithm's fixed choices.
struct ResolvedAlgo {
  mix::MixerKind mixer = mix::MixerKind::kQmix;
  int m = 1;
  double beta = 0.0;
  bool surprise = false;  // compute V_surp and E at all
};

/// Throws ConfigError for invalid combinations (m < 1, beta < 0, ...).
ResolvedAlgo resolve(const LearnerConfig& cfg);

struct EnvDims {
  int n_agents = 0;
  int n_actions = 0;
  int obs_dim = 0;
  int state_dim = 0;
};

/// m target copies of the full online ParamSet.
struct TargetBank {
  std::vector<nn::ParamSet> params;
  std::vector<std::uint64_t> last_sync;
};

struct LossOutput {
  double loss = 0.0;
  double abs_td_error = 0.0;
  double e_mean = 0.0;      // masked mean of E (0 when surprise is off)
  double e_abs_mean = 0.0;  // masked mean of |E|
  double valid = 0.0;       // number of valid steps
};

/// Target-side values of one batch, one row per (b, t) step.
struct TargetValues {
  Matrix per_target;  // B*T x m joint values (or B*T*N x m for iql)
  Vector reduced;     // min-reduced (B*T, or B*T*N for iql)
};

/// Networks, parameters, targets and optimiser for one run.
class Learner {
 public:
  Learner(const LearnerConfig& cfg, const EnvDims& dims, std::uint64_t seed);

  const LearnerConfig& config() const { return cfg_; }
  const ResolvedAlgo& resolved() const { return resolved_; }
  const EnvDims& dims() const { return dims_; }

  nn::ParamSet& online() { return online_; }
  const nn::ParamSet& online() const { return online_; }
  TargetBank& targets() { return targets_; }
  const TargetBank& targets() const { return targets_; }

  const agent::AgentNet& agent_net() const { return agent_; }
  const mix::Mixer& mixer() const { return mixer_; }
  const surprise::SurpriseMixer& surprise_mixer() const { return surprise_; }

  /// Q-values for a single environment step (N rows) under the online net.
  Matrix act_q(const Matrix& observations, std::span<const int> last_actions) const;

  /// Agent-net inputs for every (b, t = 0..max_t, a) row of a batch.
  Matrix batch_agent_inputs(const EpisodeBatch& batch) const;

  /// Bootstrapped target values from the target bank.
  TargetValues target_values(const EpisodeBatch& batch) const;

  /// y = r + gamma (1 - terminated) min_i Q_i + beta E; B*T entries (B*T*N
  /// for iql). `e` may be empty, meaning no energy term.
  Vector td_target(const EpisodeBatch& batch, const Vector& e) const;

  /// Surprise values for a batch under `online` (and target 0).
  surprise::SurpriseEstimate surprise_values(const nn::ParamSet& online, const EpisodeBatch& batch) const;

  /// Loss of `online` on `batch`; grads of `online` untouched.
  LossOutput loss(const nn::ParamSet& online, const EpisodeBatch& batch) const;

  /// Loss plus gradient accumulation (+=) into `online`'s grad slots.
  LossOutput loss_and_grad(nn::ParamSet& online, const EpisodeBatch& batch) const;

  /// zero grads, loss_and_grad on the learner's online set, optimiser step.
  LossOutput train_step(const EpisodeBatch& batch);

  /// Hard-copies the targets whose schedule fires at env step t. Returns
  /// the indices that were synced.
  std::vector<int> sync_targets(std::uint64_t t);
  void sync_all(std::uint64_t t);

  /// Offset of target i within the sync period.
  std::uint64_t sync_offset(int i) const;

 private:
  std::pair<Matrix, Matrix> surprise_inputs(const Matrix& q_all, const EpisodeBatch& batch) const;
  LossOutput compute(const nn::ParamSet& online, nn::ParamSet* grads, const EpisodeBatch& batch) const;

  LearnerConfig cfg_;
  ResolvedAlgo resolved_;
  EnvDims dims_;
  nn::ParamSet online_;
  agent::AgentNet agent_;
  mix::Mixer mixer_;
  surprise::SurpriseMixer surprise_;
  TargetBank targets_;
  nn::RmsProp optimizer_;
};

}  // namespace emix::learn
