#include "emix/learner/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "emix/errors.hpp"

namespace emix::learn {
namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ull + stream * 0xD1B54A32D192ED03ull + 0x632BE59BD9B4E019ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Joint-action enumeration is capped to keep the exhaustive max tractable.
constexpr double kMaxJointActions = 65536.0;

}  // namespace

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::kEmix: return "emix";
    case Algo::kQmix: return "qmix";
    case Algo::kTwinQmix: return "twinqmix";
    case Algo::kVdn: return "vdn";
    case Algo::kIql: return "iql";
  }
  return "?";
}

Algo algo_from_string(std::string_view s) {
  if (s == "emix") return Algo::kEmix;
  if (s == "qmix") return Algo::kQmix;
  if (s == "twinqmix") return Algo::kTwinQmix;
  if (s == "vdn") return Algo::kVdn;
  if (s == "iql") return Algo::kIql;
  throw ConfigError("unknown algo '" + std::string(s) + "'");
}

std::string_view to_string(SyncMode m) {
  return m == SyncMode::kStaggered ? "staggered" : "simultaneous";
}

std::string_view to_string(TargetReduction r) {
  return r == TargetReduction::kMinOfMax ? "min_of_max" : "max_of_min";
}

std::string_view to_string(surprise::EnergyOrder o) {
  return o == surprise::EnergyOrder::kNextOverCurrent ? "next_over_current" : "current_over_next";
}

std::string_view to_string(surprise::SigmaPooling p) {
  return p == surprise::SigmaPooling::kBatch ? "batch" : "episode";
}

ResolvedAlgo resolve(const LearnerConfig& cfg) {
  ResolvedAlgo r;
  switch (cfg.algo) {
    case Algo::kEmix:
      r.mixer = cfg.mixer.value_or(mix::MixerKind::kQmix);
      r.m = cfg.m_targets.value_or(2);
      r.beta = cfg.beta.value_or(0.01);
      r.surprise = true;
      break;
    case Algo::kTwinQmix:
      r.mixer = cfg.mixer.value_or(mix::MixerKind::kQmix);
      r.m = 2;
      r.beta = 0.0;
      break;
    case Algo::kQmix:
      r.mixer = mix::MixerKind::kQmix;
      break;
    case Algo::kVdn:
      r.mixer = mix::MixerKind::kVdn;
      break;
    case Algo::kIql:
      r.mixer = mix::MixerKind::kIql;
      break;
  }
  if (r.m < 1) throw ConfigError("m_targets must be >= 1");
  if (!(r.beta >= 0.0) || !std::isfinite(r.beta)) throw ConfigError("beta must be finite and >= 0");
  if (r.surprise && r.mixer == mix::MixerKind::kIql) {
    throw ConfigError("the energy term needs a joint (qmix or vdn) mixer");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.buffer_capacity <= cfg.batch_size) throw ConfigError("buffer_capacity must exceed batch_size");
  if (cfg.update_interval == 0) throw ConfigError("update_interval must be positive");
  cfg.optimizer.validate();
  return r;
}

Learner::Learner(const LearnerConfig& cfg, const EnvDims& dims, std::uint64_t seed)
    : cfg_(cfg),
      resolved_(resolve(cfg)),
      dims_(dims),
      online_(),
      agent_(online_, agent::AgentNetConfig{dims.obs_dim, dims.n_actions, dims.n_agents, cfg.agent_hidden}),
      mixer_(online_,
             mix::MixerConfig{resolved_.mixer, cfg.embed_dim, cfg.hypernet_hidden, cfg.hypernet_layers},
             dims.n_agents, dims.state_dim),
      surprise_(online_, surprise::SurpriseMixerConfig{dims.state_dim, dims.n_agents, dims.n_actions,
                                                       dims.obs_dim, cfg.surprise_hidden}),
      optimizer_(online_, cfg.optimizer) {
  // Independent streams so every network's initialisation is the same
  // whatever the algorithm.
  Rng agent_rng(stream_seed(seed, 1));
  Rng mixer_rng(stream_seed(seed, 2));
  Rng surprise_rng(stream_seed(seed, 3));
  agent_.init(online_, agent_rng);
  mixer_.init(online_, mixer_rng);
  surprise_.init(online_, surprise_rng);
  targets_.params.assign(static_cast<std::size_t>(resolved_.m), online_);
  targets_.last_sync.assign(static_cast<std::size_t>(resolved_.m), 0);
  for (auto& t : targets_.params) t.zero_grads();
}

Matrix Learner::act_q(const Matrix& observations, std::span<const int> last_actions) const {
  std::vector<int> ids(static_cast<std::size_t>(dims_.n_agents));
  for (int a = 0; a < dims_.n_agents; ++a) ids[static_cast<std::size_t>(a)] = a;
  return agent_.forward(online_, agent_.build_inputs(observations, last_actions, ids), nullptr);
}

Matrix Learner::batch_agent_inputs(const EpisodeBatch& batch) const {
  const int n = batch.n_agents;
  const Index rows = batch.observations.rows();
  std::vector<int> last(static_cast<std::size_t>(rows), -1);
  std::vector<int> ids(static_cast<std::size_t>(rows));
  for (int b = 0; b < batch.batch_size; ++b) {
    for (int t = 0; t <= batch.max_t; ++t) {
      for (int a = 0; a < n; ++a) {
        const auto r = static_cast<std::size_t>(batch.obs_row(b, t, a));
        ids[r] = a;
        if (t > 0) last[r] = batch.action(b, t - 1, a);
      }
    }
  }
  return agent_.build_inputs(batch.observations, last, ids);
}

namespace {

Matrix gather_states(const EpisodeBatch& batch, int shift) {
  Matrix s(batch.steps(), batch.states.cols());
  for (int b = 0; b < batch.batch_size; ++b) {
    for (int t = 0; t < batch.max_t; ++t) s.row(batch.step_index(b, t)) = batch.states.row(batch.state_row(b, t + shift));
  }
  return s;
}

}  // namespace

TargetValues Learner::target_values(const EpisodeBatch& batch) const {
  const Matrix x = batch_agent_inputs(batch);
  const Matrix next_states = gather_states(batch, 1);
  const int n = batch.n_agents;
  const int n_act = dims_.n_actions;
  const Index steps = batch.steps();
  const bool iql = resolved_.mixer == mix::MixerKind::kIql;
  const int m = resolved_.m;
  const auto avail = std::vector<bool>(static_cast<std::size_t>(n_act), true);

  std::vector<Matrix> next_q;  // per target: steps*N x n_actions at t+1
  next_q.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const Matrix q = agent_.forward(targets_.params[static_cast<std::size_t>(i)], x, nullptr);
    Matrix nq(steps * n, n_act);
    for (int b = 0; b < batch.batch_size; ++b) {
      for (int t = 0; t < batch.max_t; ++t) {
        nq.middleRows(batch.step_index(b, t) * n, n) = q.middleRows(batch.obs_row(b, t + 1, 0), n);
      }
    }
    next_q.push_back(std::move(nq));
  }

  TargetValues tv;
  const Index out_rows = iql ? steps * n : steps;
  tv.per_target.resize(out_rows, m);
  for (int i = 0; i < m; ++i) {
    const Matrix& nq = next_q[static_cast<std::size_t>(i)];
    if (iql) {
      tv.per_target.col(i) = nq.rowwise().maxCoeff();
      continue;
    }
    Matrix chosen(steps, n);
    for (Index k = 0; k < steps; ++k) {
      for (int a = 0; a < n; ++a) {
        const Index r = k * n + a;
        chosen(k, a) = nq(r, agent::greedy_action(nq.row(r), avail));
      }
    }
    tv.per_target.col(i) = mixer_.mix(targets_.params[static_cast<std::size_t>(i)], chosen, next_states, nullptr).q_tot;
  }

  if (cfg_.reduction == TargetReduction::kMinOfMax || m == 1) {
    tv.reduced = tv.per_target.rowwise().minCoeff();
    return tv;
  }

  // max over next actions of min over targets.
  tv.reduced.resize(out_rows);
  if (iql) {
    for (Index r = 0; r < out_rows; ++r) {
      double best = -std::numeric_limits<double>::infinity();
      for (int u = 0; u < n_act; ++u) {
        double lo = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) lo = std::min(lo, next_q[static_cast<std::size_t>(i)](r, u));
        best = std::max(best, lo);
      }
      tv.reduced[r] = best;
    }
    return tv;
  }
  if (std::pow(static_cast<double>(n_act), n) > kMaxJointActions) {
    throw ConfigError("max_of_min target reduction: joint action space too large to enumerate");
  }
  std::vector<mix::HyperWeights> hw;
  if (resolved_.mixer == mix::MixerKind::kQmix) {
    for (int i = 0; i < m; ++i) {
      hw.push_back(mixer_.hypernet_forward(targets_.params[static_cast<std::size_t>(i)], next_states, nullptr));
    }
  } else {
    hw.resize(static_cast<std::size_t>(m));
  }
  std::vector<int> joint(static_cast<std::size_t>(n));
  std::vector<double> q(static_cast<std::size_t>(n));
  for (Index k = 0; k < steps; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    std::fill(joint.begin(), joint.end(), 0);
    while (true) {
      double lo = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const Matrix& nq = next_q[static_cast<std::size_t>(i)];
        for (int a = 0; a < n; ++a) q[static_cast<std::size_t>(a)] = nq(k * n + a, joint[static_cast<std::size_t>(a)]);
        lo = std::min(lo, mixer_.mix_with(hw[static_cast<std::size_t>(i)], k, q.data()));
      }
      best = std::max(best, lo);
      int a = 0;
      while (a < n && ++joint[static_cast<std::size_t>(a)] == n_act) joint[static_cast<std::size_t>(a++)] = 0;
      if (a == n) break;
    }
    tv.reduced[k] = best;
  }
  return tv;
}

Vector Learner::td_target(const EpisodeBatch& batch, const Vector& e) const {
  const TargetValues tv = target_values(batch);
  const bool iql = resolved_.mixer == mix::MixerKind::kIql;
  const int n = batch.n_agents;
  Vector y(tv.reduced.size());
  for (Index k = 0; k < batch.steps(); ++k) {
    const double cont = cfg_.gamma * (1.0 - batch.terminated[k]);
    if (iql) {
      for (int a = 0; a < n; ++a) y[k * n + a] = batch.rewards[k] + cont * tv.reduced[k * n + a];
    } else {
      y[k] = batch.rewards[k] + cont * tv.reduced[k];
      if (e.size() > 0 && resolved_.beta != 0.0) y[k] += resolved_.beta * e[k];
    }
  }
  return y;
}

std::pair<Matrix, Matrix> Learner::surprise_inputs(const Matrix& q_all, const EpisodeBatch& batch) const {
  const int n = batch.n_agents;
  const Index steps = batch.steps();
  // u' is the online greedy joint action at s'.
  const auto avail = std::vector<bool>(static_cast<std::size_t>(dims_.n_actions), true);
  std::vector<int> next_actions(static_cast<std::size_t>(steps * n));
  for (int b = 0; b < batch.batch_size; ++b) {
    for (int t = 0; t < batch.max_t; ++t) {
      for (int a = 0; a < n; ++a) {
        next_actions[static_cast<std::size_t>(batch.step_index(b, t) * n + a)] =
            agent::greedy_action(q_all.row(batch.obs_row(b, t + 1, a)), avail);
      }
    }
  }
  std::vector<Matrix> sigma;
  std::vector<Matrix> sigma_next;
  std::vector<int> sigma_of_row;
  if (cfg_.sigma_pooling == surprise::SigmaPooling::kBatch) {
    sigma.push_back(surprise::compute_sigma(batch, surprise::SigmaSource::kCurrent));
    sigma_next.push_back(surprise::compute_sigma(batch, surprise::SigmaSource::kNext));
  } else {
    sigma = surprise::compute_sigma_per_episode(batch, surprise::SigmaSource::kCurrent);
    sigma_next = surprise::compute_sigma_per_episode(batch, surprise::SigmaSource::kNext);
    sigma_of_row.resize(static_cast<std::size_t>(steps));
    for (Index k = 0; k < steps; ++k) sigma_of_row[static_cast<std::size_t>(k)] = static_cast<int>(k / batch.max_t);
  }
  return {surprise_.build_inputs(gather_states(batch, 0), batch.actions, sigma, sigma_of_row),
          surprise_.build_inputs(gather_states(batch, 1), next_actions, sigma_next, sigma_of_row)};
}

surprise::SurpriseEstimate Learner::surprise_values(const nn::ParamSet& online, const EpisodeBatch& batch) const {
  const Matrix q_all = agent_.forward(online, batch_agent_inputs(batch), nullptr);
  const auto [cur_in, next_in] = surprise_inputs(q_all, batch);
  surprise::SurpriseEstimate est;
  est.v_surp = surprise_.forward(online, cur_in, nullptr);
  est.v_surp_target = surprise_.forward(targets_.params.front(), next_in, nullptr);
  return est;
}

LossOutput Learner::loss(const nn::ParamSet& online, const EpisodeBatch& batch) const {
  return compute(online, nullptr, batch);
}

LossOutput Learner::loss_and_grad(nn::ParamSet& online, const EpisodeBatch& batch) const {
  return compute(online, &online, batch);
}

LossOutput Learner::compute(const nn::ParamSet& online, nn::ParamSet* grads, const EpisodeBatch& batch) const {
  batch.validate();
  if (batch.n_agents != dims_.n_agents || batch.n_actions != dims_.n_actions) {
    throw DimensionError("batch does not match learner dimensions");
  }
  const int n = batch.n_agents;
  const Index steps = batch.steps();
  const bool iql = resolved_.mixer == mix::MixerKind::kIql;
  const double valid = batch.valid_count();
  if (valid <= 0.0) throw UsageError("batch has no valid step");

  const Matrix x = batch_agent_inputs(batch);
  nn::MlpTape agent_tape;
  const Matrix q_all = agent_.forward(online, x, grads ? &agent_tape : nullptr);

  Matrix chosen(steps, n);
  for (int b = 0; b < batch.batch_size; ++b) {
    for (int t = 0; t < batch.max_t; ++t) {
      const Index k = batch.step_index(b, t);
      for (int a = 0; a < n; ++a) chosen(k, a) = q_all(batch.obs_row(b, t, a), batch.action(b, t, a));
    }
  }

  // Energy ratio. The online surprise term stays differentiable; the target
  // surprise mixer is a constant.
  Vector e;
  nn::MlpTape surprise_tape;
  surprise::SurpriseEstimate est;
  if (resolved_.surprise) {
    const auto [cur_in, next_in] = surprise_inputs(q_all, batch);
    const bool diff_surprise = grads != nullptr && cfg_.train_surprise && resolved_.beta != 0.0;
    est.v_surp = surprise_.forward(online, cur_in, diff_surprise ? &surprise_tape : nullptr);
    est.v_surp_target = surprise_.forward(targets_.params.front(), next_in, nullptr);
    e = surprise::energy_ratio(est, resolved_.beta, cfg_.energy_order).e;
  }

  const Vector y = td_target(batch, e);

  LossOutput out;
  out.valid = valid;
  double loss_sum = 0.0;
  double abs_sum = 0.0;
  Vector grad_y;  // d loss / d y, per step (summed over agents for iql)
  if (iql) {
    Matrix grad_q(steps, n);
    for (Index k = 0; k < steps; ++k) {
      const double m = batch.mask[k];
      for (int a = 0; a < n; ++a) {
        const double d = (y[k * n + a] - chosen(k, a)) * m;
        loss_sum += 0.5 * d * d;
        abs_sum += std::abs(d);
        grad_q(k, a) = -d / valid;
      }
    }
    out.loss = loss_sum / valid;
    out.abs_td_error = abs_sum / (valid * n);
    if (grads != nullptr) {
      Matrix g_all = Matrix::Zero(q_all.rows(), q_all.cols());
      for (int b = 0; b < batch.batch_size; ++b) {
        for (int t = 0; t < batch.max_t; ++t) {
          const Index k = batch.step_index(b, t);
          for (int a = 0; a < n; ++a) g_all(batch.obs_row(b, t, a), batch.action(b, t, a)) = grad_q(k, a);
        }
      }
      agent_.backward(*grads, g_all, agent_tape);
    }
  } else {
    mix::MixTape mix_tape;
    const Vector q_tot = mixer_.mix(online, chosen, gather_states(batch, 0), grads ? &mix_tape : nullptr).q_tot;
    Vector grad_qtot(steps);
    grad_y.resize(steps);
    for (Index k = 0; k < steps; ++k) {
      const double d = (y[k] - q_tot[k]) * batch.mask[k];
      loss_sum += 0.5 * d * d;
      abs_sum += std::abs(d);
      grad_qtot[k] = -d / valid;
      grad_y[k] = d / valid;
    }
    out.loss = loss_sum / valid;
    out.abs_td_error = abs_sum / valid;
    if (grads != nullptr) {
      const Matrix g_chosen = mixer_.backward(*grads, grad_qtot, mix_tape);
      Matrix g_all = Matrix::Zero(q_all.rows(), q_all.cols());
      for (int b = 0; b < batch.batch_size; ++b) {
        for (int t = 0; t < batch.max_t; ++t) {
          const Index k = batch.step_index(b, t);
          for (int a = 0; a < n; ++a) g_all(batch.obs_row(b, t, a), batch.action(b, t, a)) = g_chosen(k, a);
        }
      }
      agent_.backward(*grads, g_all, agent_tape);
    }
  }

  if (resolved_.surprise) {
    double e_sum = 0.0;
    double e_abs = 0.0;
    for (Index k = 0; k < steps; ++k) {
      e_sum += batch.mask[k] * e[k];
      e_abs += batch.mask[k] * std::abs(e[k]);
    }
    out.e_mean = e_sum / valid;
    out.e_abs_mean = e_abs / valid;
    if (grads != nullptr && cfg_.train_surprise && resolved_.beta != 0.0) {
      // dL/dV = dL/dy * beta * dE/dV
      Matrix g_v = surprise::energy_ratio_grad_online(est, cfg_.energy_order);
      for (Index k = 0; k < steps; ++k) g_v.row(k) *= grad_y[k] * resolved_.beta;
      surprise_.backward(*grads, g_v, surprise_tape);
    }
  }

  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss: valid_steps=" << valid << " reward[min,max,mean]=[" << batch.rewards.minCoeff()
        << ", " << batch.rewards.maxCoeff() << ", " << batch.rewards.sum() / valid << "]"
        << " q[min,max]=[" << q_all.minCoeff() << ", " << q_all.maxCoeff() << "]"
        << " y[min,max]=[" << y.minCoeff() << ", " << y.maxCoeff() << "]";
    if (e.size() > 0) msg << " E[min,max]=[" << e.minCoeff() << ", " << e.maxCoeff() << "]";
    throw NumericError(msg.str());
  }
  return out;
}

LossOutput Learner::train_step(const EpisodeBatch& batch) {
  online_.zero_grads();
  const LossOutput out = loss_and_grad(online_, batch);
  optimizer_.step(online_);
  return out;
}

std::uint64_t Learner::sync_offset(int i) const {
  if (cfg_.sync_mode == SyncMode::kSimultaneous) return 0;
  return static_cast<std::uint64_t>(i) * cfg_.update_interval / static_cast<std::uint64_t>(resolved_.m);
}

std::vector<int> Learner::sync_targets(std::uint64_t t) {
  std::vector<int> synced;
  for (int i = 0; i < resolved_.m; ++i) {
    const std::uint64_t off = sync_offset(i);
    if (t >= off && (t - off) % cfg_.update_interval == 0) {
      targets_.params[static_cast<std::size_t>(i)].copy_values_from(online_);
      targets_.last_sync[static_cast<std::size_t>(i)] = t;
      synced.push_back(i);
    }
  }
  return synced;
}

void Learner::sync_all(std::uint64_t t) {
  for (int i = 0; i < resolved_.m; ++i) {
    targets_.params[static_cast<std::size_t>(i)].copy_values_from(online_);
    targets_.last_sync[static_cast<std::size_t>(i)] = t;
  }
}

}  // namespace emix::learn
