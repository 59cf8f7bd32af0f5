#include "emix/verify/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "emix/env/spurious_capture.hpp"
#include "emix/learner/replay_buffer.hpp"
#include "emix/learner/trainer.hpp"
#include "emix/mixer/mixer.hpp"
#include "emix/nn/grad_check.hpp"
#include "emix/surprise/surprise.hpp"

namespace emix::verify {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

learn::EnvDims small_dims() { return {2, 3, 4, 5}; }

learn::LearnerConfig small_config(learn::Algo algo) {
  learn::LearnerConfig c;
  c.algo = algo;
  c.agent_hidden = 8;
  c.embed_dim = 4;
  c.hypernet_hidden = 8;
  c.surprise_hidden = 8;
  c.batch_size = 2;
  c.buffer_capacity = 8;
  return c;
}

void perturb(nn::ParamSet& p, double scale, Rng& rng) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& e : p) {
    for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += n(rng);
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

learn::Episode random_episode(const learn::EnvDims& dims, int length, bool terminal, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> act(0, dims.n_actions - 1);
  learn::Episode ep;
  ep.length = length;
  ep.n_agents = dims.n_agents;
  ep.states = Matrix(length + 1, dims.state_dim);
  ep.observations = Matrix((length + 1) * dims.n_agents, dims.obs_dim);
  for (Index i = 0; i < ep.states.size(); ++i) ep.states.data()[i] = u(rng);
  for (Index i = 0; i < ep.observations.size(); ++i) ep.observations.data()[i] = u(rng);
  for (int i = 0; i < length * dims.n_agents; ++i) ep.actions.push_back(act(rng));
  for (int t = 0; t < length; ++t) {
    ep.rewards.push_back(u(rng));
    ep.terminated.push_back(terminal && t == length - 1);
    ep.episode_return += ep.rewards.back();
  }
  return ep;
}

learn::EpisodeBatch random_batch(const learn::EnvDims& dims, int batch_size, int max_t, Rng& rng) {
  std::uniform_int_distribution<int> len(1, max_t);
  std::bernoulli_distribution coin(0.5);
  std::vector<learn::Episode> eps;
  for (int b = 0; b < batch_size; ++b) eps.push_back(random_episode(dims, b == 0 ? max_t : len(rng), coin(rng), rng));
  std::vector<const learn::Episode*> ptrs;
  for (const auto& e : eps) ptrs.push_back(&e);
  return learn::make_batch(ptrs, dims.n_actions);
}

CheckResult check_lse_properties(int vectors, double slack, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> big(-1e6, 1e6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long violations[4] = {0, 0, 0, 0};
  double worst[4] = {0, 0, 0, 0};
  auto note = [&](int k, double excess) {
    if (excess > slack) ++violations[k];
    worst[k] = std::max(worst[k], excess);
  };
  for (int i = 0; i < vectors; ++i) {
    const int n = dim(rng);
    Matrix x(1, n), y(1, n), up(1, n), shifted(1, n);
    // Mix of wide and clustered vectors so the soft and hard regimes are both hit.
    const double spread = unit(rng) < 0.5 ? 1e6 : std::pow(10.0, 6.0 * unit(rng) - 3.0);
    const double centre = big(rng);
    for (int j = 0; j < n; ++j) {
      x(0, j) = std::clamp(centre + spread * (2.0 * unit(rng) - 1.0), -1e6, 1e6);
      y(0, j) = std::clamp(x(0, j) + spread * (2.0 * unit(rng) - 1.0), -1e6, 1e6);
      up(0, j) = std::min(1e6, x(0, j) + spread * unit(rng));
    }
    const double c = big(rng);
    for (int j = 0; j < n; ++j) shifted(0, j) = x(0, j) + c;
    const double lx = surprise::energy_lse(x)[0];
    const double ly = surprise::energy_lse(y)[0];
    const double lup = surprise::energy_lse(up)[0];
    const double lshift = surprise::energy_lse(shifted)[0];
    double inf_norm = 0.0;
    double shift_exact = 0.0;  // |(x_j + c) - x_j - c| rounding, added to the shift tolerance
    for (int j = 0; j < n; ++j) {
      inf_norm = std::max(inf_norm, std::abs(x(0, j) - y(0, j)));
      shift_exact = std::max(shift_exact, std::abs((shifted(0, j) - x(0, j)) - c));
    }
    note(0, std::abs(lx - ly) - inf_norm);
    note(1, lx - lup);
    note(2, std::abs(lshift - (lx + c)) - shift_exact);
    const double mx = x.maxCoeff();
    note(3, std::max(mx - lx, lx - (mx + std::log(static_cast<double>(n)))));
  }
  CheckResult r;
  r.name = "lse_properties";
  r.seconds = seconds_since(t0);
  const long total = violations[0] + violations[1] + violations[2] + violations[3];
  r.passed = total == 0;
  std::ostringstream d;
  d << vectors << " vectors; violations nonexpansive=" << violations[0] << " monotone=" << violations[1]
    << " shift=" << violations[2] << " bounds=" << violations[3] << "; worst excess " << fmt(worst[0]) << ", "
    << fmt(worst[1]) << ", " << fmt(worst[2]) << ", " << fmt(worst[3]);
  r.detail = d.str();
  return r;
}

std::vector<CheckResult> check_gradients(double tol, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const auto dims = small_dims();
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-6;
  constexpr std::size_t kAll = 1'000'000;

  auto report = [&](const std::string& name, const nn::GradCheckReport& g, Clock::time_point t0) {
    CheckResult r;
    r.name = name;
    r.seconds = seconds_since(t0);
    r.passed = g.passed && g.checked > 0;
    r.detail = std::to_string(g.checked) + " coords, max rel err " + fmt(g.max_rel_error) + " (worst " +
               g.worst_param + "[" + std::to_string(g.worst_offset) + "] analytic " + fmt(g.worst_analytic) +
               " numeric " + fmt(g.worst_numeric) + ")";
    out.push_back(r);
  };

  // Full loss for every algorithm, targets moved away from the online net.
  const std::pair<learn::Algo, const char*> algos[] = {
      {learn::Algo::kEmix, "grad_full_loss_emix"}, {learn::Algo::kQmix, "grad_full_loss_qmix"},
      {learn::Algo::kTwinQmix, "grad_full_loss_twinqmix"}, {learn::Algo::kVdn, "grad_full_loss_vdn"},
      {learn::Algo::kIql, "grad_full_loss_iql"}};
  for (const auto& [algo, name] : algos) {
    const auto t0 = Clock::now();
    auto cfg = small_config(algo);
    if (algo == learn::Algo::kEmix) cfg.beta = 0.5;  // large beta so the surprise path is exercised
    learn::Learner learner(cfg, dims, seed);
    Rng rng(seed + 100);
    for (auto& t : learner.targets().params) perturb(t, 0.3, rng);
    const auto batch = random_batch(dims, 2, 3, rng);
    nn::ParamSet p = learner.online();
    p.zero_grads();
    learner.loss_and_grad(p, batch);
    const auto g = nn::finite_diff_check([&](const nn::ParamSet& q) { return learner.loss(q, batch).loss; }, p, kStep,
                                         tol, kAll, seed, kFloor);
    report(name, g, t0);
  }

  // Mixer alone, with the chosen utilities as an extra checked input.
  {
    const auto t0 = Clock::now();
    nn::ParamSet p;
    mix::Mixer mixer(p, mix::MixerConfig{mix::MixerKind::kQmix, 4, 8, 2}, 3, 6);
    const auto q_idx = p.add("input.q", {5, 3});
    Rng rng(seed + 200);
    mixer.init(p, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Index i = 0; i < p[q_idx].value.size(); ++i) p[q_idx].value.data()[i] = n(rng);
    Matrix states(5, 6);
    for (Index i = 0; i < states.size(); ++i) states.data()[i] = n(rng);
    Vector w(5);
    for (Index i = 0; i < 5; ++i) w[i] = n(rng);
    auto f = [&](const nn::ParamSet& q) {
      return w.dot(mixer.mix(q, q[q_idx].value, states, nullptr).q_tot);
    };
    p.zero_grads();
    mix::MixTape tape;
    mixer.mix(p, p[q_idx].value, states, &tape);
    p[q_idx].grad += mixer.backward(p, w, tape);
    report("grad_mixer", nn::finite_diff_check(f, p, kStep, tol, kAll, seed, kFloor), t0);
  }

  // Surprise mixer alone through the energy operator.
  {
    const auto t0 = Clock::now();
    nn::ParamSet p;
    surprise::SurpriseMixer sm(p, surprise::SurpriseMixerConfig{5, 2, 3, 4, 8});
    Rng rng(seed + 300);
    sm.init(p, rng);
    const auto x_idx = p.add("input.x", {6, sm.input_dim()});
    std::normal_distribution<double> n(0.0, 1.0);
    for (Index i = 0; i < p[x_idx].value.size(); ++i) p[x_idx].value.data()[i] = n(rng);
    Vector w(6);
    for (Index i = 0; i < 6; ++i) w[i] = n(rng);
    auto f = [&](const nn::ParamSet& q) {
      return w.dot(surprise::energy_lse(sm.forward(q, q[x_idx].value, nullptr)));
    };
    p.zero_grads();
    nn::MlpTape tape;
    const Matrix v = sm.forward(p, p[x_idx].value, &tape);
    Matrix gv = surprise::energy_lse_grad(v);
    for (Index i = 0; i < gv.rows(); ++i) gv.row(i) *= w[i];
    p[x_idx].grad += sm.backward(p, gv, tape);
    report("grad_surprise_mixer", nn::finite_diff_check(f, p, kStep, tol, kAll, seed, kFloor), t0);
  }
  return out;
}

CheckResult check_monotonic_mixing(int draws, int enumerations, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> agents(1, 6);
  long negative = 0;
  double most_negative = 0.0;
  for (int i = 0; i < draws; ++i) {
    const int na = agents(rng);
    nn::ParamSet p;
    mix::Mixer mixer(p, mix::MixerConfig{mix::MixerKind::kQmix, 8, 16, 1 + (i % 2)}, na, 7);
    mixer.init(p, rng);
    perturb(p, 0.5, rng);  // off the init distribution, signs included
    Matrix q(1, na), s(1, 7);
    for (Index j = 0; j < q.size(); ++j) q.data()[j] = 5.0 * n(rng);
    for (Index j = 0; j < s.size(); ++j) s.data()[j] = 2.0 * n(rng);
    mix::MixTape tape;
    mixer.mix(p, q, s, &tape);
    const Matrix jac = mixer.q_tot_jacobian(tape);
    for (Index j = 0; j < jac.size(); ++j) {
      if (jac.data()[j] < 0.0) ++negative;
      most_negative = std::min(most_negative, jac.data()[j]);
    }
  }

  constexpr int kAgents = 3, kActions = 4;
  int attained = 0;
  for (int i = 0; i < enumerations; ++i) {
    nn::ParamSet p;
    mix::Mixer mixer(p, mix::MixerConfig{mix::MixerKind::kQmix, 8, 16, 2}, kAgents, 5);
    mixer.init(p, rng);
    perturb(p, 0.5, rng);
    Matrix s(1, 5), table(kAgents, kActions);
    for (Index j = 0; j < s.size(); ++j) s.data()[j] = n(rng);
    for (Index j = 0; j < table.size(); ++j) table.data()[j] = 3.0 * n(rng);
    const auto hw = mixer.hypernet_forward(p, s, nullptr);
    double greedy[kAgents];
    for (int a = 0; a < kAgents; ++a) greedy[a] = table.row(a).maxCoeff();
    const double greedy_value = mixer.mix_with(hw, 0, greedy);
    double best = -std::numeric_limits<double>::infinity();
    for (int code = 0; code < kActions * kActions * kActions; ++code) {
      double q[kAgents];
      int c = code;
      for (int a = 0; a < kAgents; ++a, c /= kActions) q[a] = table(a, c % kActions);
      best = std::max(best, mixer.mix_with(hw, 0, q));
    }
    if (greedy_value >= best) ++attained;
  }
  CheckResult r;
  r.name = "monotonic_mixing";
  r.seconds = seconds_since(t0);
  r.passed = negative == 0 && attained == enumerations;
  r.detail = std::to_string(draws) + " draws, negative partials " + std::to_string(negative) + " (min " +
             fmt(most_negative) + "); greedy attains joint max " + std::to_string(attained) + "/" +
             std::to_string(enumerations);
  return r;
}

CheckResult check_reduction_lattice(int updates, std::uint64_t seed) {
  const auto t0 = Clock::now();
  env::EnvConfig env_cfg;
  env::SpuriousCapture environment(env_cfg);
  Rng policy_rng(seed);
  std::uniform_int_distribution<int> act(0, env::kNumActions - 1);
  learn::Policy random_policy = [&](const Matrix& obs, std::span<const int>) {
    std::vector<int> a(static_cast<std::size_t>(obs.rows()));
    for (auto& x : a) x = act(policy_rng);
    return a;
  };
  learn::ReplayBuffer buffer(64);
  for (int i = 0; i < 64; ++i) buffer.insert(learn::rollout(environment, seed * 1000 + i, random_policy));
  const learn::EnvDims dims{env_cfg.n_agents, env::kNumActions, env_cfg.obs_dim(), env_cfg.state_dim()};

  auto losses = [&](learn::LearnerConfig cfg) {
    cfg.batch_size = 16;
    learn::Learner learner(cfg, dims, seed);
    Rng sample_rng(seed + 7);
    std::vector<double> out;
    for (int u = 0; u < updates; ++u) {
      const auto batch = buffer.sample(16, sample_rng, dims.n_actions);
      out.push_back(learner.train_step(batch).loss);
      // 100 env steps per update: with interval 400 every staggered offset fires.
      learner.sync_targets(static_cast<std::uint64_t>(u + 1) * 100);
    }
    return out;
  };
  auto compare = [&](const std::vector<double>& a, const std::vector<double>& b, int& first_diff) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!bit_equal(a[i], b[i])) {
        first_diff = static_cast<int>(i);
        return false;
      }
    }
    return a.size() == b.size();
  };

  learn::LearnerConfig base;
  base.update_interval = 400;
  auto emix = [&](int m, std::optional<mix::MixerKind> mixer) {
    auto c = base;
    c.algo = learn::Algo::kEmix;
    c.beta = 0.0;
    c.m_targets = m;
    c.mixer = mixer;
    return c;
  };
  auto plain = [&](learn::Algo a) {
    auto c = base;
    c.algo = a;
    return c;
  };
  struct Pair {
    const char* name;
    learn::LearnerConfig lhs, rhs;
  };
  const Pair pairs[] = {{"emix(b0,m1)=qmix", emix(1, std::nullopt), plain(learn::Algo::kQmix)},
                        {"emix(b0,m2)=twinqmix", emix(2, std::nullopt), plain(learn::Algo::kTwinQmix)},
                        {"emix(b0,m1,vdn)=vdn", emix(1, mix::MixerKind::kVdn), plain(learn::Algo::kVdn)}};
  CheckResult r;
  r.name = "reduction_lattice";
  r.passed = true;
  std::ostringstream d;
  for (const auto& p : pairs) {
    int first_diff = -1;
    const auto a = losses(p.lhs);
    const auto b = losses(p.rhs);
    const bool ok = compare(a, b, first_diff);
    r.passed = r.passed && ok;
    d << p.name << (ok ? " identical" : " DIFFERS at update " + std::to_string(first_diff)) << "; ";
  }
  d << updates << " updates each";
  r.detail = d.str();
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult check_target_properties(int batches, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto dims = small_dims();
  auto cfg = small_config(learn::Algo::kEmix);
  cfg.beta = 0.5;
  cfg.m_targets = 3;
  learn::Learner learner(cfg, dims, seed);
  Rng rng(seed + 1);
  for (auto& t : learner.targets().params) perturb(t, 0.3, rng);

  long min_violations = 0;
  long online_leaks = 0;
  long target_static = 0;
  double worst_chain = 0.0;
  for (int i = 0; i < batches; ++i) {
    const auto batch = random_batch(dims, 4, 5, rng);
    const auto tv = learner.target_values(batch);
    for (Index k = 0; k < tv.reduced.size(); ++k) {
      for (Index j = 0; j < tv.per_target.cols(); ++j) {
        if (tv.reduced[k] > tv.per_target(k, j)) ++min_violations;
      }
    }

    // Online parameters never reach the bootstrapped part of y.
    nn::ParamSet& online = learner.online();
    const Index coords = online.scalar_count();
    std::uniform_int_distribution<Index> pick(0, coords - 1);
    for (int s = 0; s < 10; ++s) {
      const auto c = nn::flat_coord(online, pick(rng));
      double& v = online[c.entry].value.data()[c.offset];
      const double saved = v;
      v += 1e-3;
      const auto moved = learner.target_values(batch);
      v = saved;
      for (Index k = 0; k < tv.reduced.size(); ++k) {
        if (!bit_equal(moved.reduced[k], tv.reduced[k])) ++online_leaks;
      }
    }

    // Online parameters reach y only through beta * (-lse(V_online)).
    const auto e_of = [&](const nn::ParamSet& p) {
      return surprise::energy_ratio(learner.surprise_values(p, batch), cfg.beta.value()).e;
    };
    for (int s = 0; s < 10; ++s) {
      const auto c = nn::flat_coord(online, pick(rng));
      double& v = online[c.entry].value.data()[c.offset];
      const double saved = v;
      constexpr double h = 1e-5;
      v = saved + h;
      const Vector e_plus = e_of(online);
      const Vector y_plus = learner.td_target(batch, e_plus);
      const Vector lse_plus = surprise::energy_lse(learner.surprise_values(online, batch).v_surp);
      v = saved - h;
      const Vector e_minus = e_of(online);
      const Vector y_minus = learner.td_target(batch, e_minus);
      const Vector lse_minus = surprise::energy_lse(learner.surprise_values(online, batch).v_surp);
      v = saved;
      const Vector dy = (y_plus - y_minus) / (2 * h);
      const Vector expected = -cfg.beta.value() * (lse_plus - lse_minus) / (2 * h);
      for (Index k = 0; k < dy.size(); ++k) {
        if (batch.mask[k] == 0.0) continue;
        worst_chain = std::max(worst_chain, std::abs(dy[k] - expected[k]));
      }
    }

    // Target parameters move y.
    const Vector e0 = e_of(learner.online());
    const Vector y0 = learner.td_target(batch, e0);
    auto& target_bank = learner.targets().params;
    const auto saved_bank = target_bank;
    for (auto& t : target_bank) perturb(t, 0.05, rng);
    const Vector y1 = learner.td_target(batch, e_of(learner.online()));
    target_bank = saved_bank;
    if ((y1 - y0).cwiseAbs().maxCoeff() <= 1e-8) ++target_static;
  }

  // Gradients land only in the online set: target grad slots stay zero.
  const auto batch = random_batch(dims, 4, 5, rng);
  learner.online().zero_grads();
  learner.loss_and_grad(learner.online(), batch);
  double target_grad = 0.0;
  for (const auto& t : learner.targets().params) target_grad += t.grad_norm_squared();

  CheckResult r;
  r.name = "target_properties";
  r.seconds = seconds_since(t0);
  r.passed = min_violations == 0 && online_leaks == 0 && target_static == 0 && worst_chain < 1e-6 &&
             target_grad == 0.0;
  std::ostringstream d;
  d << batches << " batches; min violations " << min_violations << ", online->bootstrap leaks " << online_leaks
    << ", batches where targets did not move y " << target_static << ", max |dy/dtheta - beta dE_online/dtheta| "
    << fmt(worst_chain) << ", target grad norm^2 " << fmt(target_grad);
  r.detail = d.str();
  return r;
}

std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> out;
  out.push_back(check_lse_properties());
  for (auto& g : check_gradients()) out.push_back(std::move(g));
  out.push_back(check_monotonic_mixing());
  out.push_back(check_reduction_lattice());
  out.push_back(check_target_properties());
  return out;
}

}  // namespace emix::verify
