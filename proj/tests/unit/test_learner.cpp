#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "emix/errors.hpp"
#include "emix/learner/learner.hpp"
#include "emix/learner/replay_buffer.hpp"
#include "emix/verify/checks.hpp"

using namespace emix;
using namespace emix::learn;

namespace {

const EnvDims kDims{2, 3, 4, 5};

LearnerConfig small(Algo algo) {
  LearnerConfig c;
  c.algo = algo;
  c.agent_hidden = 8;
  c.embed_dim = 4;
  c.hypernet_hidden = 8;
  c.surprise_hidden = 8;
  c.batch_size = 2;
  c.buffer_capacity = 8;
  return c;
}

// Agent net that outputs `bias` for every input.
void constant_agent(nn::ParamSet& p, const std::vector<double>& bias) {
  for (auto& e : p) {
    if (e.name.rfind("agent.", 0) == 0) e.value.setZero();
  }
  auto& b = p[p.index_of("agent.fc3.b")].value;
  for (std::size_t u = 0; u < bias.size(); ++u) b(0, static_cast<Index>(u)) = bias[u];
}

EpisodeBatch single_step_batch(double reward, bool terminated, Rng& rng) {
  auto ep = verify::random_episode(kDims, 1, terminated, rng);
  ep.rewards[0] = reward;
  const Episode* ptr = &ep;
  return make_batch(std::span<const Episode* const>(&ptr, 1), kDims.n_actions);
}

}  // namespace

TEST(Resolve, AlgorithmDefaults) {
  auto r = resolve(small(Algo::kEmix));
  EXPECT_EQ(r.m, 2);
  EXPECT_EQ(r.beta, 0.01);
  EXPECT_TRUE(r.surprise);
  EXPECT_EQ(r.mixer, mix::MixerKind::kQmix);
  auto q = small(Algo::kQmix);
  q.beta = 0.5;
  q.m_targets = 4;
  r = resolve(q);
  EXPECT_EQ(r.m, 1);
  EXPECT_EQ(r.beta, 0.0);
  EXPECT_FALSE(r.surprise);
  EXPECT_EQ(resolve(small(Algo::kTwinQmix)).m, 2);
  EXPECT_EQ(resolve(small(Algo::kVdn)).mixer, mix::MixerKind::kVdn);
  EXPECT_EQ(resolve(small(Algo::kIql)).mixer, mix::MixerKind::kIql);
}

TEST(Resolve, RejectsInvalidCombinations) {
  auto c = small(Algo::kEmix);
  c.m_targets = 0;
  EXPECT_THROW(resolve(c), ConfigError);
  c = small(Algo::kEmix);
  c.beta = -0.1;
  EXPECT_THROW(resolve(c), ConfigError);
  c = small(Algo::kEmix);
  c.mixer = mix::MixerKind::kIql;
  EXPECT_THROW(resolve(c), ConfigError);
  c = small(Algo::kQmix);
  c.gamma = 1.0;
  EXPECT_THROW(resolve(c), ConfigError);
  c = small(Algo::kQmix);
  c.buffer_capacity = 2;
  EXPECT_THROW(resolve(c), ConfigError);
  EXPECT_THROW(algo_from_string("coma"), ConfigError);
  EXPECT_EQ(algo_from_string("twinqmix"), Algo::kTwinQmix);
}

TEST(Learner, SameSeedSameParameters) {
  Learner a(small(Algo::kEmix), kDims, 5), b(small(Algo::kEmix), kDims, 5), c(small(Algo::kEmix), kDims, 6);
  EXPECT_TRUE(a.online().same_values(b.online()));
  EXPECT_FALSE(a.online().same_values(c.online()));
  EXPECT_TRUE(a.targets().params[1].same_values(a.online()));
}

TEST(Learner, MinOfTwoHandSetTargets) {
  auto cfg = small(Algo::kTwinQmix);
  cfg.mixer = mix::MixerKind::kVdn;
  Learner l(cfg, kDims, 1);
  constant_agent(l.targets().params[0], {1.5, 0.0, -1.0});  // 2 agents -> 3.0
  constant_agent(l.targets().params[1], {0.5, 1.25, 0.0});  // 2 agents -> 2.5
  Rng rng(2);
  const auto b = single_step_batch(1.0, false, rng);
  const auto tv = l.target_values(b);
  EXPECT_DOUBLE_EQ(tv.per_target(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(tv.per_target(0, 1), 2.5);
  const Vector y = l.td_target(b, Vector());
  EXPECT_NEAR(y[0], 1.0 + 0.99 * 2.5, 1e-12);
  EXPECT_NEAR(y[0], 3.475, 1e-12);
}

TEST(Learner, TerminalStepDropsBootstrap) {
  auto cfg = small(Algo::kVdn);
  Learner l(cfg, kDims, 1);
  constant_agent(l.targets().params[0], {4.0, 0.0, 0.0});
  Rng rng(3);
  EXPECT_DOUBLE_EQ(l.td_target(single_step_batch(-0.1, true, rng), Vector())[0], -0.1);
}

TEST(Learner, EnergyTermEntersTargetScaledByBeta) {
  auto cfg = small(Algo::kEmix);
  cfg.beta = 0.25;
  Learner l(cfg, kDims, 1);
  Rng rng(4);
  const auto b = verify::random_batch(kDims, 2, 3, rng);
  Vector e = Vector::LinSpaced(b.steps(), -1.0, 1.0);
  const Vector y0 = l.td_target(b, Vector());
  const Vector y1 = l.td_target(b, e);
  EXPECT_TRUE((y1 - y0).isApprox(0.25 * e, 1e-12));
}

TEST(Learner, IdenticalTargetsMinEqualsAny) {
  auto cfg = small(Algo::kEmix);
  cfg.m_targets = 3;
  Learner l(cfg, kDims, 9);
  Rng rng(5);
  const auto b = verify::random_batch(kDims, 3, 4, rng);
  const auto tv = l.target_values(b);
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(tv.reduced, tv.per_target.col(j));
}

TEST(Learner, SingleTargetEmixMatchesQmixTarget) {
  auto e = small(Algo::kEmix);
  e.m_targets = 1;
  Learner le(e, kDims, 3), lq(small(Algo::kQmix), kDims, 3);
  Rng rng(6);
  const auto b = verify::random_batch(kDims, 3, 4, rng);
  EXPECT_EQ(le.target_values(b).reduced, lq.target_values(b).reduced);
}

TEST(Learner, MaxOfMinNeverExceedsMinOfMax) {
  auto a = small(Algo::kEmix);
  a.m_targets = 2;
  auto b = a;
  b.reduction = TargetReduction::kMaxOfMin;
  Learner la(a, kDims, 4), lb(b, kDims, 4);
  Rng rng(7);
  for (auto& t : la.targets().params) {
    std::normal_distribution<double> n(0, 0.3);
    for (auto& e : t) {
      for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += n(rng);
    }
  }
  lb.targets() = la.targets();
  const auto batch = verify::random_batch(kDims, 3, 4, rng);
  const Vector ra = la.target_values(batch).reduced;
  const Vector rb = lb.target_values(batch).reduced;
  for (Index k = 0; k < ra.size(); ++k) EXPECT_LE(rb[k], ra[k] + 1e-12);
}

TEST(Learner, LossIsHalfSquaredResidual) {
  auto cfg = small(Algo::kVdn);
  Learner l(cfg, kDims, 1);
  constant_agent(l.online(), {0.0, 0.0, 0.0});
  Rng rng(8);
  EXPECT_DOUBLE_EQ(l.loss(l.online(), single_step_batch(2.0, true, rng)).loss, 2.0);
  EXPECT_DOUBLE_EQ(l.loss(l.online(), single_step_batch(0.0, true, rng)).loss, 0.0);
}

TEST(Learner, PaddingDoesNotAffectLossOrGradients) {
  for (Algo algo : {Algo::kEmix, Algo::kQmix, Algo::kIql}) {
    Learner l(small(algo), kDims, 2);
    Rng rng(9);
    std::vector<Episode> eps{verify::random_episode(kDims, 5, false, rng), verify::random_episode(kDims, 2, true, rng)};
    std::vector<const Episode*> ptrs{&eps[0], &eps[1]};
    const auto clean = make_batch(ptrs, kDims.n_actions);
    auto dirty = clean;
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 3; t <= clean.max_t; ++t) {
      dirty.states.row(dirty.state_row(1, t)).setConstant(u(rng));
      for (int a = 0; a < kDims.n_agents; ++a) dirty.observations.row(dirty.obs_row(1, t, a)).setConstant(u(rng));
    }
    for (int t = 2; t < clean.max_t; ++t) {
      dirty.rewards[dirty.step_index(1, t)] = u(rng);
      for (int a = 0; a < kDims.n_agents; ++a) {
        dirty.actions[static_cast<std::size_t>(dirty.step_index(1, t) * kDims.n_agents + a)] = 2;
      }
    }
    nn::ParamSet pa = l.online(), pb = l.online();
    pa.zero_grads();
    pb.zero_grads();
    const auto la = l.loss_and_grad(pa, clean);
    const auto lb = l.loss_and_grad(pb, dirty);
    EXPECT_NEAR(la.loss, lb.loss, 1e-12) << to_string(algo);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_LE((pa[i].grad - pb[i].grad).cwiseAbs().maxCoeff(), 1e-12) << pa[i].name;
    }
  }
}

TEST(Learner, FullLossGradientMatchesFiniteDifferences) {
  for (const auto& r : verify::check_gradients()) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}

TEST(Learner, StaggeredSyncSchedule) {
  auto cfg = small(Algo::kTwinQmix);
  cfg.update_interval = 200;
  Learner l(cfg, kDims, 1);
  std::set<std::uint64_t> s0, s1;
  for (std::uint64_t t = 0; t <= 1000; ++t) {
    for (int i : l.sync_targets(t)) (i == 0 ? s0 : s1).insert(t);
  }
  EXPECT_EQ(s0, (std::set<std::uint64_t>{0, 200, 400, 600, 800, 1000}));
  EXPECT_EQ(s1, (std::set<std::uint64_t>{100, 300, 500, 700, 900}));
}

TEST(Learner, SimultaneousAndSingleTargetSync) {
  auto cfg = small(Algo::kEmix);
  cfg.update_interval = 50;
  cfg.sync_mode = SyncMode::kSimultaneous;
  Learner l(cfg, kDims, 1);
  EXPECT_EQ(l.sync_targets(100), (std::vector<int>{0, 1}));
  EXPECT_TRUE(l.sync_targets(101).empty());
  Learner q(small(Algo::kQmix), kDims, 1);
  EXPECT_EQ(q.sync_offset(0), 0u);
}

TEST(Learner, SyncedTargetReproducesOnline) {
  auto cfg = small(Algo::kEmix);
  cfg.update_interval = 10;
  Learner l(cfg, kDims, 3);
  Rng rng(10);
  const auto b = verify::random_batch(kDims, 2, 3, rng);
  l.train_step(b);
  EXPECT_FALSE(l.targets().params[0].same_values(l.online()));
  l.sync_targets(10);
  EXPECT_TRUE(l.targets().params[0].same_values(l.online()));
  EXPECT_FALSE(l.targets().params[1].same_values(l.online()));
  l.sync_targets(15);
  EXPECT_TRUE(l.targets().params[1].same_values(l.online()));
}

TEST(Learner, TrainStepIsDeterministic) {
  Learner a(small(Algo::kEmix), kDims, 4), b(small(Algo::kEmix), kDims, 4);
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    const auto batch = verify::random_batch(kDims, 2, 3, rng);
    EXPECT_EQ(a.train_step(batch).loss, b.train_step(batch).loss);
  }
  EXPECT_TRUE(a.online().same_values(b.online()));
}

TEST(Learner, FrozenSurpriseMixerDoesNotMove) {
  auto cfg = small(Algo::kEmix);
  cfg.train_surprise = false;
  Learner l(cfg, kDims, 4);
  const nn::ParamSet before = l.online();
  Rng rng(12);
  l.train_step(verify::random_batch(kDims, 2, 3, rng));
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool is_surprise = before[i].name.rfind("surprise.", 0) == 0;
    EXPECT_EQ(before[i].value == l.online()[i].value, is_surprise) << before[i].name;
  }
}

TEST(Learner, RejectsMismatchedBatch) {
  Learner l(small(Algo::kQmix), kDims, 1);
  Rng rng(13);
  const auto b = verify::random_batch(EnvDims{3, 3, 4, 5}, 2, 3, rng);
  EXPECT_THROW(l.loss(l.online(), b), DimensionError);
}

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer r(3);
  for (int i = 0; i < 4; ++i) {
    Episode e;
    e.episode_return = i;
    r.insert(e);
  }
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.at(0).episode_return, 1.0);
  EXPECT_EQ(r.at(2).episode_return, 3.0);
}

TEST(ReplayBuffer, FullSampleReturnsEachEpisodeOnce) {
  ReplayBuffer r(10);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) r.insert(verify::random_episode(kDims, 2, false, rng));
  auto idx = r.sample_indices(10, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(idx[i], i);
}

TEST(ReplayBuffer, UniformSampling) {
  ReplayBuffer r(100);
  for (int i = 0; i < 100; ++i) r.insert(Episode{});
  Rng rng(2024);
  constexpr int kDraws = 10'000;
  std::vector<int> counts(100, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[r.sample_indices(1, rng)[0]];
  const double expected = kDraws / 100.0;
  const double sigma = std::sqrt(kDraws * 0.01 * 0.99);
  double chi2 = 0.0;
  int outside = 0;
  for (int c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    outside += std::abs(c - expected) > 3 * sigma;
  }
  EXPECT_LT(chi2, 148.23);  // chi-squared, 99 dof, p = 0.001
  EXPECT_LE(outside, 2);    // 100 bins at 3 sigma: ~0.27 expected outside
}

TEST(ReplayBuffer, UsageErrors) {
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
  ReplayBuffer r(4);
  Rng rng(3);
  EXPECT_THROW(r.sample_indices(1, rng), UsageError);
  r.insert(verify::random_episode(kDims, 2, false, rng));
  EXPECT_THROW(r.sample(2, rng, kDims.n_actions), UsageError);
  EXPECT_THROW(r.sample_indices(0, rng), UsageError);
}

TEST(EpisodeBatch, PadsAndMasks) {
  Rng rng(4);
  std::vector<Episode> eps{verify::random_episode(kDims, 4, false, rng), verify::random_episode(kDims, 2, true, rng)};
  std::vector<const Episode*> ptrs{&eps[0], &eps[1]};
  const auto b = make_batch(ptrs, kDims.n_actions);
  EXPECT_EQ(b.max_t, 4);
  EXPECT_EQ(b.valid_count(), 6.0);
  EXPECT_EQ(b.mask[b.step_index(1, 1)], 1.0);
  EXPECT_EQ(b.mask[b.step_index(1, 2)], 0.0);
  EXPECT_EQ(b.terminated[b.step_index(1, 1)], 1.0);
  EXPECT_TRUE(b.states.row(b.state_row(1, 4)).isZero(0.0));
  EXPECT_EQ(b.states.row(b.state_row(1, 2)), eps[1].states.row(2));
  EXPECT_EQ(b.action(0, 3, 1), eps[0].actions[3 * 2 + 1]);
}

TEST(EpisodeBatch, ValidateCatchesBrokenInvariants) {
  Rng rng(5);
  auto b = verify::random_batch(kDims, 2, 3, rng);
  auto holes = b;
  holes.mask[holes.step_index(0, 1)] = 0.0;
  EXPECT_THROW(holes.validate(), ConfigError);
  auto bad_action = b;
  bad_action.actions[0] = 7;
  EXPECT_THROW(bad_action.validate(), ConfigError);
  auto bad_reward = b;
  bad_reward.rewards[0] = std::nan("");
  EXPECT_THROW(bad_reward.validate(), NumericError);
  EXPECT_THROW(make_batch(std::span<const Episode* const>(), 3), UsageError);
}
