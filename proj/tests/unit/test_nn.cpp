#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "emix/errors.hpp"
#include "emix/nn/checkpoint.hpp"
#include "emix/nn/dense.hpp"
#include "emix/nn/grad_check.hpp"
#include "emix/nn/optimizer.hpp"
#include "emix/nn/param_set.hpp"

using namespace emix;
using namespace emix::nn;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void set_identity(ParamSet& p, const Dense& d) {
  auto& w = p[d.weight_index()].value;
  w.setZero();
  for (Index i = 0; i < std::min(w.rows(), w.cols()); ++i) w(i, i) = 1.0;
  p[d.bias_index()].value.setZero();
}

}  // namespace

TEST(ParamSet, RejectsDuplicateNames) {
  ParamSet p;
  p.add("a.w", {2, 3});
  EXPECT_THROW(p.add("a.w", {2, 3}), ConfigError);
  EXPECT_THROW(p.add("b.w", {0, 3}), ConfigError);
}

TEST(ParamSet, FlatCoordWalksEntriesInOrder) {
  ParamSet p;
  p.add("x", {2, 3});
  p.add("y", {4});
  EXPECT_EQ(p.scalar_count(), 10);
  const auto c = flat_coord(p, 7);
  EXPECT_EQ(c.entry, 1u);
  EXPECT_EQ(c.offset, 1);
  EXPECT_EQ(p[1].value.rows(), 1);
  EXPECT_EQ(p[1].value.cols(), 4);
}

TEST(ParamSet, CopyValuesRequiresMatchingLayout) {
  ParamSet a, b;
  a.add("x", {2, 2});
  b.add("x", {2, 3});
  EXPECT_THROW(a.copy_values_from(b), DimensionError);
}

TEST(Dense, IdentityPassesInputThrough) {
  ParamSet p;
  Dense d(p, "l", {2, 2, Activation::kIdentity});
  set_identity(p, d);
  Matrix x(1, 2);
  x << 1, 0;
  EXPECT_EQ(d.forward(p, x, nullptr), x);
}

TEST(Dense, ReluClampsNegatives) {
  ParamSet p;
  Dense d(p, "l", {2, 2, Activation::kRelu});
  set_identity(p, d);
  Matrix x(1, 2);
  x << -1, 2;
  const Matrix y = d.forward(p, x, nullptr);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 2.0);
}

TEST(Dense, MatchesNaiveTripleLoop) {
  Rng rng(11);
  ParamSet p;
  Dense d(p, "l", {3, 5, Activation::kIdentity});
  d.init(p, rng);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix y = d.forward(p, x, nullptr);
  const Matrix& w = p[d.weight_index()].value;
  const Matrix& b = p[d.bias_index()].value;
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 5; ++j) {
      double acc = b(0, j);
      for (Index k = 0; k < 3; ++k) acc += x(i, k) * w(k, j);
      EXPECT_NEAR(y(i, j), acc, 1e-12 * std::max(1.0, std::abs(acc)));
    }
  }
}

TEST(Dense, InitWithinFanInBound) {
  Rng rng(3);
  ParamSet p;
  Dense d(p, "l", {16, 8, Activation::kRelu});
  d.init(p, rng);
  const double bound = 1.0 / std::sqrt(16.0);
  EXPECT_LE(p[d.weight_index()].value.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(p[d.bias_index()].value.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(p[d.weight_index()].value.cwiseAbs().maxCoeff(), 0.5 * bound);
}

TEST(Dense, WrongWidthNamesLayer) {
  ParamSet p;
  Dense d(p, "agent.fc1", {3, 2, Activation::kIdentity});
  try {
    d.forward(p, Matrix::Zero(1, 4), nullptr);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("agent.fc1"), std::string::npos);
  }
}

TEST(Dense, BackwardWithoutForwardIsUsageError) {
  ParamSet p;
  Dense d(p, "l", {2, 2, Activation::kIdentity});
  DenseTape tape;
  EXPECT_THROW(d.backward(p, Matrix::Ones(1, 2), tape), UsageError);
}

TEST(Dense, SumLossWeightGradIsColumnSumsOfInput) {
  Rng rng(5);
  ParamSet p;
  Dense d(p, "l", {3, 2, Activation::kIdentity});
  d.init(p, rng);
  const Matrix x = random_matrix(6, 3, rng);
  DenseTape tape;
  d.forward(p, x, &tape);
  p.zero_grads();
  d.backward(p, Matrix::Ones(6, 2), tape);
  const Matrix& gw = p[d.weight_index()].grad;
  for (Index k = 0; k < 3; ++k) {
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(gw(k, j), x.col(k).sum(), 1e-12);
  }
  EXPECT_NEAR(p[d.bias_index()].grad(0, 0), 6.0, 1e-12);
}

TEST(Dense, ZeroUpstreamGradLeavesGradsUnchanged) {
  Rng rng(6);
  ParamSet p;
  Dense d(p, "l", {3, 2, Activation::kTanh});
  d.init(p, rng);
  DenseTape tape;
  d.forward(p, random_matrix(2, 3, rng), &tape);
  p[0].grad.setConstant(0.25);
  p[1].grad.setConstant(-0.5);
  d.backward(p, Matrix::Zero(2, 2), tape);
  EXPECT_TRUE((p[0].grad.array() == 0.25).all());
  EXPECT_TRUE((p[1].grad.array() == -0.5).all());
}

TEST(Dense, BackwardAccumulatesLinearly) {
  Rng rng(7);
  ParamSet p;
  Dense d(p, "l", {4, 3, Activation::kRelu});
  d.init(p, rng);
  DenseTape tape;
  d.forward(p, random_matrix(5, 4, rng), &tape);
  const Matrix g1 = random_matrix(5, 3, rng), g2 = random_matrix(5, 3, rng);
  p.zero_grads();
  const Matrix dx_sum = d.backward(p, g1 + g2, tape);
  const Matrix w_sum = p[0].grad, b_sum = p[1].grad;
  p.zero_grads();
  const Matrix dx = d.backward(p, g1, tape) + d.backward(p, g2, tape);
  EXPECT_LT((p[0].grad - w_sum).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p[1].grad - b_sum).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((dx - dx_sum).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dense, SameSeedIsBitIdentical) {
  auto run = [] {
    Rng rng(8);
    ParamSet p;
    Dense d(p, "l", {4, 3, Activation::kTanh});
    d.init(p, rng);
    const Matrix x = random_matrix(5, 4, rng);
    DenseTape tape;
    Matrix y = d.forward(p, x, &tape);
    p.zero_grads();
    d.backward(p, Matrix::Ones(5, 3), tape);
    return std::make_pair(y, p[0].grad);
  };
  const auto a = run(), b = run();
  EXPECT_TRUE(a.first == b.first);
  EXPECT_TRUE(a.second == b.second);
}

class MlpGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpGradient, MatchesFiniteDifferences) {
  Rng rng(7);
  ParamSet p;
  Mlp mlp(p, "net", {4, 6, 5, 3}, GetParam(), Activation::kIdentity);
  mlp.init(p, rng);
  const Matrix x = random_matrix(5, 4, rng);
  const Matrix c = random_matrix(5, 3, rng);
  auto f = [&](const ParamSet& q) { return (mlp.forward(q, x, nullptr).array() * c.array()).sum(); };
  MlpTape tape;
  mlp.forward(p, x, &tape);
  p.zero_grads();
  mlp.backward(p, c, tape);
  const auto rep = finite_diff_check(f, p, 1e-5, 1e-6, 10'000, 1, 1e-6);
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_rel_error;
}

INSTANTIATE_TEST_SUITE_P(Activations, MlpGradient,
                         ::testing::Values(Activation::kRelu, Activation::kElu, Activation::kTanh,
                                           Activation::kAbs, Activation::kIdentity),
                         [](const ::testing::TestParamInfo<Activation>& info) {
                           return std::string(to_string(info.param));
                         });

TEST(GradCheck, QuadraticAtThree) {
  ParamSet p;
  p.add("w", {1});
  p[0].value(0, 0) = 3.0;
  p[0].grad(0, 0) = 6.0;
  const auto rep = finite_diff_check([](const ParamSet& q) { return q[0].value(0, 0) * q[0].value(0, 0); }, p,
                                     1e-5, 1e-6);
  EXPECT_TRUE(rep.passed);
  EXPECT_NEAR(rep.worst_numeric, 6.0, 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroNumericGrad) {
  ParamSet p;
  p.add("w", {3});
  const auto rep = finite_diff_check([](const ParamSet&) { return 4.2; }, p, 1e-5, 1e-6);
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(std::abs(rep.worst_numeric), 1e-10);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParamSet p;
  p.add("w", {1});
  p[0].value(0, 0) = 1.0;
  p[0].grad(0, 0) = 3.0;  // true gradient of w^2 is 2
  const auto rep = finite_diff_check([](const ParamSet& q) { return q[0].value(0, 0) * q[0].value(0, 0); }, p,
                                     1e-5, 1e-4);
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.worst_param, "w");
}

TEST(RmsProp, ZeroGradLeavesValues) {
  ParamSet p;
  p.add("w", {2, 2});
  p[0].value.setConstant(0.7);
  RmsProp opt(p, {});
  p.zero_grads();
  opt.step(p);
  EXPECT_TRUE((p[0].value.array() == 0.7).all());
  EXPECT_EQ(p.step_count, 1u);
}

TEST(RmsProp, MatchesHandComputedFirstStep) {
  ParamSet p;
  p.add("w", {1});
  p[0].value(0, 0) = 1.0;
  p[0].grad(0, 0) = 0.5;
  OptimizerConfig cfg;
  cfg.grad_clip_norm.reset();
  RmsProp opt(p, cfg);
  opt.step(p);
  const double v = 0.01 * 0.25;
  EXPECT_NEAR(p[0].value(0, 0), 1.0 - 5e-4 * 0.5 / (std::sqrt(v) + 1e-5), 1e-15);
}

TEST(RmsProp, ConstantGradStepApproachesLearningRate) {
  ParamSet p;
  p.add("w", {1});
  OptimizerConfig cfg;
  cfg.grad_clip_norm.reset();
  RmsProp opt(p, cfg);
  double before = 0.0;
  double step = 0.0;
  for (int i = 0; i < 3000; ++i) {
    p[0].grad(0, 0) = 2.0;
    before = p[0].value(0, 0);
    opt.step(p);
    step = before - p[0].value(0, 0);
  }
  EXPECT_NEAR(step, cfg.learning_rate, 1e-6);
}

TEST(RmsProp, ClipScalesGradientByNormRatio) {
  ParamSet a, b;
  a.add("w", {2});
  b.add("w", {2});
  OptimizerConfig clipped;
  clipped.grad_clip_norm = 1.0;
  OptimizerConfig manual;
  manual.grad_clip_norm.reset();
  RmsProp oa(a, clipped), ob(b, manual);
  a[0].grad << 6.0, 8.0;  // norm 10
  b[0].grad << 0.6, 0.8;
  const double norm = oa.step(a);
  ob.step(b);
  EXPECT_NEAR(norm, 10.0, 1e-12);
  // Same direction and, since RMSProp normalises, nearly the same step;
  // the square averages reveal the scaled gradient exactly.
  EXPECT_NEAR(oa.square_averages()[0](0, 0), ob.square_averages()[0](0, 0), 1e-8);
  EXPECT_NEAR(oa.square_averages()[0](0, 1), ob.square_averages()[0](0, 1), 1e-8);
}

TEST(RmsProp, NonFiniteGradientNamesParameterAndModifiesNothing) {
  ParamSet p;
  p.add("mixer.fc1.w", {2});
  p[0].value.setConstant(1.0);
  RmsProp opt(p, {});
  p[0].grad(0, 1) = std::nan("");
  try {
    opt.step(p);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mixer.fc1.w"), std::string::npos);
  }
  EXPECT_TRUE((p[0].value.array() == 1.0).all());
  EXPECT_EQ(p.step_count, 0u);
}

TEST(RmsProp, InvalidConfigRejected) {
  OptimizerConfig c;
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.decay = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(9);
  ParamSet p;
  Mlp mlp(p, "net", {3, 4, 2}, Activation::kRelu, Activation::kIdentity);
  mlp.init(p, rng);
  p.step_count = 42;
  const auto path = std::filesystem::temp_directory_path() / "emix_ckpt_roundtrip.bin";
  save_checkpoint(path, p);
  const ParamSet q = load_checkpoint(path);
  EXPECT_TRUE(q.same_values(p));
  EXPECT_EQ(q.step_count, 42u);
  ParamSet r;
  Mlp other(r, "net", {3, 4, 2}, Activation::kRelu, Activation::kIdentity);
  load_checkpoint_into(path, r);
  EXPECT_TRUE(r.same_values(p));
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingAndCorruptFilesAreFileErrors) {
  EXPECT_THROW(load_checkpoint("/nonexistent/emix.bin"), FileError);
  const auto path = std::filesystem::temp_directory_path() / "emix_ckpt_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT and some bytes";
  }
  EXPECT_THROW(load_checkpoint(path), FileError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutMismatchRejected) {
  ParamSet p;
  p.add("a", {2, 2});
  const auto path = std::filesystem::temp_directory_path() / "emix_ckpt_layout.bin";
  save_checkpoint(path, p);
  ParamSet q;
  q.add("a", {2, 3});
  EXPECT_THROW(load_checkpoint_into(path, q), DimensionError);
  std::filesystem::remove(path);
}
