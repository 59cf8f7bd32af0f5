#include <gtest/gtest.h>

#include "emix/verify/checks.hpp"

using namespace emix;

TEST(Verify, LseProperties) {
  const auto r = verify::check_lse_properties(10'000);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_LT(r.seconds, 5.0);
}

TEST(Verify, MonotonicMixing) {
  const auto r = verify::check_monotonic_mixing(300, 300);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Verify, ReductionLattice) {
  const auto r = verify::check_reduction_lattice(10);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Verify, TargetProperties) {
  const auto r = verify::check_target_properties(5);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Verify, RandomBatchShape) {
  Rng rng(1);
  const auto b = verify::random_batch(learn::EnvDims{3, 4, 5, 6}, 4, 7, rng);
  EXPECT_EQ(b.batch_size, 4);
  EXPECT_EQ(b.max_t, 7);
  EXPECT_NO_THROW(b.validate());
}
