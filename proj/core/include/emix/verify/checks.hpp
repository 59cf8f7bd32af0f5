#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emix/learner/episode.hpp"
#include "emix/learner/learner.hpp"

namespace emix::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random episode with uniform observations/states in [-1, 1], random
/// actions and rewards; `terminal` marks the last step terminated.
learn::Episode random_episode(const learn::EnvDims& dims, int length, bool terminal, Rng& rng);

/// Batch of random episodes with lengths drawn from [1, max_t] (the first
/// episode always has length max_t so the batch is max_t long).
learn::EpisodeBatch random_batch(const learn::EnvDims& dims, int batch_size, int max_t, Rng& rng);

/// Non-expansiveness, monotonicity, shift-equivariance and the
/// max <= lse <= max + ln N bounds on `vectors` random vectors.
CheckResult check_lse_properties(int vectors = 10'000, double slack = 1e-9, std::uint64_t seed = 1);

/// Finite differences against the analytic gradients of the full loss
/// (every algorithm) plus the mixer and surprise mixer on their own, at
/// small dimensions.
std::vector<CheckResult> check_gradients(double tol = 1e-4, std::uint64_t seed = 2);

/// Non-negative d q_tot / d q_a on `draws` random instances, and greedy
/// per-agent actions attaining the exhaustive joint maximum for N = 3,
/// 4 actions on `enumerations` instances.
CheckResult check_monotonic_mixing(int draws = 1000, int enumerations = 1000, std::uint64_t seed = 3);

/// emix(beta 0, m 1) == qmix, emix(beta 0, m 2) == twinqmix and
/// emix(beta 0, m 1, vdn mixer) == vdn: bit-identical loss sequences.
CheckResult check_reduction_lattice(int updates = 50, std::uint64_t seed = 4);

/// min over targets <= every target; target parameters move y but carry no
/// gradient; online parameters reach y only through beta * E.
CheckResult check_target_properties(int batches = 20, std::uint64_t seed = 5);

/// Everything above at default sizes.
std::vector<CheckResult> run_all_checks();

}  // namespace emix::verify
