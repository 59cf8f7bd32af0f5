#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emix/harness/aggregate.hpp"
#include "emix/harness/config.hpp"

namespace emix::harness {

struct SweepOptions {
  int jobs = 1;                  // concurrent seed runs
  bool reuse_completed = false;  // skip seeds whose directory holds a finished run of the same config
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  RunLog log;
  bool aborted = false;
  std::string error;
  bool reused = false;
};

struct SweepResult {
  std::string label;
  std::filesystem::path dir;
  std::vector<SeedRun> runs;
  AggregateReport report;
};

/// Trains `cfg` once per seed under dir/seed_<s>/ (config.ini, metrics.jsonl,
/// checkpoints) and aggregates the logs into dir/aggregate.json.
SweepResult run_sweep(const RunConfig& cfg, const std::filesystem::path& dir, const SweepOptions& opts = {});

struct AblationCell {
  learn::Algo algo = learn::Algo::kEmix;
  double beta = 0.0;
  SweepResult sweep;
};

/// Expands cfg.ablate.algos x cfg.ablate.betas into sweeps under
/// dir/<algo>_beta<b>/ and writes comparison plots and ablation.json.
std::vector<AblationCell> run_ablation(const RunConfig& cfg, const std::filesystem::path& dir,
                                       const SweepOptions& opts = {});

/// Per-seed terminal values plus mean and std across seeds.
nlohmann::json sweep_summary(const SweepResult& sweep);

/// Success, |TD| and |E| SVGs comparing labelled sweeps.
void write_comparison_plots(const std::vector<std::pair<std::string, AggregateReport>>& reports,
                            const std::filesystem::path& dir, const std::string& prefix = "");

/// Output root: $EMIX_OUTPUT_ROOT if set, else `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback);

std::string format_beta(double beta);

}  // namespace emix::harness
