#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emix/learner/trainer.hpp"

namespace emix::harness {

/// Metrics of one run, labelled for reporting.
struct RunLog {
  std::string label;
  std::vector<learn::MetricsRecord> records;
};

struct SeriesStats {
  std::vector<double> mean;
  std::optional<std::vector<double>> stddev;  // population std; absent for a single run
};

/// Runs aligned on a shared step grid.
struct AggregateReport {
  std::vector<std::uint64_t> steps;
  std::size_t runs = 0;
  SeriesStats success_rate;
  SeriesStats mean_return;
  SeriesStats abs_td_error;
  SeriesStats energy_ratio_mean;
  SeriesStats energy_ratio_abs_mean;
};

/// Throws DimensionError listing the offending runs when step grids differ,
/// UsageError for an empty input. NaN entries (no updates in that window)
/// are skipped per step; a step with no finite value yields NaN.
AggregateReport aggregate(const std::vector<RunLog>& runs);

/// Mean over the last `fraction` of a series (at least one element).
double tail_mean(const std::vector<double>& values, double fraction = 0.1);
/// Mean over the first `fraction` of a series (at least one element).
double head_mean(const std::vector<double>& values, double fraction = 0.1);

/// Terminal (final 10% of eval records) statistics of one run.
struct TerminalStats {
  double success_rate = 0.0;
  double abs_td_error = 0.0;
  double energy_abs_head = 0.0;
  double energy_abs_tail = 0.0;
};
TerminalStats terminal_stats(const std::vector<learn::MetricsRecord>& records);

std::vector<double> column(const std::vector<learn::MetricsRecord>& records,
                           double learn::MetricsRecord::*field);

/// Loads every `<dir>/*/metrics.jsonl` (one subdirectory per seed).
std::vector<RunLog> load_run_logs(const std::filesystem::path& dir);

}  // namespace emix::harness
