#include "emix/harness/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emix/errors.hpp"
#include "emix/learner/metrics_io.hpp"

namespace emix::harness {
namespace {

SeriesStats stats_of(const std::vector<RunLog>& runs, std::size_t n_steps, double learn::MetricsRecord::*field) {
  SeriesStats s;
  s.mean.assign(n_steps, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> sd(n_steps, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < n_steps; ++k) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : runs) {
      const double v = r.records[k].*field;
      if (std::isfinite(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& r : runs) {
      const double v = r.records[k].*field;
      if (std::isfinite(v)) sq += (v - mean) * (v - mean);
    }
    s.mean[k] = mean;
    sd[k] = std::sqrt(sq / count);
  }
  if (runs.size() > 1) s.stddev = std::move(sd);
  return s;
}

std::size_t window(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction)));
}

double finite_mean(std::vector<double>::const_iterator b, std::vector<double>::const_iterator e) {
  double sum = 0.0;
  int count = 0;
  for (auto it = b; it != e; ++it) {
    if (std::isfinite(*it)) {
      sum += *it;
      ++count;
    }
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

AggregateReport aggregate(const std::vector<RunLog>& runs) {
  if (runs.empty()) throw UsageError("aggregate: no runs given");
  AggregateReport rep;
  for (const auto& rec : runs.front().records) rep.steps.push_back(rec.step);
  std::vector<std::string> bad;
  for (const auto& r : runs) {
    bool same = r.records.size() == rep.steps.size();
    for (std::size_t k = 0; same && k < rep.steps.size(); ++k) same = r.records[k].step == rep.steps[k];
    if (!same) bad.push_back(r.label);
  }
  if (!bad.empty()) {
    std::string msg = "aggregate: step grid of '" + runs.front().label + "' not matched by:";
    for (const auto& b : bad) msg += " " + b;
    throw DimensionError(msg);
  }
  rep.runs = runs.size();
  const auto n = rep.steps.size();
  rep.success_rate = stats_of(runs, n, &learn::MetricsRecord::success_rate);
  rep.mean_return = stats_of(runs, n, &learn::MetricsRecord::mean_return);
  rep.abs_td_error = stats_of(runs, n, &learn::MetricsRecord::abs_td_error);
  rep.energy_ratio_mean = stats_of(runs, n, &learn::MetricsRecord::energy_ratio_mean);
  rep.energy_ratio_abs_mean = stats_of(runs, n, &learn::MetricsRecord::energy_ratio_abs_mean);
  return rep;
}

double tail_mean(const std::vector<double>& values, double fraction) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto w = window(values.size(), fraction);
  return finite_mean(values.end() - static_cast<std::ptrdiff_t>(w), values.end());
}

double head_mean(const std::vector<double>& values, double fraction) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto w = window(values.size(), fraction);
  return finite_mean(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(w));
}

std::vector<double> column(const std::vector<learn::MetricsRecord>& records, double learn::MetricsRecord::*field) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.*field);
  return out;
}

TerminalStats terminal_stats(const std::vector<learn::MetricsRecord>& records) {
  TerminalStats t;
  t.success_rate = tail_mean(column(records, &learn::MetricsRecord::success_rate));
  t.abs_td_error = tail_mean(column(records, &learn::MetricsRecord::abs_td_error));
  // The step-0 record precedes any update, so the energy head starts after it.
  auto e = column(records, &learn::MetricsRecord::energy_ratio_abs_mean);
  std::vector<double> trained;
  for (double v : e) {
    if (std::isfinite(v)) trained.push_back(v);
  }
  t.energy_abs_head = head_mean(trained);
  t.energy_abs_tail = tail_mean(trained);
  return t;
}

std::vector<RunLog> load_run_logs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FileError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto m = entry.path() / "metrics.jsonl";
    if (entry.is_directory() && fs::exists(m)) files.push_back(m);
  }
  if (fs::exists(dir / "metrics.jsonl")) files.push_back(dir / "metrics.jsonl");
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FileError("no metrics.jsonl under " + dir.string());
  std::vector<RunLog> out;
  for (const auto& f : files) {
    out.push_back({f.parent_path().filename().string(), learn::read_metrics(f)});
  }
  return out;
}

}  // namespace emix::harness
