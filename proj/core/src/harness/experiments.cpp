#include "emix/harness/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "emix/errors.hpp"
#include "emix/harness/svg_plot.hpp"
#include "emix/learner/metrics_io.hpp"

namespace emix::harness {
namespace fs = std::filesystem;
namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw FileError("cannot write " + p.string());
  out << text;
}


nlohmann::json nullable(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json series_json(const SeriesStats& s) {
  nlohmann::json j;
  j["mean"] = nlohmann::json::array();
  for (double v : s.mean) j["mean"].push_back(nullable(v));
  if (s.stddev) {
    j["std"] = nlohmann::json::array();
    for (double v : *s.stddev) j["std"].push_back(nullable(v));
  }
  return j;
}

nlohmann::json mean_std(const std::vector<double>& v) {
  nlohmann::json j;
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  j["mean"] = nullable(mean);
  if (v.size() >= 2) {
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    j["std"] = nullable(std::sqrt(sq / static_cast<double>(v.size())));
  }
  return j;
}

SeedRun run_one(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir, bool reuse) {
  SeedRun r;
  r.seed = seed;
  r.dir = dir;
  r.log.label = "seed_" + std::to_string(seed);
  RunConfig single = cfg;
  single.seeds = {seed};
  const std::string rendered = render_run_config(single);
  const fs::path done = dir / "COMPLETE";
  if (reuse && fs::exists(done) && fs::exists(dir / "config.ini") && read_file(dir / "config.ini") == rendered) {
    r.log.records = learn::read_metrics(dir / "metrics.jsonl", &r.aborted);
    r.reused = true;
    return r;
  }
  fs::create_directories(dir);
  fs::remove(done);
  write_file(dir / "config.ini", rendered);
  auto result = learn::train_run(cfg.train, seed, dir);
  r.log.records = std::move(result.records);
  r.aborted = result.aborted;
  r.error = result.error;
  if (!r.aborted) write_file(done, "ok\n");
  return r;
}

}  // namespace

std::string format_beta(double beta) {
  std::ostringstream os;
  os << beta;
  return os.str();
}

fs::path output_root(const fs::path& fallback) {
  if (const char* env = std::getenv("EMIX_OUTPUT_ROOT"); env != nullptr && *env != '\0') return fs::path(env);
  return fallback;
}

SweepResult run_sweep(const RunConfig& cfg, const fs::path& dir, const SweepOptions& opts) {
  cfg.validate();
  fs::create_directories(dir);
  write_file(dir / "config.ini", render_run_config(cfg));

  SweepResult sweep;
  sweep.dir = dir;
  sweep.label = std::string(learn::to_string(cfg.train.learner.algo));
  sweep.runs.resize(cfg.seeds.size());
  std::mutex log_mu;
  auto say = [&](const std::string& s) {
    if (!opts.log) return;
    std::lock_guard lock(log_mu);
    opts.log(s);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      const auto seed = cfg.seeds[i];
      const auto seed_dir = dir / ("seed_" + std::to_string(seed));
      say("[" + dir.filename().string() + "] seed " + std::to_string(seed) + " started");
      sweep.runs[i] = run_one(cfg, seed, seed_dir, opts.reuse_completed);
      const auto& rec = sweep.runs[i].log.records;
      std::string msg = "[" + dir.filename().string() + "] seed " + std::to_string(seed) +
                        (sweep.runs[i].reused ? " reused" : " finished");
      if (!rec.empty()) msg += ", final success " + std::to_string(rec.back().success_rate);
      if (sweep.runs[i].aborted) msg += ", ABORTED: " + sweep.runs[i].error;
      say(msg);
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(cfg.seeds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<RunLog> logs;
  for (const auto& r : sweep.runs) {
    if (!r.aborted) logs.push_back(r.log);
  }
  if (!logs.empty()) sweep.report = aggregate(logs);
  write_file(dir / "aggregate.json", sweep_summary(sweep).dump(2) + "\n");
  return sweep;
}

nlohmann::json sweep_summary(const SweepResult& sweep) {
  nlohmann::json j;
  j["label"] = sweep.label;
  j["runs"] = nlohmann::json::array();
  std::vector<double> success, td, e_head, e_tail, final_success;
  for (const auto& r : sweep.runs) {
    nlohmann::json rj;
    rj["seed"] = r.seed;
    rj["aborted"] = r.aborted;
    if (r.aborted) rj["error"] = r.error;
    if (!r.log.records.empty()) {
      const auto t = terminal_stats(r.log.records);
      rj["final_success_rate"] = r.log.records.back().success_rate;
      rj["terminal_success_rate"] = nullable(t.success_rate);
      rj["terminal_abs_td_error"] = nullable(t.abs_td_error);
      rj["energy_abs_first_decile"] = nullable(t.energy_abs_head);
      rj["energy_abs_last_decile"] = nullable(t.energy_abs_tail);
      if (!r.aborted) {
        final_success.push_back(r.log.records.back().success_rate);
        success.push_back(t.success_rate);
        td.push_back(t.abs_td_error);
        e_head.push_back(t.energy_abs_head);
        e_tail.push_back(t.energy_abs_tail);
      }
    }
    j["runs"].push_back(rj);
  }
  if (!success.empty()) {
    j["final_success_rate"] = mean_std(final_success);
    j["terminal_success_rate"] = mean_std(success);
    j["terminal_abs_td_error"] = mean_std(td);
    j["energy_abs_first_decile"] = mean_std(e_head);
    j["energy_abs_last_decile"] = mean_std(e_tail);
    j["steps"] = sweep.report.steps;
    j["curves"]["success_rate"] = series_json(sweep.report.success_rate);
    j["curves"]["mean_return"] = series_json(sweep.report.mean_return);
    j["curves"]["abs_td_error"] = series_json(sweep.report.abs_td_error);
    j["curves"]["energy_ratio_mean"] = series_json(sweep.report.energy_ratio_mean);
    j["curves"]["energy_ratio_abs_mean"] = series_json(sweep.report.energy_ratio_abs_mean);
  }
  return j;
}

void write_comparison_plots(const std::vector<std::pair<std::string, AggregateReport>>& reports, const fs::path& dir,
                            const std::string& prefix) {
  fs::create_directories(dir);
  auto curves_of = [&](SeriesStats AggregateReport::*field) {
    std::vector<Curve> out;
    for (const auto& [label, rep] : reports) out.push_back({label, rep.steps, rep.*field});
    return out;
  };
  write_svg(dir / (prefix + "success_rate.svg"), curves_of(&AggregateReport::success_rate), "Greedy success rate",
            "success rate");
  write_svg(dir / (prefix + "abs_td_error.svg"), curves_of(&AggregateReport::abs_td_error), "Mean |TD error|",
            "|TD error|");
  write_svg(dir / (prefix + "energy_abs.svg"), curves_of(&AggregateReport::energy_ratio_abs_mean), "Mean |E|", "|E|");
  write_svg(dir / (prefix + "energy.svg"), curves_of(&AggregateReport::energy_ratio_mean), "Mean E", "E");
}

std::vector<AblationCell> run_ablation(const RunConfig& cfg, const fs::path& dir, const SweepOptions& opts) {
  cfg.validate();
  std::vector<AblationCell> cells;
  std::vector<std::pair<std::string, AggregateReport>> reports;
  nlohmann::json summary = nlohmann::json::array();
  for (auto algo : cfg.ablate.algos) {
    // Only emix has an energy term; other algorithms get a single cell.
    const bool uses_beta = algo == learn::Algo::kEmix;
    const std::vector<double> betas = uses_beta ? cfg.ablate.betas : std::vector<double>{0.0};
    for (double beta : betas) {
      RunConfig cell = cfg;
      cell.train.learner.algo = algo;
      cell.train.learner.beta = beta;
      const std::string label =
          std::string(learn::to_string(algo)) + (uses_beta ? "_beta" + format_beta(beta) : std::string());
      AblationCell c{algo, beta, run_sweep(cell, dir / label, opts)};
      c.sweep.label = label;
      if (!c.sweep.report.steps.empty()) reports.emplace_back(label, c.sweep.report);
      auto s = sweep_summary(c.sweep);
      s["algo"] = learn::to_string(algo);
      s["beta"] = beta;
      s.erase("curves");
      summary.push_back(s);
      cells.push_back(std::move(c));
    }
  }
  write_file(dir / "ablation.json", summary.dump(2) + "\n");
  if (!reports.empty()) write_comparison_plots(reports, dir);
  return cells;
}

}  // namespace emix::harness
