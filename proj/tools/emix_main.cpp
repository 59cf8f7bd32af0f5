// emix: train, ablate, evaluate, check and plot from the command line.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emix/errors.hpp"
#include "emix/harness/aggregate.hpp"
#include "emix/harness/config.hpp"
#include "emix/harness/experiments.hpp"
#include "emix/harness/svg_plot.hpp"
#include "emix/learner/trainer.hpp"
#include "emix/nn/checkpoint.hpp"
#include "emix/runtime.hpp"
#include "emix/verify/checks.hpp"

namespace fs = std::filesystem;
using namespace emix;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kFile = 3, kAborted = 4 };

struct RunFlags {
  std::string config;
  std::string algo;
  std::optional<double> beta;
  std::optional<int> m_targets;
  std::string seeds;
  std::optional<std::uint64_t> total_steps;
  std::string out;
  std::string name;
  bool storm = false;
  bool no_storm = false;
  std::optional<int> trace_episodes;
  int jobs = 1;
  bool reuse = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "INI config file (defaults apply to missing keys)");
  cmd->add_option("--algo", f.algo, "emix | qmix | twinqmix | vdn | iql");
  cmd->add_option("--beta", f.beta, "energy temperature (emix)");
  cmd->add_option("--m-targets", f.m_targets, "number of target networks (emix)");
  cmd->add_option("--seeds", f.seeds, "comma list or range, e.g. 1..5");
  cmd->add_option("--total-steps", f.total_steps, "environment steps per run");
  cmd->add_option("--out", f.out, "output root (default $EMIX_OUTPUT_ROOT or ./runs)");
  cmd->add_option("--name", f.name, "experiment name (subdirectory of the output root)");
  cmd->add_flag("--storm", f.storm, "enable storms (p_storm 0.05 unless configured)");
  cmd->add_flag("--no-storm", f.no_storm, "disable storms (p_storm 0)");
  cmd->add_option("--trace-episodes", f.trace_episodes, "dump the first N training episodes to trace.jsonl");
  cmd->add_option("--jobs", f.jobs, "concurrent seed runs")->check(CLI::PositiveNumber);
  cmd->add_flag("--reuse", f.reuse, "skip seeds whose directory already holds a finished run of this config");
}

harness::RunConfig resolve_config(const RunFlags& f) {
  harness::RunConfig cfg = f.config.empty() ? harness::RunConfig{} : harness::load_run_config(f.config);
  if (!f.algo.empty()) cfg.train.learner.algo = learn::algo_from_string(f.algo);
  if (f.beta) cfg.train.learner.beta = *f.beta;
  if (f.m_targets) cfg.train.learner.m_targets = *f.m_targets;
  if (!f.seeds.empty()) cfg.seeds = harness::parse_seed_list(f.seeds);
  if (f.total_steps) cfg.train.total_steps = *f.total_steps;
  if (!f.name.empty()) cfg.name = f.name;
  if (f.storm && f.no_storm) throw ConfigError("--storm and --no-storm are mutually exclusive");
  if (f.no_storm) cfg.train.env.p_storm = 0.0;
  if (f.storm && cfg.train.env.p_storm == 0.0) cfg.train.env.p_storm = env::EnvConfig{}.p_storm;
  if (f.trace_episodes) cfg.train.trace_episodes = *f.trace_episodes;
  if (!f.out.empty()) cfg.output_dir = f.out;
  else cfg.output_dir = harness::output_root(cfg.output_dir);
  cfg.validate();
  return cfg;
}

harness::SweepOptions sweep_options(const RunFlags& f) {
  harness::SweepOptions o;
  o.jobs = f.jobs;
  o.reuse_completed = f.reuse;
  o.log = [](const std::string& s) { std::cerr << s << '\n'; };
  return o;
}

int report_sweep(const harness::SweepResult& s) {
  const auto j = harness::sweep_summary(s);
  std::cout << s.dir.string() << ": ";
  if (j.contains("terminal_success_rate")) {
    const auto& t = j["terminal_success_rate"];
    std::cout << "terminal success " << t["mean"];
    if (t.contains("std")) std::cout << " +- " << t["std"];
  }
  std::cout << '\n';
  for (const auto& r : s.runs) {
    if (r.aborted) {
      std::cerr << "seed " << r.seed << " aborted: " << r.error << '\n';
      return kAborted;
    }
  }
  return kOk;
}

int cmd_train(const RunFlags& f) {
  const auto cfg = resolve_config(f);
  const auto dir = cfg.output_dir / cfg.name;
  return report_sweep(harness::run_sweep(cfg, dir, sweep_options(f)));
}

int cmd_ablate(const RunFlags& f, const std::string& algos, const std::string& betas) {
  auto cfg = resolve_config(f);
  if (!algos.empty() || !betas.empty()) {
    // Reuse the config grammar for the list syntax.
    std::string text;
    if (!algos.empty()) text += "[ablate]\nalgos = " + algos + "\n";
    if (!betas.empty()) text += (algos.empty() ? "[ablate]\n" : "") + std::string("betas = ") + betas + "\n";
    const auto parsed = harness::parse_run_config(text);
    if (!algos.empty()) cfg.ablate.algos = parsed.ablate.algos;
    if (!betas.empty()) cfg.ablate.betas = parsed.ablate.betas;
  }
  const auto dir = cfg.output_dir / (cfg.name == "run" ? std::string("ablation") : cfg.name);
  int code = kOk;
  for (const auto& cell : harness::run_ablation(cfg, dir, sweep_options(f))) {
    const int c = report_sweep(cell.sweep);
    if (c != kOk) code = c;
  }
  std::cout << "plots and ablation.json in " << dir.string() << '\n';
  return code;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& config, int episodes, std::uint64_t seed,
                 bool storm, bool no_storm) {
  const fs::path ckpt(checkpoint);
  if (!fs::exists(ckpt)) throw FileError("checkpoint not found: " + ckpt.string());
  fs::path cfg_path = config;
  if (config.empty() && fs::exists(ckpt.parent_path() / "config.ini")) cfg_path = ckpt.parent_path() / "config.ini";
  harness::RunConfig cfg = cfg_path.empty() ? harness::RunConfig{} : harness::load_run_config(cfg_path);
  if (storm && no_storm) throw ConfigError("--storm and --no-storm are mutually exclusive");
  if (no_storm) cfg.train.env.p_storm = 0.0;
  if (storm && cfg.train.env.p_storm == 0.0) cfg.train.env.p_storm = env::EnvConfig{}.p_storm;
  const auto& e = cfg.train.env;
  learn::Learner learner(cfg.train.learner, learn::EnvDims{e.n_agents, env::kNumActions, e.obs_dim(), e.state_dim()}, 0);
  nn::load_checkpoint_into(ckpt, learner.online());
  const auto res = learn::evaluate_greedy(learner, e, episodes, seed);
  const auto rnd = learn::evaluate_random(e, episodes, seed);
  std::cout << std::fixed << std::setprecision(4) << "success_rate " << res.success_rate << "\nmean_return "
            << res.mean_return << "\nmean_length " << res.mean_length << "\nrandom_success_rate " << rnd.success_rate
            << "\nepisodes " << res.episodes << '\n';
  return kOk;
}

int cmd_check() {
  bool ok = true;
  for (const auto& r : verify::run_all_checks()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(26) << r.name << std::right << std::fixed
              << std::setprecision(2) << std::setw(7) << r.seconds << "s  " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kOk : kFailed;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<std::pair<std::string, harness::AggregateReport>> reports;
  for (const auto& d : dirs) {
    const fs::path p(d);
    auto logs = harness::load_run_logs(p);
    reports.emplace_back(fs::weakly_canonical(p).filename().string(), harness::aggregate(logs));
  }
  const fs::path out_dir = out.empty() ? fs::path(".") : fs::path(out);
  harness::write_comparison_plots(reports, out_dir);
  std::cout << "wrote success_rate.svg, abs_td_error.svg, energy_abs.svg, energy.svg to " << out_dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Multi-agent value factorisation with surprise minimisation"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "train one config across its seeds");
  add_run_flags(train, train_flags);

  RunFlags ablate_flags;
  std::string ablate_algos, ablate_betas;
  auto* ablate = app.add_subcommand("ablate", "run an algo x beta matrix");
  add_run_flags(ablate, ablate_flags);
  ablate->add_option("--algos", ablate_algos, "comma list of algorithms (default emix)");
  ablate->add_option("--betas", ablate_betas, "comma list of beta values (default 0.001,0.01,0.1)");

  std::string ckpt, eval_config;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 12345;
  bool eval_storm = false, eval_no_storm = false;
  auto* evaluate = app.add_subcommand("evaluate", "greedy rollouts of a checkpoint");
  evaluate->add_option("--checkpoint", ckpt, "checkpoint file (final.bin)")->required();
  evaluate->add_option("--config", eval_config, "config (default: config.ini next to the checkpoint)");
  evaluate->add_option("--episodes", eval_episodes, "evaluation episodes")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", eval_seed, "evaluation seed");
  evaluate->add_flag("--storm", eval_storm, "enable storms");
  evaluate->add_flag("--no-storm", eval_no_storm, "disable storms");

  auto* check = app.add_subcommand("check", "run the property and oracle suite");

  std::vector<std::string> plot_dirs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "render SVG curves from run directories");
  plot->add_option("dirs", plot_dirs, "sweep directories (each holding seed_*/metrics.jsonl)")->required();
  plot->add_option("--out", plot_out, "output directory for the SVGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << "run 'emix --help' for usage\n";
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*ablate) return cmd_ablate(ablate_flags, ablate_algos, ablate_betas);
    if (*evaluate) return cmd_evaluate(ckpt, eval_config, eval_episodes, eval_seed, eval_storm, eval_no_storm);
    if (*check) return cmd_check();
    if (*plot) return cmd_plot(plot_dirs, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kFile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
