#include "emix/learner/metrics_io.hpp"

#include <cmath>
#include <fstream>

#include "emix/errors.hpp"

namespace emix::learn {
namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double get_num(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nan("");
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json to_json(const MetricsRecord& r) {
  return {
      {"step", r.step},
      {"success_rate", num(r.success_rate)},
      {"mean_return", num(r.mean_return)},
      {"abs_td_error", num(r.abs_td_error)},
      {"energy_ratio_mean", num(r.energy_ratio_mean)},
      {"energy_ratio_abs_mean", num(r.energy_ratio_abs_mean)},
      {"epsilon", num(r.epsilon)},
      {"loss", num(r.loss)},
      {"updates", r.updates},
      {"episodes", r.episodes},
  };
}

MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::uint64_t>();
  r.success_rate = get_num(j, "success_rate");
  r.mean_return = get_num(j, "mean_return");
  r.abs_td_error = get_num(j, "abs_td_error");
  r.energy_ratio_mean = get_num(j, "energy_ratio_mean");
  r.energy_ratio_abs_mean = get_num(j, "energy_ratio_abs_mean");
  r.epsilon = get_num(j, "epsilon");
  r.loss = get_num(j, "loss");
  r.updates = j.value("updates", std::uint64_t{0});
  r.episodes = j.value("episodes", std::uint64_t{0});
  return r;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, bool* aborted) {
  std::ifstream in(path);
  if (!in) throw FileError("missing metrics log: " + path.string());
  std::vector<MetricsRecord> out;
  if (aborted != nullptr) *aborted = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FileError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.value("aborted", false)) {
      if (aborted != nullptr) *aborted = true;
      continue;
    }
    out.push_back(metrics_from_json(j));
  }
  return out;
}

void write_trace(std::ostream& out, const Episode& episode, std::uint64_t episode_index) {
  const int n = episode.n_agents;
  for (int t = 0; t < episode.length; ++t) {
    std::vector<double> s(episode.states.row(t).begin(), episode.states.row(t).end());
    std::vector<int> u(episode.actions.begin() + t * n, episode.actions.begin() + (t + 1) * n);
    nlohmann::json j{{"episode", episode_index},
                     {"t", t},
                     {"state", s},
                     {"actions", u},
                     {"reward", episode.rewards[static_cast<std::size_t>(t)]},
                     {"terminated", static_cast<bool>(episode.terminated[static_cast<std::size_t>(t)])}};
    out << j.dump() << '\n';
  }
}

}  // namespace emix::learn
