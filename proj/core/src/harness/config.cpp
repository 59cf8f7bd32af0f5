#include "emix/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "emix/errors.hpp"

namespace emix::harness {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(first, last, out, std::chars_format::general);
  } else {
    r = std::from_chars(first, last, out);
  }
  if (r.ec != std::errc{} || r.ptr != last) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field num_field(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_number<T>(k, v); },
          [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt_double(access(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          }};
}

// Ordered so render_run_config groups keys by section.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    using learn::Algo;
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("run.name", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.name = v; },
                                     [](const RunConfig& c) { return c.name; }});
    t.emplace_back("run.total_steps", num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.total_steps; }));
    t.emplace_back("run.eval_interval", num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.eval_interval; }));
    t.emplace_back("run.eval_episodes", num_field<int>([](RunConfig& c) -> auto& { return c.train.eval_episodes; }));
    t.emplace_back("run.checkpoint_interval",
                   num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.checkpoint_interval; }));
    t.emplace_back("run.trace_episodes", num_field<int>([](RunConfig& c) -> auto& { return c.train.trace_episodes; }));
    t.emplace_back("run.seeds", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.seeds = parse_seed_list(v); },
                                      [](const RunConfig& c) {
                                        std::string s;
                                        for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                                          s += (i ? "," : "") + std::to_string(c.seeds[i]);
                                        }
                                        return s;
                                      }});
    t.emplace_back("run.output_dir",
                   Field{[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
                         [](const RunConfig& c) { return c.output_dir.string(); }});

    t.emplace_back("env.grid_size", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.grid_size; }));
    t.emplace_back("env.n_agents", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.n_agents; }));
    t.emplace_back("env.n_prey", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.n_prey; }));
    t.emplace_back("env.sight_radius", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.sight_radius; }));
    t.emplace_back("env.episode_limit", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.episode_limit; }));
    t.emplace_back("env.p_storm", num_field<double>([](RunConfig& c) -> auto& { return c.train.env.p_storm; }));
    t.emplace_back("env.storm_duration", num_field<int>([](RunConfig& c) -> auto& { return c.train.env.storm_duration; }));
    t.emplace_back("env.storm_noise_scale",
                   num_field<double>([](RunConfig& c) -> auto& { return c.train.env.storm_noise_scale; }));
    t.emplace_back("env.seed", num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.env.seed; }));

    t.emplace_back("learner.algo",
                   Field{[](RunConfig& c, const std::string&, const std::string& v) { c.train.learner.algo = learn::algo_from_string(v); },
                         [](const RunConfig& c) { return std::string(learn::to_string(c.train.learner.algo)); }});
    t.emplace_back("learner.m_targets",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "auto") c.train.learner.m_targets.reset();
                           else c.train.learner.m_targets = parse_number<int>(k, v);
                         },
                         [](const RunConfig& c) { return std::to_string(learn::resolve(c.train.learner).m); }});
    t.emplace_back("learner.beta",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "auto") c.train.learner.beta.reset();
                           else c.train.learner.beta = parse_number<double>(k, v);
                         },
                         [](const RunConfig& c) { return fmt_double(learn::resolve(c.train.learner).beta); }});
    t.emplace_back("learner.mixer",
                   Field{[](RunConfig& c, const std::string&, const std::string& v) {
                           if (v == "auto") c.train.learner.mixer.reset();
                           else c.train.learner.mixer = mix::mixer_kind_from_string(v);
                         },
                         [](const RunConfig& c) { return std::string(mix::to_string(learn::resolve(c.train.learner).mixer)); }});
    t.emplace_back("learner.gamma", num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.gamma; }));
    t.emplace_back("learner.batch_size", num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.batch_size; }));
    t.emplace_back("learner.buffer_capacity",
                   num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.buffer_capacity; }));
    t.emplace_back("learner.update_interval",
                   num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.learner.update_interval; }));
    t.emplace_back("learner.train_every",
                   num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.learner.train_every; }));
    t.emplace_back("learner.agent_hidden", num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.agent_hidden; }));
    t.emplace_back("learner.embed_dim", num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.embed_dim; }));
    t.emplace_back("learner.hypernet_hidden",
                   num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.hypernet_hidden; }));
    t.emplace_back("learner.hypernet_layers",
                   num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.hypernet_layers; }));
    t.emplace_back("learner.surprise_hidden",
                   num_field<int>([](RunConfig& c) -> auto& { return c.train.learner.surprise_hidden; }));
    t.emplace_back("learner.sync_mode",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "staggered") c.train.learner.sync_mode = learn::SyncMode::kStaggered;
                           else if (v == "simultaneous") c.train.learner.sync_mode = learn::SyncMode::kSimultaneous;
                           else throw ConfigError("config key '" + k + "': expected staggered|simultaneous");
                         },
                         [](const RunConfig& c) { return std::string(learn::to_string(c.train.learner.sync_mode)); }});
    t.emplace_back("learner.target_reduction",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "min_of_max") c.train.learner.reduction = learn::TargetReduction::kMinOfMax;
                           else if (v == "max_of_min") c.train.learner.reduction = learn::TargetReduction::kMaxOfMin;
                           else throw ConfigError("config key '" + k + "': expected min_of_max|max_of_min");
                         },
                         [](const RunConfig& c) { return std::string(learn::to_string(c.train.learner.reduction)); }});
    t.emplace_back("learner.energy_order",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           using surprise::EnergyOrder;
                           if (v == "next_over_current") c.train.learner.energy_order = EnergyOrder::kNextOverCurrent;
                           else if (v == "current_over_next") c.train.learner.energy_order = EnergyOrder::kCurrentOverNext;
                           else throw ConfigError("config key '" + k + "': expected next_over_current|current_over_next");
                         },
                         [](const RunConfig& c) { return std::string(learn::to_string(c.train.learner.energy_order)); }});
    t.emplace_back("learner.sigma_pooling",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           using surprise::SigmaPooling;
                           if (v == "batch") c.train.learner.sigma_pooling = SigmaPooling::kBatch;
                           else if (v == "episode") c.train.learner.sigma_pooling = SigmaPooling::kEpisode;
                           else throw ConfigError("config key '" + k + "': expected batch|episode");
                         },
                         [](const RunConfig& c) { return std::string(learn::to_string(c.train.learner.sigma_pooling)); }});
    t.emplace_back("learner.train_surprise",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.train.learner.train_surprise = parse_bool(k, v); },
                         [](const RunConfig& c) { return std::string(c.train.learner.train_surprise ? "true" : "false"); }});

    t.emplace_back("optimizer.learning_rate",
                   num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.optimizer.learning_rate; }));
    t.emplace_back("optimizer.decay", num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.optimizer.decay; }));
    t.emplace_back("optimizer.epsilon_stability",
                   num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.optimizer.epsilon_stability; }));
    t.emplace_back("optimizer.grad_clip_norm",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "none") c.train.learner.optimizer.grad_clip_norm.reset();
                           else c.train.learner.optimizer.grad_clip_norm = parse_number<double>(k, v);
                         },
                         [](const RunConfig& c) {
                           const auto& g = c.train.learner.optimizer.grad_clip_norm;
                           return g ? fmt_double(*g) : std::string("none");
                         }});

    t.emplace_back("epsilon.start", num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.epsilon.start; }));
    t.emplace_back("epsilon.finish", num_field<double>([](RunConfig& c) -> auto& { return c.train.learner.epsilon.finish; }));
    t.emplace_back("epsilon.anneal_steps",
                   num_field<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.learner.epsilon.anneal_steps; }));

    t.emplace_back("ablate.algos",
                   Field{[](RunConfig& c, const std::string&, const std::string& v) {
                           c.ablate.algos.clear();
                           for (const auto& s : split_list(v)) c.ablate.algos.push_back(learn::algo_from_string(s));
                         },
                         [](const RunConfig& c) {
                           std::string s;
                           for (std::size_t i = 0; i < c.ablate.algos.size(); ++i) {
                             s += (i ? "," : "") + std::string(learn::to_string(c.ablate.algos[i]));
                           }
                           return s;
                         }});
    t.emplace_back("ablate.betas",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.ablate.betas.clear();
                           for (const auto& s : split_list(v)) c.ablate.betas.push_back(parse_number<double>(k, s));
                         },
                         [](const RunConfig& c) {
                           std::string s;
                           for (std::size_t i = 0; i < c.ablate.betas.size(); ++i) {
                             s += (i ? "," : "") + fmt_double(c.ablate.betas[i]);
                           }
                           return s;
                         }});
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) throw ConfigError("seeds must be distinct");
  if (ablate.algos.empty() || ablate.betas.empty()) throw ConfigError("ablation matrix must be non-empty");
  for (double b : ablate.betas) {
    if (!(b >= 0.0)) throw ConfigError("ablation betas must be >= 0");
  }
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_number<std::uint64_t>("seeds", item.substr(0, dots));
      const auto hi = parse_number<std::uint64_t>("seeds", item.substr(dots + 2));
      if (hi < lo) throw ConfigError("seeds: empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_number<std::uint64_t>("seeds", item));
    }
  }
  if (out.empty()) throw ConfigError("seeds: empty list");
  return out;
}

RunConfig parse_run_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' must be inside a [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const Field* f = find_field(full);
      if (f == nullptr) throw ConfigError("unknown config key '" + full + "'");
      f->set(cfg, full, trim(value.get_value<std::string>()));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& [name, f] : fields()) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << name.substr(dot + 1) << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace emix::harness
