#include "emix/env/spurious_capture.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "emix/errors.hpp"

namespace emix::env {
namespace {

constexpr std::array<Cell, 5> kMoves = {Cell{0, 0}, Cell{-1, 0}, Cell{1, 0}, Cell{0, -1}, Cell{0, 1}};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_state(const Vector& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ splitmix64(seed);
  for (Index i = 0; i < s.size(); ++i) {
    std::uint64_t bits;
    const double v = s[i];
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)); }

// Shared by the environment and state_to_agent_views so both produce the
// same bits. `cells` holds agents followed by prey; `alive` covers prey only.
Matrix build_views(const EnvConfig& cfg, const std::vector<Cell>& agents, const std::vector<Cell>& prey,
                   const std::vector<bool>& alive, bool storm, const Vector& state) {
  const int n = cfg.n_agents;
  const int p = cfg.n_prey;
  const double norm = static_cast<double>(cfg.grid_size - 1);
  const double sight = static_cast<double>(cfg.sight_radius);
  Matrix obs = Matrix::Zero(n, cfg.obs_dim());
  const std::uint64_t key = storm ? hash_state(state, cfg.seed) : 0;
  const int n_offsets = 2 * (p + n - 1);
  std::vector<double> noise(static_cast<std::size_t>(n_offsets + EnvConfig::kDistractorDim));

  for (int a = 0; a < n; ++a) {
    if (storm) {
      Rng rng(splitmix64(key + static_cast<std::uint64_t>(a)));
      std::normal_distribution<double> gauss(0.0, cfg.storm_noise_scale);
      for (auto& z : noise) z = cfg.storm_noise_scale > 0.0 ? gauss(rng) : 0.0;
    }
    const Cell me = agents[static_cast<std::size_t>(a)];
    Index k = 0;
    obs(a, k++) = me.row / norm;
    obs(a, k++) = me.col / norm;
    int slot = 0;
    auto put_entity = [&](Cell other, bool present) {
      if (present && chebyshev(me, other) <= cfg.sight_radius) {
        double dr = (other.row - me.row) / sight;
        double dc = (other.col - me.col) / sight;
        if (storm) {
          dr += noise[static_cast<std::size_t>(slot)];
          dc += noise[static_cast<std::size_t>(slot + 1)];
        }
        obs(a, k) = 1.0;
        obs(a, k + 1) = dr;
        obs(a, k + 2) = dc;
      }
      k += 3;
      slot += 2;
    };
    for (int j = 0; j < p; ++j) put_entity(prey[static_cast<std::size_t>(j)], alive[static_cast<std::size_t>(j)]);
    for (int b = 0; b < n; ++b) {
      if (b != a) put_entity(agents[static_cast<std::size_t>(b)], true);
    }
    if (storm) {
      for (int d = 0; d < EnvConfig::kDistractorDim; ++d) {
        obs(a, k + d) = noise[static_cast<std::size_t>(n_offsets + d)];
      }
    }
  }
  return obs;
}

}  // namespace

void EnvConfig::validate() const {
  if (grid_size <= 0) throw ConfigError("grid_size must be positive");
  if (n_agents <= 0) throw ConfigError("n_agents must be positive");
  if (n_prey <= 0) throw ConfigError("n_prey must be positive");
  if (sight_radius <= 0) throw ConfigError("sight_radius must be positive");
  if (sight_radius >= grid_size) throw ConfigError("sight_radius must be smaller than grid_size");
  if (episode_limit <= 0) throw ConfigError("episode_limit must be positive");
  if (n_agents + n_prey > grid_size * grid_size) {
    throw ConfigError("n_agents + n_prey exceeds the number of cells");
  }
  if (!(p_storm >= 0.0 && p_storm <= 1.0)) throw ConfigError("p_storm must be a probability");
  if (storm_duration <= 0) throw ConfigError("storm_duration must be positive");
  if (!(storm_noise_scale >= 0.0) || !std::isfinite(storm_noise_scale)) {
    throw ConfigError("storm_noise_scale must be finite and >= 0");
  }
}

SpuriousCapture::SpuriousCapture(EnvConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool SpuriousCapture::in_bounds(Cell c) const {
  return c.row >= 0 && c.col >= 0 && c.row < cfg_.grid_size && c.col < cfg_.grid_size;
}

bool SpuriousCapture::occupied(Cell c, int ignore_prey) const {
  for (const auto& a : agents_) {
    if (a == c) return true;
  }
  for (std::size_t j = 0; j < prey_.size(); ++j) {
    if (static_cast<int>(j) != ignore_prey && alive_[j] && prey_[j] == c) return true;
  }
  return false;
}

Cell SpuriousCapture::random_free_cell(int ignore_prey) {
  std::vector<Cell> free;
  for (int r = 0; r < cfg_.grid_size; ++r) {
    for (int c = 0; c < cfg_.grid_size; ++c) {
      if (!occupied({r, c}, ignore_prey)) free.push_back({r, c});
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  return free[pick(rng_)];
}

ResetResult SpuriousCapture::reset(std::uint64_t seed) {
  rng_.seed(seed);
  const int cells = cfg_.grid_size * cfg_.grid_size;
  std::vector<int> order(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) order[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: the first n_agents + n_prey cells are distinct.
  const int need = cfg_.n_agents + cfg_.n_prey;
  for (int i = 0; i < need; ++i) {
    std::uniform_int_distribution<int> pick(i, cells - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng_))]);
  }
  auto cell_of = [&](int idx) { return Cell{idx / cfg_.grid_size, idx % cfg_.grid_size}; };
  agents_.clear();
  prey_.clear();
  for (int a = 0; a < cfg_.n_agents; ++a) agents_.push_back(cell_of(order[static_cast<std::size_t>(a)]));
  for (int j = 0; j < cfg_.n_prey; ++j) {
    prey_.push_back(cell_of(order[static_cast<std::size_t>(cfg_.n_agents + j)]));
  }
  alive_.assign(static_cast<std::size_t>(cfg_.n_prey), true);
  storm_remaining_ = 0;
  t_ = 0;
  done_ = false;
  started_ = true;
  return {state(), observations()};
}

ResetResult SpuriousCapture::place(const std::vector<Cell>& agents, const std::vector<Cell>& prey, std::uint64_t seed) {
  if (static_cast<int>(agents.size()) != cfg_.n_agents || static_cast<int>(prey.size()) != cfg_.n_prey) {
    throw ConfigError("place(): expected " + std::to_string(cfg_.n_agents) + " agents and " +
                      std::to_string(cfg_.n_prey) + " prey");
  }
  std::vector<Cell> all(agents);
  all.insert(all.end(), prey.begin(), prey.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!in_bounds(all[i])) throw ConfigError("place(): cell out of bounds");
    for (std::size_t j = 0; j < i; ++j) {
      if (all[i] == all[j]) throw ConfigError("place(): overlapping cells");
    }
  }
  rng_.seed(seed);
  agents_ = agents;
  prey_ = prey;
  alive_.assign(prey.size(), true);
  storm_remaining_ = 0;
  t_ = 0;
  done_ = false;
  started_ = true;
  return {state(), observations()};
}

int SpuriousCapture::prey_alive_count() const {
  return static_cast<int>(std::count(alive_.begin(), alive_.end(), true));
}

StepResult SpuriousCapture::step(std::span<const int> joint_action) {
  if (!started_) throw UsageError("step() called before reset()");
  if (done_) throw UsageError("step() called after the episode ended");
  if (static_cast<int>(joint_action.size()) != cfg_.n_agents) {
    throw DimensionError("joint action has " + std::to_string(joint_action.size()) +
                         " entries, expected " + std::to_string(cfg_.n_agents));
  }
  for (std::size_t a = 0; a < joint_action.size(); ++a) {
    if (joint_action[a] < 0 || joint_action[a] >= kNumActions) {
      throw std::out_of_range("agent " + std::to_string(a) + ": action id " +
                              std::to_string(joint_action[a]) + " out of range");
    }
  }

  // Agents move one at a time in index order; blocked by walls and by any
  // occupied cell.
  for (std::size_t a = 0; a < agents_.size(); ++a) {
    const int act = joint_action[a];
    if (act == kStay || act == kCapture) continue;
    const Cell next{agents_[a].row + kMoves[static_cast<std::size_t>(act)].row,
                    agents_[a].col + kMoves[static_cast<std::size_t>(act)].col};
    if (in_bounds(next) && !occupied(next, -1)) agents_[a] = next;
  }

  StepResult result;
  for (std::size_t j = 0; j < prey_.size(); ++j) {
    if (!alive_[j]) continue;
    int capturers = 0;
    for (std::size_t a = 0; a < agents_.size(); ++a) {
      const int manhattan = std::abs(agents_[a].row - prey_[j].row) + std::abs(agents_[a].col - prey_[j].col);
      if (manhattan == 1 && joint_action[a] == kCapture) ++capturers;
    }
    if (capturers >= 2) {
      alive_[j] = false;
      ++result.info.captures;
    }
  }
  result.reward = 10.0 * result.info.captures - 0.1;

  const bool storm_now = storm_remaining_ > 0;
  for (std::size_t j = 0; j < prey_.size(); ++j) {
    if (!alive_[j]) continue;
    if (storm_now) {
      prey_[j] = random_free_cell(static_cast<int>(j));
      continue;
    }
    std::array<Cell, 5> legal;
    std::size_t n_legal = 0;
    for (const Cell& mv : kMoves) {
      const Cell next{prey_[j].row + mv.row, prey_[j].col + mv.col};
      if (in_bounds(next) && !occupied(next, static_cast<int>(j))) legal[n_legal++] = next;
    }
    std::uniform_int_distribution<std::size_t> pick(0, n_legal - 1);
    prey_[j] = legal[pick(rng_)];
  }

  if (storm_remaining_ > 0) {
    --storm_remaining_;
  } else if (cfg_.p_storm > 0.0) {
    std::bernoulli_distribution start(cfg_.p_storm);
    if (start(rng_)) storm_remaining_ = cfg_.storm_duration;
  }

  ++t_;
  result.terminated = prey_alive_count() == 0;
  result.truncated = !result.terminated && t_ >= cfg_.episode_limit;
  done_ = result.terminated || result.truncated;
  result.state = state();
  result.observations = observations();
  result.info.storm_active = storm_active();
  return result;
}

Vector SpuriousCapture::state() const {
  const double norm = static_cast<double>(cfg_.grid_size - 1);
  Vector s(cfg_.state_dim());
  Index k = 0;
  for (const auto& a : agents_) {
    s[k++] = a.row / norm;
    s[k++] = a.col / norm;
  }
  for (const auto& p : prey_) {
    s[k++] = p.row / norm;
    s[k++] = p.col / norm;
  }
  for (bool alive : alive_) s[k++] = alive ? 1.0 : 0.0;
  s[k++] = storm_active() ? 1.0 : 0.0;
  s[k++] = static_cast<double>(storm_remaining_) / cfg_.storm_duration;
  s[k++] = static_cast<double>(t_) / cfg_.episode_limit;
  return s;
}

Matrix SpuriousCapture::observations() const {
  return build_views(cfg_, agents_, prey_, alive_, storm_active(), state());
}

Matrix state_to_agent_views(const Vector& state, const EnvConfig& cfg) {
  if (state.size() != cfg.state_dim()) {
    throw DimensionError("state has dimension " + std::to_string(state.size()) + ", expected " +
                         std::to_string(cfg.state_dim()));
  }
  const double norm = static_cast<double>(cfg.grid_size - 1);
  auto cell_at = [&](Index k) {
    return Cell{static_cast<int>(std::lround(state[k] * norm)), static_cast<int>(std::lround(state[k + 1] * norm))};
  };
  std::vector<Cell> agents;
  std::vector<Cell> prey;
  std::vector<bool> alive;
  Index k = 0;
  for (int a = 0; a < cfg.n_agents; ++a, k += 2) agents.push_back(cell_at(k));
  for (int j = 0; j < cfg.n_prey; ++j, k += 2) prey.push_back(cell_at(k));
  for (int j = 0; j < cfg.n_prey; ++j) alive.push_back(state[k++] > 0.5);
  const bool storm = state[k] > 0.5;
  return build_views(cfg, agents, prey, alive, storm, state);
}

bool is_success(const SpuriousCapture& env) { return env.prey_alive_count() == 0; }

}  // namespace emix::env
