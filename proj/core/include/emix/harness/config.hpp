#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "emix/learner/trainer.hpp"

namespace emix::harness {

struct AblationConfig {
  std::vector<learn::Algo> algos{learn::Algo::kEmix};
  std::vector<double> betas{0.001, 0.01, 0.1};
};

struct RunConfig {
  std::string name = "run";
  learn::TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path output_dir = "runs";
  AblationConfig ablate;

  /// Throws ConfigError (empty/duplicate seeds, invalid sub-configs).
  void validate() const;
};

/// Parses the INI-style config grammar documented in docs/config_format.md
/// on top of the defaults. Unknown sections or keys and unparsable values
/// raise ConfigError naming the key.
RunConfig parse_run_config(std::string_view text);

/// parse_run_config on a file; FileError if it cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config (every key, algorithm defaults expanded) in the
/// same grammar; parse_run_config(render_run_config(c)) reproduces c.
std::string render_run_config(const RunConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace emix::harness
