#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emix/learner/episode.hpp"
#include "emix/learner/trainer.hpp"

namespace emix::learn {

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const nlohmann::json& j);

/// Reads metrics.jsonl. Abort lines ({"aborted": true, ...}) are skipped;
/// `aborted` (if given) is set when one is present.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, bool* aborted = nullptr);

/// One JSON object per step of `episode`.
void write_trace(std::ostream& out, const Episode& episode, std::uint64_t episode_index);

}  // namespace emix::learn
