#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emix/harness/aggregate.hpp"

namespace emix::harness {

struct Curve {
  std::string label;
  std::vector<std::uint64_t> steps;
  SeriesStats stats;
};

/// Line chart of mean curves with a shaded +-std band where available.
std::string render_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label);

void write_svg(const std::filesystem::path& path, const std::vector<Curve>& curves, const std::string& title,
               const std::string& y_label);

}  // namespace emix::harness
