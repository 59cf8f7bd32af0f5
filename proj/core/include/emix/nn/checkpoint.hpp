#pragma once

#include <filesystem>

#include "emix/nn/param_set.hpp"

namespace emix::nn {

// Binary checkpoint layout (all integers and reals little-endian):
//
//   magic        8 bytes  "EMIXCKPT"
//   version      u32      currently 1
//   step_count   u64
//   n_entries    u32
//   per entry:
//     name_len   u32, name bytes (UTF-8, no terminator)
//     rank       u32 (1 or 2)
//     dims       rank x u64
//     values     prod(dims) x f64, row-major
//
// See docs/checkpoint_format.md.
inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'I', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);

/// Reads a checkpoint into a fresh ParamSet (grads zeroed).
ParamSet load_checkpoint(const std::filesystem::path& path);

/// Reads a checkpoint into an existing ParamSet, requiring identical names
/// and shapes in the same order.
void load_checkpoint_into(const std::filesystem::path& path, ParamSet& params);

}  // namespace emix::nn
