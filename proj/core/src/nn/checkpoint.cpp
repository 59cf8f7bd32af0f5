#include "emix/nn/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "emix/errors.hpp"

namespace emix::nn {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FileError("truncated checkpoint: " + path.string());
  return to_little(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.step_count);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (Index d : e.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (Index k = 0; k < e.size(); ++k) put<double>(out, e.value.data()[k]);
  }
  if (!out) throw FileError("failed writing checkpoint: " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("missing checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FileError("not an emix checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FileError("unsupported checkpoint version " + std::to_string(version));
  }
  ParamSet params;
  params.step_count = get<std::uint64_t>(in, path);
  const auto n = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = get<std::uint32_t>(in, path);
    if (rank < 1 || rank > 2) throw FileError("bad rank in checkpoint entry '" + name + "'");
    std::vector<Index> shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<Index>(get<std::uint64_t>(in, path)));
    }
    const std::size_t idx = params.add(name, shape);
    auto& v = params[idx].value;
    for (Index k = 0; k < v.size(); ++k) v.data()[k] = get<double>(in, path);
  }
  return params;
}

void load_checkpoint_into(const std::filesystem::path& path, ParamSet& params) {
  ParamSet loaded = load_checkpoint(path);
  params.copy_values_from(loaded);
  params.step_count = loaded.step_count;
}

}  // namespace emix::nn
