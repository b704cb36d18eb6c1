// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint format, one binary file:
//   u32 format version, u64 parameter count, then per parameter
//   u32 name length, name bytes, u32 rank, u64 dims, float32 LE values.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "beamloop/nn/optim.hpp"

namespace beamloop::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

inline float read_f32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

} // namespace detail

template <typename S>
void save_checkpoint(const ParameterSet<S>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint64_t>(os, params.size());
  for (const auto& name : params.names()) {
    const auto& t = params.at(name);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) detail::write_le<std::uint64_t>(os, d);
    for (auto v : t.values()) detail::write_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

struct RawParameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

inline std::vector<RawParameter> load_checkpoint_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: missing-file " + path);
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  const auto count = detail::read_le<std::uint64_t>(is);
  std::vector<RawParameter> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    RawParameter p;
    const auto name_len = detail::read_le<std::uint32_t>(is);
    p.name.resize(name_len);
    is.read(p.name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    const auto rank = detail::read_le<std::uint32_t>(is);
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      p.shape.push_back(static_cast<std::size_t>(detail::read_le<std::uint64_t>(is)));
      numel *= p.shape.back();
    }
    p.values.resize(numel);
    for (auto& v : p.values) v = detail::read_f32(is);
    out.push_back(std::move(p));
  }
  return out;
}

/// Loads values into an existing parameter set; names and shapes must match.
template <typename S>
void load_checkpoint(ParameterSet<S>& params, const std::string& path) {
  auto raw = load_checkpoint_raw(path);
  if (raw.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
  for (const auto& p : raw) {
    if (!params.contains(p.name))
      throw std::runtime_error("checkpoint: unexpected parameter " + p.name);
    auto& t = params.at(p.name);
    if (t.shape() != p.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.values.size(); ++i) t.values()[i] = static_cast<S>(p.values[i]);
  }
}

} // namespace beamloop::nn
