#pragma once

// Binary checkpoint container: magic "VQEC", a format version, the model
// configuration echoed back, then named float32 tensor records with explicit
// shapes. All multi-byte fields are little-endian regardless of host order,
// so files round-trip bit-exactly across machines.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vqe/errors.hpp"
#include "vqe/mganet.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

namespace detail {

inline void put_u16_le(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_i32_le(std::ostream& os, std::int32_t v) {
  put_u32_le(os, static_cast<std::uint32_t>(v));
}

inline void put_f32_le(std::ostream& os, float v) {
  put_u32_le(os, std::bit_cast<std::uint32_t>(v));
}

inline std::uint16_t get_u16_le(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw FormatError("checkpoint: truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::int32_t get_i32_le(std::istream& is) {
  return static_cast<std::int32_t>(get_u32_le(is));
}

inline float get_f32_le(std::istream& is) {
  return std::bit_cast<float>(get_u32_le(is));
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'V', 'Q', 'E', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MganetConfig config;
  ParamTensors<float> params;
};

inline void save_checkpoint(const std::string& path, const MganetConfig& cfg,
                            const ParamTensors<float>& params) {
  using namespace detail;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  put_u32_le(os, kCheckpointVersion);
  put_i32_le(os, cfg.width_divisor);
  put_i32_le(os, cfg.temporal_radius);
  put_i32_le(os, cfg.lstm_layers);
  os.put(static_cast<char>(cfg.fusion));
  os.put(cfg.guidance ? 1 : 0);
  put_u32_le(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    if (name.size() > 0xffff) throw ConfigError("checkpoint: parameter name too long: " + name);
    put_u16_le(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_i32_le(os, tensor.shape.n);
    put_i32_le(os, tensor.shape.c);
    put_i32_le(os, tensor.shape.h);
    put_i32_le(os, tensor.shape.w);
    for (float v : tensor.data) put_f32_le(os, v);
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace detail;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
    throw FormatError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = get_u32_le(is);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config.width_divisor = get_i32_le(is);
  ckpt.config.temporal_radius = get_i32_le(is);
  ckpt.config.lstm_layers = get_i32_le(is);
  const int fusion = is.get();
  const int guidance = is.get();
  if (fusion < 0 || fusion > 3 || guidance < 0) throw FormatError("checkpoint: bad config block");
  ckpt.config.fusion = static_cast<Fusion>(fusion);
  ckpt.config.guidance = guidance != 0;
  ckpt.config.validate();

  const std::uint32_t count = get_u32_le(is);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint16_t name_len = get_u16_le(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("checkpoint: truncated record name");
    TensorShape shape{get_i32_le(is), get_i32_le(is), get_i32_le(is), get_i32_le(is)};
    if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
      throw FormatError("checkpoint: invalid shape for record " + name);
    }
    Tensor<float> t(shape);
    for (auto& v : t.data) v = get_f32_le(is);
    if (!ckpt.params.emplace(std::move(name), std::move(t)).second) {
      throw FormatError("checkpoint: duplicate record");
    }
  }

  // The stored inventory must match what the echoed config implies.
  const auto specs = param_specs(ckpt.config);
  if (specs.size() != ckpt.params.size()) {
    throw FormatError("checkpoint: record count does not match config");
  }
  for (const ParamSpec& spec : specs) {
    auto it = ckpt.params.find(spec.name);
    if (it == ckpt.params.end()) throw FormatError("checkpoint: missing record " + spec.name);
    if (!(it->second.shape == spec.shape)) {
      throw FormatError("checkpoint: shape mismatch for " + spec.name);
    }
  }
  return ckpt;
}

}  // namespace vqe
