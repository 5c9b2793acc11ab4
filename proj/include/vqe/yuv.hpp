#pragma once

// Planar YUV 4:2:0 8-bit clip I/O. Enhancement touches only the luma plane;
// chroma is carried through untouched so a read-write cycle is bit-exact.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"

namespace vqe {

struct Yuv420Frame {
  LumaFrame y;
  std::vector<std::uint8_t> u, v;  // each (width/2)*(height/2)
};

using Yuv420Clip = std::vector<Yuv420Frame>;

inline std::size_t yuv420_frame_bytes(int width, int height) {
  return static_cast<std::size_t>(width) * height * 3 / 2;
}

inline Yuv420Clip read_yuv420(const std::string& path, int width, int height) {
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
    throw ConfigError("yuv: dimensions must be positive and even, got " + std::to_string(width) +
                      "x" + std::to_string(height));
  }
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("yuv: cannot open " + path);
  const std::size_t total = static_cast<std::size_t>(is.tellg());
  const std::size_t per_frame = yuv420_frame_bytes(width, height);
  if (total == 0 || total % per_frame != 0) {
    throw FormatError("yuv: file size " + std::to_string(total) + " is not a positive multiple of the " +
                      std::to_string(per_frame) + "-byte frame size for " + std::to_string(width) +
                      "x" + std::to_string(height));
  }
  is.seekg(0);
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma = luma / 4;
  Yuv420Clip clip(total / per_frame);
  for (auto& frame : clip) {
    frame.y.width = width;
    frame.y.height = height;
    frame.y.samples.resize(luma);
    frame.u.resize(chroma);
    frame.v.resize(chroma);
    is.read(reinterpret_cast<char*>(frame.y.samples.data()), static_cast<std::streamsize>(luma));
    is.read(reinterpret_cast<char*>(frame.u.data()), static_cast<std::streamsize>(chroma));
    is.read(reinterpret_cast<char*>(frame.v.data()), static_cast<std::streamsize>(chroma));
    if (!is) throw IoError("yuv: short read from " + path);
  }
  return clip;
}

inline void write_yuv420(const std::string& path, const Yuv420Clip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("yuv: cannot open for writing: " + path);
  for (const auto& frame : clip) {
    const std::size_t luma = static_cast<std::size_t>(frame.y.width) * frame.y.height;
    if (frame.y.samples.size() != luma || frame.u.size() != luma / 4 || frame.v.size() != luma / 4) {
      throw ShapeError("yuv: inconsistent plane sizes on write");
    }
    os.write(reinterpret_cast<const char*>(frame.y.samples.data()),
             static_cast<std::streamsize>(luma));
    os.write(reinterpret_cast<const char*>(frame.u.data()),
             static_cast<std::streamsize>(frame.u.size()));
    os.write(reinterpret_cast<const char*>(frame.v.data()),
             static_cast<std::streamsize>(frame.v.size()));
  }
  if (!os) throw IoError("yuv: write failed: " + path);
}

inline std::vector<LumaFrame> luma_clip(const Yuv420Clip& clip) {
  std::vector<LumaFrame> out;
  out.reserve(clip.size());
  for (const auto& f : clip) out.push_back(f.y);
  return out;
}

// Wraps luma frames with neutral (128) chroma planes.
inline Yuv420Clip clip_from_luma(const std::vector<LumaFrame>& frames) {
  Yuv420Clip clip;
  clip.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.width % 2 != 0 || f.height % 2 != 0) {
      throw ShapeError("yuv: luma dimensions must be even for 4:2:0");
    }
    Yuv420Frame yf;
    yf.y = f;
    yf.u.assign(static_cast<std::size_t>(f.width / 2) * (f.height / 2), 128);
    yf.v = yf.u;
    clip.push_back(std::move(yf));
  }
  return clip;
}

// Replaces luma planes, keeping the original chroma untouched.
inline Yuv420Clip with_luma(const Yuv420Clip& base, const std::vector<LumaFrame>& luma) {
  if (base.size() != luma.size()) throw ShapeError("yuv: frame count mismatch in with_luma");
  Yuv420Clip out = base;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (luma[i].width != base[i].y.width || luma[i].height != base[i].y.height) {
      throw ShapeError("yuv: luma dimensions mismatch in with_luma");
    }
    out[i].y = luma[i];
  }
  return out;
}

}  // namespace vqe
