#pragma once

// Binary PGM (P5, maxval 255) I/O for luma frames and min-max-scaled float
// maps. Scaled writes record their (min, max) in an adjacent `<path>.scale`
// text file so the affine mapping can be reconstructed exactly.

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"

namespace vqe {

inline void write_pgm(const std::string& path, const LumaFrame& frame) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(frame.samples.data()),
          static_cast<std::streamsize>(frame.samples.size()));
  if (!f) throw IoError("short write: " + path);
}

inline LumaFrame read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw FormatError("not a binary PGM (P5): " + path);
  auto next_token = [&]() -> long {
    // skip whitespace and '#' comment lines, as the PGM grammar allows
    for (;;) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    long v = -1;
    f >> v;
    return v;
  };
  const long w = next_token(), h = next_token(), maxval = next_token();
  if (!f || w <= 0 || h <= 0) throw FormatError("bad PGM header: " + path);
  if (maxval != 255) throw FormatError("unsupported PGM maxval (want 255): " + path);
  f.get();  // single whitespace byte after maxval
  LumaFrame frame(static_cast<int>(w), static_cast<int>(h));
  f.read(reinterpret_cast<char*>(frame.samples.data()),
         static_cast<std::streamsize>(frame.samples.size()));
  if (f.gcount() != static_cast<std::streamsize>(frame.samples.size())) {
    throw FormatError("truncated PGM payload: " + path);
  }
  return frame;
}

struct MapScale {
  double min = 0.0;
  double max = 0.0;
};

// Min-max scales a float map into [0,255] and writes it as P5; the scale
// goes to `<path>.scale`. A constant map writes as all-zero with min=max.
inline MapScale write_scaled_pgm(const std::string& path, const FloatMap& map) {
  MapScale sc{std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
  for (double v : map.values) {
    sc.min = std::min(sc.min, v);
    sc.max = std::max(sc.max, v);
  }
  if (map.values.empty()) sc = {0.0, 0.0};
  LumaFrame frame(map.width, map.height);
  const double range = sc.max - sc.min;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const double t = range > 0 ? (map.values[i] - sc.min) / range : 0.0;
    frame.samples[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
  }
  write_pgm(path, frame);
  std::ofstream f(path + ".scale");
  if (!f) throw IoError("cannot open for writing: " + path + ".scale");
  f.precision(17);
  f << "min " << sc.min << "\nmax " << sc.max << "\n";
  if (!f) throw IoError("short write: " + path + ".scale");
  return sc;
}

inline MapScale read_map_scale(const std::string& path) {
  std::ifstream f(path + ".scale");
  if (!f) throw IoError("cannot open for reading: " + path + ".scale");
  MapScale sc;
  std::string k1, k2;
  if (!(f >> k1 >> sc.min >> k2 >> sc.max) || k1 != "min" || k2 != "max") {
    throw FormatError("bad scale sidecar: " + path + ".scale");
  }
  return sc;
}

}  // namespace vqe
