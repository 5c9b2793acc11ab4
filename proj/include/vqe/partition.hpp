#pragma once

// TU-partition sidecar parsing plus the guided-map generators: per-pixel
// depth, TU-boundary, and per-TU mean maps derived from the quadtree leaf
// blocks of each frame.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"

namespace vqe {

struct Tu {
  int x = 0;
  int y = 0;
  int size = 0;

  // depth relative to the 64×64 CTU root
  int depth() const {
    int d = 0;
    for (int s = 64; s > size; s /= 2) ++d;
    return d;
  }
  bool operator==(const Tu&) const = default;
};

struct TuPartition {
  std::vector<Tu> tus;
};

struct TuSequence {
  int width = 0;
  int height = 0;
  std::vector<TuPartition> frames;
};

struct ValidationReport {
  bool ok = true;
  std::string message;
};

inline bool valid_tu_size(int s) { return s == 4 || s == 8 || s == 16 || s == 32; }

// Checks the tiling invariants by painting an ownership grid: every TU
// aligned to its own size, no overlap, no gap.
inline ValidationReport validate_partition(const TuPartition& p, int width, int height) {
  auto fail = [](std::string msg) { return ValidationReport{false, std::move(msg)}; };
  if (width <= 0 || height <= 0) return fail("non-positive frame dimensions");
  std::vector<std::int32_t> owner(static_cast<std::size_t>(width) * height, -1);
  for (std::size_t i = 0; i < p.tus.size(); ++i) {
    const Tu& t = p.tus[i];
    if (!valid_tu_size(t.size)) {
      return fail("TU " + std::to_string(i) + ": invalid size " + std::to_string(t.size));
    }
    if (t.x % t.size != 0 || t.y % t.size != 0) {
      return fail("TU " + std::to_string(i) + ": alignment violation at (" + std::to_string(t.x) +
                  "," + std::to_string(t.y) + ") size " + std::to_string(t.size));
    }
    if (t.x < 0 || t.y < 0 || t.x + t.size > width || t.y + t.size > height) {
      return fail("TU " + std::to_string(i) + ": out of bounds at (" + std::to_string(t.x) + "," +
                  std::to_string(t.y) + ") size " + std::to_string(t.size));
    }
    for (int yy = t.y; yy < t.y + t.size; ++yy) {
      for (int xx = t.x; xx < t.x + t.size; ++xx) {
        std::int32_t& o = owner[static_cast<std::size_t>(yy) * width + xx];
        if (o != -1) {
          return fail("TU " + std::to_string(i) + " overlaps TU " + std::to_string(o) + " at (" +
                      std::to_string(xx) + "," + std::to_string(yy) + ")");
        }
        o = static_cast<std::int32_t>(i);
      }
    }
  }
  for (int yy = 0; yy < height; ++yy) {
    for (int xx = 0; xx < width; ++xx) {
      if (owner[static_cast<std::size_t>(yy) * width + xx] == -1) {
        return fail("coverage gap at (" + std::to_string(xx) + "," + std::to_string(yy) + ")");
      }
    }
  }
  return {};
}

// Sidecar text format, one file per sequence:
//   # vqe-tu v1
//   dims <width> <height>
//   frame <index>
//   <x> <y> <size>
// Frames appear in display order with consecutive indices from 0. Every
// frame is validated; violations reject the file with a line number.
inline TuSequence parse_tu_stream(std::istream& in, const std::string& name) {
  auto fail = [&](int line_no, const std::string& why) -> void {
    throw FormatError(name + ":" + std::to_string(line_no) + ": " + why);
  };
  TuSequence seq;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++line_no;
  if (line != "# vqe-tu v1") fail(line_no, "missing '# vqe-tu v1' header");

  bool have_dims = false;
  int current_frame = -1;
  int frame_decl_line = 0;
  auto close_frame = [&]() {
    if (current_frame < 0) return;
    const ValidationReport r =
        validate_partition(seq.frames[current_frame], seq.width, seq.height);
    if (!r.ok) fail(frame_decl_line, "frame " + std::to_string(current_frame) + ": " + r.message);
  };

  while (std::getline(in, line)) {
    ++line_no;
    // tolerate trailing carriage returns and skip blank lines
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "dims") {
      if (have_dims) fail(line_no, "duplicate dims line");
      if (!(ls >> seq.width >> seq.height) || seq.width <= 0 || seq.height <= 0) {
        fail(line_no, "bad dims line");
      }
      have_dims = true;
    } else if (tok == "frame") {
      if (!have_dims) fail(line_no, "frame before dims");
      int idx = -1;
      if (!(ls >> idx)) fail(line_no, "bad frame line");
      close_frame();
      if (idx != current_frame + 1) {
        fail(line_no, "frame indices must be consecutive from 0, got " + std::to_string(idx));
      }
      current_frame = idx;
      seq.frames.emplace_back();
      frame_decl_line = line_no;
    } else {
      if (current_frame < 0) fail(line_no, "TU line before any frame");
      Tu t;
      std::istringstream tu_line(line);
      if (!(tu_line >> t.x >> t.y >> t.size)) fail(line_no, "bad TU line");
      std::string extra;
      if (tu_line >> extra) fail(line_no, "trailing tokens on TU line");
      seq.frames[current_frame].tus.push_back(t);
    }
  }
  if (!have_dims) fail(line_no, "missing dims line");
  if (current_frame < 0) fail(line_no, "no frames declared");
  close_frame();
  return seq;
}

inline TuSequence parse_tu_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  return parse_tu_stream(f, path);
}

inline void write_tu_file(const std::string& path, const TuSequence& seq) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# vqe-tu v1\n";
  f << "dims " << seq.width << " " << seq.height << "\n";
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    f << "frame " << i << "\n";
    for (const Tu& t : seq.frames[i].tus) {
      f << t.x << " " << t.y << " " << t.size << "\n";
    }
  }
  if (!f) throw IoError("short write: " + path);
}

// J^p: per-pixel quadtree depth of the covering TU.
inline LumaFrame depth_map(const TuPartition& p, int width, int height) {
  LumaFrame map(width, height);
  for (const Tu& t : p.tus) {
    const auto d = static_cast<std::uint8_t>(t.depth());
    for (int yy = t.y; yy < t.y + t.size; ++yy) {
      for (int xx = t.x; xx < t.x + t.size; ++xx) map.at(yy, xx) = d;
    }
  }
  return map;
}

// J^g: 1 on the first row/column of each TU where that edge is interior to
// the frame, 0 elsewhere.
inline LumaFrame boundary_map(const TuPartition& p, int width, int height) {
  LumaFrame map(width, height);
  for (const Tu& t : p.tus) {
    if (t.y > 0) {
      for (int xx = t.x; xx < t.x + t.size; ++xx) map.at(t.y, xx) = 1;
    }
    if (t.x > 0) {
      for (int yy = t.y; yy < t.y + t.size; ++yy) map.at(yy, t.x) = 1;
    }
  }
  return map;
}

// J^m: each TU filled with the rounded mean of the frame's pixels in it
// (round-half-up — the map is 8-bit imagery).
inline LumaFrame mean_map(const LumaFrame& frame, const TuPartition& p) {
  LumaFrame map(frame.width, frame.height);
  for (const Tu& t : p.tus) {
    std::int64_t sum = 0;
    for (int yy = t.y; yy < t.y + t.size; ++yy) {
      for (int xx = t.x; xx < t.x + t.size; ++xx) sum += frame.at(yy, xx);
    }
    const double mean = static_cast<double>(sum) / (static_cast<double>(t.size) * t.size);
    const auto v = static_cast<std::uint8_t>(std::floor(mean + 0.5));
    for (int yy = t.y; yy < t.y + t.size; ++yy) {
      for (int xx = t.x; xx < t.x + t.size; ++xx) map.at(yy, xx) = v;
    }
  }
  return map;
}

struct GuidedMapSet {
  LumaFrame depth;     // J^p
  LumaFrame boundary;  // J^g
  LumaFrame mean;      // J^m
};

inline GuidedMapSet guided_maps(const LumaFrame& frame, const TuPartition& p) {
  if (frame.width <= 0 || frame.height <= 0) throw ShapeError("guided_maps: empty frame");
  return GuidedMapSet{depth_map(p, frame.width, frame.height),
                      boundary_map(p, frame.width, frame.height), mean_map(frame, p)};
}

// Regular grid of size×size TUs — the partition induced by a flat
// block-transform simulation. Dimensions must be multiples of the size.
inline TuPartition uniform_partition(int width, int height, int size) {
  if (!valid_tu_size(size)) {
    throw ShapeError("uniform_partition: invalid TU size " + std::to_string(size));
  }
  if (width % size != 0 || height % size != 0) {
    throw ShapeError("uniform_partition: " + std::to_string(width) + "x" +
                     std::to_string(height) + " not a multiple of " + std::to_string(size));
  }
  TuPartition part;
  part.tus.reserve(static_cast<std::size_t>(width / size) * (height / size));
  for (int y = 0; y < height; y += size)
    for (int x = 0; x < width; x += size) part.tus.push_back(Tu{x, y, size});
  return part;
}

// Seeded random quadtree over the CTU grid: every 64×64 root recursively
// splits with probability `split_prob` per level until the 4×4 leaves.
// Partial CTUs at the right/bottom frame border split down to whatever
// fits. Dimensions must be multiples of 4.
template <typename Rng>
TuPartition random_partition(int width, int height, Rng& rng, double split_prob = 0.5) {
  if (width % 4 != 0 || height % 4 != 0) {
    throw ShapeError("random_partition: dimensions must be multiples of 4");
  }
  TuPartition part;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  // recursive split; the 64×64 root and blocks sticking out of the frame
  // always split (TU leaves are at most 32×32)
  auto emit = [&](auto&& self, int x, int y, int size) -> void {
    const bool fits = size <= 32 && (x + size <= width) && (y + size <= height);
    if (x >= width || y >= height) return;
    if (fits && (size == 4 || coin(rng) >= split_prob)) {
      part.tus.push_back(Tu{x, y, size});
      return;
    }
    const int h = size / 2;
    self(self, x, y, h);
    self(self, x + h, y, h);
    self(self, x, y + h, h);
    self(self, x + h, y + h, h);
  };
  for (int y = 0; y < height; y += 64) {
    for (int x = 0; x < width; x += 64) emit(emit, x, y, 64);
  }
  return part;
}

}  // namespace vqe
