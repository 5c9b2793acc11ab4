#pragma once

// Deterministic synthetic video for pipeline tests: a smooth gradient
// background, moving rectangles and a disc, and a low-amplitude sine
// texture. Structured enough that block compression leaves visible,
// learnable artifacts.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/partition.hpp"
#include "vqe/sampling.hpp"

namespace vqe::testing {

inline std::vector<LumaFrame> synthetic_clip(int width, int height, int frames,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double gx = (u01(rng) - 0.5) * 1.6;  // background gradient slopes
  const double gy = (u01(rng) - 0.5) * 1.6;
  const double base = 90.0 + 60.0 * u01(rng);
  const double tex_amp = 6.0 + 6.0 * u01(rng);
  const double tex_fx = 0.2 + 0.5 * u01(rng);
  const double tex_fy = 0.2 + 0.5 * u01(rng);

  struct Rect {
    double x, y, vx, vy, w, h, value;
  };
  std::vector<Rect> rects;
  for (int i = 0; i < 3; ++i) {
    Rect r;
    r.w = width * (0.15 + 0.2 * u01(rng));
    r.h = height * (0.15 + 0.2 * u01(rng));
    r.x = u01(rng) * (width - r.w);
    r.y = u01(rng) * (height - r.h);
    r.vx = (u01(rng) - 0.5) * 4.0;
    r.vy = (u01(rng) - 0.5) * 4.0;
    r.value = 40.0 + 180.0 * u01(rng);
    rects.push_back(r);
  }
  const double disc_r = 0.12 * std::min(width, height) + 2.0;
  double dx = u01(rng) * width, dy = u01(rng) * height;
  const double dvx = (u01(rng) - 0.5) * 3.0, dvy = (u01(rng) - 0.5) * 3.0;
  const double disc_value = 30.0 + 190.0 * u01(rng);

  std::vector<LumaFrame> clip;
  for (int t = 0; t < frames; ++t) {
    LumaFrame f;
    f.width = width;
    f.height = height;
    f.samples.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = base + gx * x + gy * y +
                   tex_amp * std::sin(tex_fx * x + 0.3 * t) * std::cos(tex_fy * y - 0.2 * t);
        for (const Rect& r : rects) {
          const double rx = r.x + r.vx * t, ry = r.y + r.vy * t;
          if (x >= rx && x < rx + r.w && y >= ry && y < ry + r.h) v = r.value;
        }
        const double cx = dx + dvx * t, cy = dy + dvy * t;
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < disc_r * disc_r) v = disc_value;
        f.at(y, x) = static_cast<std::uint8_t>(std::lround(std::min(235.0, std::max(16.0, v))));
      }
    }
    clip.push_back(std::move(f));
  }
  return clip;
}

// Raw/compressed pairs from the block-DCT simulator, with the simulator's
// own uniform block tiling as the TU partition sidecar.
inline FramePairSet make_pair_set(int width, int height, int frames, int qp, int block,
                                  std::uint64_t seed) {
  FramePairSet set;
  set.qp = qp;
  set.raw = synthetic_clip(width, height, frames, seed);
  const QuantMatrix q = QuantMatrix::flat(block, qstep_from_qp(qp));
  TuSequence seq;
  seq.width = width;
  seq.height = height;
  for (const auto& frame : set.raw) {
    set.compressed.push_back(compress_frame(frame, block, q));
    TuPartition part;
    for (int y = 0; y < height; y += block) {
      for (int x = 0; x < width; x += block) part.tus.push_back({x, y, block});
    }
    seq.frames.push_back(std::move(part));
  }
  set.partitions = std::move(seq);
  return set;
}

}  // namespace vqe::testing
