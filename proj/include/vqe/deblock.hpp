#pragma once

// Boundary-filter mode oracle: strong/normal/none low-pass filters applied
// per 4-sample segment of interior 8×8 block boundaries, with an
// exhaustive chooser that picks the distortion-optimal mode per segment
// given the uncompressed original.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"

namespace vqe {

enum class DeblockMode : std::uint8_t { none = 0, normal = 1, strong = 2 };

inline const char* to_string(DeblockMode m) {
  switch (m) {
    case DeblockMode::none: return "none";
    case DeblockMode::normal: return "normal";
    case DeblockMode::strong: return "strong";
  }
  return "?";
}

// One line of 8 samples across a boundary: p3 p2 p1 p0 | q0 q1 q2 q3,
// indices 0..7 in that order.
using BoundaryLine = std::array<int, 8>;

namespace detail {

inline int clip255(int v) { return v < 0 ? 0 : (v > 255 ? 255 : v); }

}  // namespace detail

// Integer tap formulas (arithmetic shifts; Δ>>1 floors for negative Δ):
//   strong: p0' = (p2 + 2p1 + 2p0 + 2q0 + q1 + 4) >> 3
//           p1' = (p2 + p1 + p0 + q0 + 2) >> 2
//           p2' = (2p3 + 3p2 + p1 + p0 + q0 + 4) >> 3       (q side mirrored)
//   normal: Δ  = (9(q0 − p0) − 3(q1 − p1) + 8) >> 4
//           p0' = p0 + Δ, q0' = q0 − Δ, p1' = p1 + (Δ>>1), q1' = q1 − (Δ>>1)
// Outputs clipped to [0,255]. none is the identity.
inline BoundaryLine filter_line(const BoundaryLine& s, DeblockMode mode) {
  const int p3 = s[0], p2 = s[1], p1 = s[2], p0 = s[3];
  const int q0 = s[4], q1 = s[5], q2 = s[6], q3 = s[7];
  BoundaryLine out = s;
  switch (mode) {
    case DeblockMode::none:
      break;
    case DeblockMode::normal: {
      const int delta = (9 * (q0 - p0) - 3 * (q1 - p1) + 8) >> 4;
      out[3] = detail::clip255(p0 + delta);
      out[4] = detail::clip255(q0 - delta);
      out[2] = detail::clip255(p1 + (delta >> 1));
      out[5] = detail::clip255(q1 - (delta >> 1));
      break;
    }
    case DeblockMode::strong: {
      out[3] = detail::clip255((p2 + 2 * p1 + 2 * p0 + 2 * q0 + q1 + 4) >> 3);
      out[2] = detail::clip255((p2 + p1 + p0 + q0 + 2) >> 2);
      out[1] = detail::clip255((2 * p3 + 3 * p2 + p1 + p0 + q0 + 4) >> 3);
      out[4] = detail::clip255((q2 + 2 * q1 + 2 * q0 + 2 * p0 + p1 + 4) >> 3);
      out[5] = detail::clip255((q2 + q1 + q0 + p0 + 2) >> 2);
      out[6] = detail::clip255((2 * q3 + 3 * q2 + q1 + q0 + p0 + 4) >> 3);
      break;
    }
    default:
      throw ConfigError("filter_line: unknown mode");
  }
  return out;
}

using SegmentSamples = std::array<BoundaryLine, 4>;

inline SegmentSamples filter_segment(const SegmentSamples& seg, DeblockMode mode) {
  SegmentSamples out;
  for (int i = 0; i < 4; ++i) out[i] = filter_line(seg[i], mode);
  return out;
}

enum class Orientation : std::uint8_t { vertical = 0, horizontal = 1 };

struct SegmentDecision {
  Orientation orientation = Orientation::vertical;
  int boundary = 0;  // boundary index along its axis (0 = first interior)
  int segment = 0;   // 4-sample segment index along the boundary
  DeblockMode mode = DeblockMode::none;

  bool operator==(const SegmentDecision&) const = default;
};

using ModeMap = std::vector<SegmentDecision>;

inline int interior_boundaries(int extent) { return extent / 8 - 1; }

// Total decisions for a W×H frame: per orientation, (#interior boundaries)
// × (boundary length / 4).
inline std::size_t segment_count(int width, int height) {
  return static_cast<std::size_t>(interior_boundaries(width)) * (height / 4) +
         static_cast<std::size_t>(interior_boundaries(height)) * (width / 4);
}

namespace detail {

inline SegmentSamples read_segment(const LumaFrame& f, Orientation o, int bpos, int seg) {
  SegmentSamples s;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (o == Orientation::vertical) {
        s[i][j] = f.at(seg * 4 + i, bpos - 4 + j);
      } else {
        s[i][j] = f.at(bpos - 4 + j, seg * 4 + i);
      }
    }
  }
  return s;
}

inline void write_segment(LumaFrame& f, Orientation o, int bpos, int seg,
                          const SegmentSamples& s) {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      const auto v = static_cast<std::uint8_t>(s[i][j]);
      if (o == Orientation::vertical) {
        f.at(seg * 4 + i, bpos - 4 + j) = v;
      } else {
        f.at(bpos - 4 + j, seg * 4 + i) = v;
      }
    }
  }
}

// SSE against the original over the modifiable window p2..q2 (6 samples per
// line) — fixed across modes so their distortions are directly comparable.
inline long long segment_sse(const SegmentSamples& cand, const SegmentSamples& orig) {
  long long sse = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 1; j <= 6; ++j) {
      const long long d = cand[i][j] - orig[i][j];
      sse += d * d;
    }
  }
  return sse;
}

}  // namespace detail

struct OracleResult {
  ModeMap modes;
  LumaFrame filtered;
  long long total_sse = 0;     // oracle SSE over all modifiable windows
  long long nofilter_sse = 0;  // same windows, mode forced to none
};

// Exhaustively tries the three modes per segment and keeps the SSE-minimal
// one (ties favour none, then normal). The vertical pass runs first; the
// horizontal pass reads its output, as an in-loop filter would.
inline OracleResult oracle_decide(const LumaFrame& decoded, const LumaFrame& original) {
  if (decoded.width != original.width || decoded.height != original.height) {
    throw ShapeError("oracle_decide: dimension mismatch");
  }
  if (decoded.width % 8 != 0 || decoded.height % 8 != 0) {
    throw ShapeError("oracle_decide: dimensions must be multiples of 8");
  }
  OracleResult res;
  res.filtered = decoded;
  constexpr DeblockMode kModes[3] = {DeblockMode::none, DeblockMode::normal,
                                     DeblockMode::strong};
  for (Orientation o : {Orientation::vertical, Orientation::horizontal}) {
    const int extent = o == Orientation::vertical ? decoded.width : decoded.height;
    const int length = o == Orientation::vertical ? decoded.height : decoded.width;
    for (int b = 0; b < interior_boundaries(extent); ++b) {
      const int bpos = (b + 1) * 8;
      for (int seg = 0; seg < length / 4; ++seg) {
        const SegmentSamples cur = detail::read_segment(res.filtered, o, bpos, seg);
        const SegmentSamples orig = detail::read_segment(original, o, bpos, seg);
        DeblockMode best = DeblockMode::none;
        SegmentSamples best_out = cur;
        long long best_sse = detail::segment_sse(cur, orig);
        res.nofilter_sse += best_sse;
        for (DeblockMode m : {kModes[1], kModes[2]}) {
          const SegmentSamples cand = filter_segment(cur, m);
          const long long sse = detail::segment_sse(cand, orig);
          if (sse < best_sse) {
            best_sse = sse;
            best = m;
            best_out = cand;
          }
        }
        res.total_sse += best_sse;
        if (best != DeblockMode::none) detail::write_segment(res.filtered, o, bpos, seg, best_out);
        res.modes.push_back(SegmentDecision{o, b, seg, best});
      }
    }
  }
  return res;
}

// Applies an explicit per-segment mode assignment with the same pass
// structure as the oracle (vertical first, then horizontal on its output).
// The map must enumerate segments in oracle order.
inline LumaFrame apply_modes(const LumaFrame& decoded, const ModeMap& modes) {
  if (decoded.width % 8 != 0 || decoded.height % 8 != 0) {
    throw ShapeError("apply_modes: dimensions must be multiples of 8");
  }
  if (modes.size() != segment_count(decoded.width, decoded.height)) {
    throw ShapeError("apply_modes: mode count does not match frame geometry");
  }
  LumaFrame out = decoded;
  std::size_t idx = 0;
  for (Orientation o : {Orientation::vertical, Orientation::horizontal}) {
    const int extent = o == Orientation::vertical ? decoded.width : decoded.height;
    const int length = o == Orientation::vertical ? decoded.height : decoded.width;
    for (int b = 0; b < interior_boundaries(extent); ++b) {
      const int bpos = (b + 1) * 8;
      for (int seg = 0; seg < length / 4; ++seg, ++idx) {
        const DeblockMode m = modes[idx].mode;
        if (m == DeblockMode::none) continue;
        const SegmentSamples cur = detail::read_segment(out, o, bpos, seg);
        detail::write_segment(out, o, bpos, seg, filter_segment(cur, m));
      }
    }
  }
  return out;
}

inline LumaFrame apply_uniform(const LumaFrame& decoded, DeblockMode mode) {
  ModeMap map;
  map.assign(segment_count(decoded.width, decoded.height), SegmentDecision{});
  for (auto& d : map) d.mode = mode;
  return apply_modes(decoded, map);
}

// Signal-adaptive baseline in the spirit of an encoder-side rule: measures
// boundary activity d = |p2-2p1+p0| + |q2-2q1+q0| on the segment's outer
// lines and thresholds it — smooth-but-stepped boundaries get the strong
// filter, moderately active ones the normal filter, busy ones none.
inline ModeMap baseline_decide(const LumaFrame& decoded, int beta = 64) {
  if (decoded.width % 8 != 0 || decoded.height % 8 != 0) {
    throw ShapeError("baseline_decide: dimensions must be multiples of 8");
  }
  ModeMap map;
  for (Orientation o : {Orientation::vertical, Orientation::horizontal}) {
    const int extent = o == Orientation::vertical ? decoded.width : decoded.height;
    const int length = o == Orientation::vertical ? decoded.height : decoded.width;
    for (int b = 0; b < interior_boundaries(extent); ++b) {
      const int bpos = (b + 1) * 8;
      for (int seg = 0; seg < length / 4; ++seg) {
        const SegmentSamples s = detail::read_segment(decoded, o, bpos, seg);
        int d = 0;
        for (int i : {0, 3}) {
          d += std::abs(s[i][1] - 2 * s[i][2] + s[i][3]);
          d += std::abs(s[i][6] - 2 * s[i][5] + s[i][4]);
        }
        DeblockMode m = DeblockMode::none;
        if (d < beta / 4) {
          m = DeblockMode::strong;
        } else if (d < beta) {
          m = DeblockMode::normal;
        }
        map.push_back(SegmentDecision{o, b, seg, m});
      }
    }
  }
  return map;
}

// Fraction of segments on which two mode maps agree.
inline double agreement_stats(const ModeMap& a, const ModeMap& b) {
  if (a.size() != b.size()) throw ShapeError("agreement_stats: segment count mismatch");
  if (a.empty()) throw ShapeError("agreement_stats: empty mode maps");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].mode == b[i].mode) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace vqe
