#pragma once

// Block-DCT quantization simulator: the only lossy step of the modeled
// codec is coefficient quantization, so a decoded frame is
// idct(quantize(dct(block))) per block. Also provides the windowed
// quantization-noise statistics used for the spatial/temporal analysis
// maps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vqe/errors.hpp"

namespace vqe {

struct LumaFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> samples;  // row-major

  LumaFrame() = default;
  LumaFrame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int y, int x) { return samples[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return samples[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const LumaFrame&) const = default;
};

// Per-pixel real-valued map (noise deviations, guidance planes).
struct FloatMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  FloatMap() = default;
  FloatMap(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const FloatMap&) const = default;
};

struct BlockSpectrum {
  int size = 0;
  std::vector<double> coeff;  // size*size, row-major (u, v)
};

struct QuantMatrix {
  int size = 0;
  std::vector<double> steps;  // size*size, all >= 1

  static QuantMatrix flat(int p, double step) {
    if (step < 1.0) step = 1.0;
    QuantMatrix q;
    q.size = p;
    q.steps.assign(static_cast<std::size_t>(p) * p, step);
    return q;
  }
};

inline bool valid_block_size(int p) { return p == 4 || p == 8 || p == 16 || p == 32; }

// HEVC step-size law, floored at 1 to respect the QuantMatrix invariant.
inline double qstep_from_qp(int qp) {
  return std::max(1.0, std::pow(2.0, (qp - 4) / 6.0));
}

namespace detail {

// Orthonormal DCT-II basis: M[u][i] = c_u cos(pi (2i+1) u / 2p).
inline const std::vector<double>& dct_matrix(int p) {
  if (!valid_block_size(p)) throw ShapeError("dct2: unsupported block size " + std::to_string(p));
  static std::map<int, std::vector<double>> cache;
  auto it = cache.find(p);
  if (it != cache.end()) return it->second;
  std::vector<double> m(static_cast<std::size_t>(p) * p);
  const double pi = std::acos(-1.0);
  for (int u = 0; u < p; ++u) {
    const double c = (u == 0) ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p);
    for (int i = 0; i < p; ++i) {
      m[static_cast<std::size_t>(u) * p + i] = c * std::cos(pi * (2 * i + 1) * u / (2.0 * p));
    }
  }
  return cache.emplace(p, std::move(m)).first->second;
}

// out = A * B or A^T * B for p×p row-major matrices.
inline void matmul(const double* a, bool ta, const double* b, bool tb, int p, double* out) {
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      double acc = 0;
      for (int k = 0; k < p; ++k) {
        const double av = ta ? a[static_cast<std::size_t>(k) * p + i]
                             : a[static_cast<std::size_t>(i) * p + k];
        const double bv = tb ? b[static_cast<std::size_t>(j) * p + k]
                             : b[static_cast<std::size_t>(k) * p + j];
        acc += av * bv;
      }
      out[static_cast<std::size_t>(i) * p + j] = acc;
    }
  }
}

inline double round_half_away(double v) { return std::round(v); }

}  // namespace detail

// Forward orthonormal 2-D DCT-II of a p×p pixel block: Y = M X M^T.
inline BlockSpectrum dct2(const std::vector<double>& block, int p) {
  if (!valid_block_size(p)) throw ShapeError("dct2: unsupported block size " + std::to_string(p));
  if (block.size() != static_cast<std::size_t>(p) * p) {
    throw ShapeError("dct2: block size mismatch");
  }
  const auto& m = detail::dct_matrix(p);
  std::vector<double> tmp(block.size());
  BlockSpectrum s;
  s.size = p;
  s.coeff.resize(block.size());
  detail::matmul(m.data(), false, block.data(), false, p, tmp.data());
  detail::matmul(tmp.data(), false, m.data(), true, p, s.coeff.data());
  return s;
}

// Inverse: X = M^T Y M.
inline std::vector<double> idct2(const BlockSpectrum& s) {
  if (!valid_block_size(s.size)) {
    throw ShapeError("idct2: unsupported block size " + std::to_string(s.size));
  }
  const int p = s.size;
  const auto& m = detail::dct_matrix(p);
  std::vector<double> tmp(s.coeff.size()), out(s.coeff.size());
  detail::matmul(m.data(), true, s.coeff.data(), false, p, tmp.data());
  detail::matmul(tmp.data(), false, m.data(), false, p, out.data());
  return out;
}

// Eq-style quantize/dequantize: each coefficient becomes R(x/Q)·Q with
// round-half-away-from-zero.
inline BlockSpectrum quantize_spectrum(const BlockSpectrum& spec, const QuantMatrix& q) {
  if (spec.size != q.size) throw ShapeError("quantize_spectrum: size mismatch");
  BlockSpectrum out;
  out.size = spec.size;
  out.coeff.resize(spec.coeff.size());
  for (std::size_t i = 0; i < spec.coeff.size(); ++i) {
    out.coeff[i] = detail::round_half_away(spec.coeff[i] / q.steps[i]) * q.steps[i];
  }
  return out;
}

// Transform + quantize + inverse-transform every p×p block. Frames whose
// dimensions are not multiples of p are padded by edge replication; the
// padding is stripped from the output.
inline LumaFrame compress_frame(const LumaFrame& frame, int p, const QuantMatrix& q) {
  if (!valid_block_size(p)) {
    throw ShapeError("compress_frame: unsupported block size " + std::to_string(p));
  }
  if (q.size != p) throw ShapeError("compress_frame: quant matrix size mismatch");
  if (frame.width <= 0 || frame.height <= 0) throw ShapeError("compress_frame: empty frame");
  const int pw = (frame.width + p - 1) / p * p;
  const int ph = (frame.height + p - 1) / p * p;
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, frame.height - 1);
    for (int x = 0; x < pw; ++x) {
      const int sx = std::min(x, frame.width - 1);
      padded[static_cast<std::size_t>(y) * pw + x] = frame.at(sy, sx);
    }
  }
  std::vector<double> block(static_cast<std::size_t>(p) * p);
  for (int by = 0; by < ph; by += p) {
    for (int bx = 0; bx < pw; bx += p) {
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          block[static_cast<std::size_t>(y) * p + x] =
              padded[static_cast<std::size_t>(by + y) * pw + bx + x];
        }
      }
      const BlockSpectrum spec = quantize_spectrum(dct2(block, p), q);
      const std::vector<double> rec = idct2(spec);
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          padded[static_cast<std::size_t>(by + y) * pw + bx + x] =
              rec[static_cast<std::size_t>(y) * p + x];
        }
      }
    }
  }
  LumaFrame out(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double v = detail::round_half_away(padded[static_cast<std::size_t>(y) * pw + x]);
      out.at(y, x) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

// Population standard deviation of (decoded - original) over a clipped
// (2r+1)×(2r+1) window centred at each pixel.
inline FloatMap noise_std_map(const LumaFrame& decoded, const LumaFrame& original,
                              int radius = 2) {
  if (decoded.width != original.width || decoded.height != original.height) {
    throw ShapeError("noise_std_map: dimension mismatch");
  }
  if (radius < 0) throw ShapeError("noise_std_map: negative radius");
  const int w = decoded.width, h = decoded.height;
  std::vector<double> err(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < err.size(); ++i) {
    err[i] = static_cast<double>(decoded.samples[i]) - static_cast<double>(original.samples[i]);
  }
  FloatMap map(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      double s = 0, s2 = 0;
      int n = 0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          const double e = err[static_cast<std::size_t>(yy) * w + xx];
          s += e;
          s2 += e * e;
          ++n;
        }
      }
      const double mean = s / n;
      const double var = std::max(0.0, s2 / n - mean * mean);
      map.at(y, x) = std::sqrt(var);
    }
  }
  return map;
}

// Per-pixel absolute difference of two noise maps.
inline FloatMap temporal_noise_diff(const FloatMap& a, const FloatMap& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("temporal_noise_diff: dimension mismatch");
  }
  FloatMap out(a.width, a.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = std::fabs(a.values[i] - b.values[i]);
  }
  return out;
}

}  // namespace vqe
