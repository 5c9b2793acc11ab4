#pragma once

// Full-sequence enhancement: sliding temporal windows with clamped ends,
// edge-replication padding to the 16-pixel grid the model requires, and
// memory-bounded tiling. Tiles overlap by at least the model's receptive
// field and are center-cropped, and tile windows stay on the 16-pixel grid
// so the strided layers see the same phase as an untiled run — tiled and
// untiled outputs match exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"
#include "vqe/mganet.hpp"
#include "vqe/metrics.hpp"
#include "vqe/sampling.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

// Largest input offset (in pixels) any single output pixel can depend on,
// from a backward interval walk over the layer stack: the final head, four
// stride-2 deconv stages, the eight encoder layers, and the temporal convs.
// The prediction-head side branches re-join at coarser scales and never
// widen the interval beyond the main chain.
inline int receptive_field_radius(const MganetConfig& cfg) {
  long lo = 0, hi = 0;
  auto conv = [&](long k, long s, long p) {
    lo = lo * s - p;
    hi = hi * s - p + k - 1;
  };
  auto floor2 = [](long v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
  auto deconv4 = [&]() {  // kernel 4, stride 2, pad 1
    lo = floor2(lo - 1);  // = ceil((lo - 2) / 2)
    hi = floor2(hi + 1);
  };

  conv(3, 1, 1);  // final head
  for (int i = 0; i < 4; ++i) deconv4();
  conv(3, 1, 1);  // enc8
  conv(3, 2, 1);  // enc7
  conv(3, 1, 1);  // enc6
  conv(3, 2, 1);  // enc5
  conv(3, 1, 1);  // enc4
  conv(3, 2, 1);  // enc3
  conv(3, 1, 1);  // enc2
  conv(7, 2, 3);  // enc1
  int temporal_convs = 1;
  switch (cfg.fusion) {
    case Fusion::brclstm:
    case Fusion::bclstm:
      temporal_convs = 1 + cfg.lstm_layers * (cfg.temporal_radius + 1);
      break;
    case Fusion::early:
      temporal_convs = 2;
      break;
    case Fusion::slow:
      temporal_convs = 1 + 2 * cfg.temporal_radius;
      break;
  }
  for (int i = 0; i < temporal_convs; ++i) conv(3, 1, 1);
  return static_cast<int>(std::max(-lo, hi));
}

struct EnhanceOptions {
  int tile = 0;   // core tile size; 0 processes each frame in one window
  int halo = -1;  // overlap per side; -1 derives it from the receptive field
};

namespace detail {

inline int round_up16(int v) { return (v + 15) / 16 * 16; }

// Edge-replication pad to the 16-pixel grid.
inline LumaFrame pad_frame16(const LumaFrame& f) {
  const int pw = round_up16(f.width), ph = round_up16(f.height);
  if (pw == f.width && ph == f.height) return f;
  LumaFrame out;
  out.width = pw;
  out.height = ph;
  out.samples.resize(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, f.height - 1);
    for (int x = 0; x < pw; ++x) {
      out.at(y, x) = f.at(sy, std::min(x, f.width - 1));
    }
  }
  return out;
}

inline Tensor<float> window_tensor(const LumaFrame& f, int y0, int x0, int h, int w) {
  Tensor<float> t({1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      t.at(0, 0, y, x) = static_cast<float>(f.at(y0 + y, x0 + x)) / 255.0f;
    }
  }
  return t;
}

inline std::uint8_t to_sample(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace detail

// Enhances the luma clip. `guides` must hold one guided map per frame for a
// guidance-enabled model and may be null otherwise.
inline std::vector<LumaFrame> enhance_clip(const MganetConfig& cfg,
                                           const ParamTensors<float>& params,
                                           const std::vector<LumaFrame>& compressed,
                                           const std::vector<LumaFrame>* guides,
                                           EnhanceOptions opt = {}) {
  cfg.validate();
  if (compressed.empty()) throw ShapeError("enhance: empty clip");
  if (cfg.guidance) {
    if (guides == nullptr || guides->size() != compressed.size()) {
      throw ConfigError("enhance: guidance-enabled model requires one guided map per frame");
    }
  }
  const int W = compressed[0].width, H = compressed[0].height;
  for (const auto& f : compressed) {
    if (f.width != W || f.height != H) throw ShapeError("enhance: frames differ in size");
  }

  // Padded planes, shared across the sliding windows.
  std::vector<LumaFrame> padded;
  padded.reserve(compressed.size());
  for (const auto& f : compressed) padded.push_back(detail::pad_frame16(f));
  std::vector<LumaFrame> padded_guides;
  if (cfg.guidance) {
    for (std::size_t i = 0; i < guides->size(); ++i) {
      const auto& g = (*guides)[i];
      if (g.width != W || g.height != H) {
        throw ShapeError("enhance: guided map " + std::to_string(i) + " size mismatch");
      }
      padded_guides.push_back(detail::pad_frame16(g));
    }
  }
  const int PW = padded[0].width, PH = padded[0].height;

  const int radius = cfg.temporal_radius;
  const int halo = detail::round_up16(opt.halo >= 0 ? opt.halo : receptive_field_radius(cfg));
  const int core = opt.tile > 0 ? detail::round_up16(opt.tile) : 0;

  std::vector<LumaFrame> out;
  out.reserve(compressed.size());
  const int frame_count = static_cast<int>(compressed.size());
  for (int f = 0; f < frame_count; ++f) {
    LumaFrame result;
    result.width = W;
    result.height = H;
    result.samples.resize(static_cast<std::size_t>(W) * H);

    const std::vector<int> idx = window_indices(f, radius, frame_count);

    auto run_window = [&](int y0, int x0, int wh, int ww, int cy0, int cx0, int ch, int cw) {
      Tape<float> tape;
      ParamVars<float> vars = make_param_vars(tape, params, false);
      std::vector<Var<float>> window;
      window.reserve(idx.size());
      for (int t : idx) {
        window.push_back(tape.leaf(detail::window_tensor(padded[t], y0, x0, wh, ww)));
      }
      Var<float> guide = cfg.guidance
                             ? tape.leaf(detail::window_tensor(padded_guides[f], y0, x0, wh, ww))
                             : Var<float>{};
      const auto& final_value = mganet_forward(cfg, vars, window, guide).final.value();
      for (int y = 0; y < ch; ++y) {
        const int fy = cy0 + y;
        if (fy >= H) break;
        for (int x = 0; x < cw; ++x) {
          const int fx = cx0 + x;
          if (fx >= W) break;
          result.at(fy, fx) = detail::to_sample(final_value.at(0, 0, fy - y0, fx - x0));
        }
      }
    };

    if (core <= 0 || (core + 2 * halo >= PW && core + 2 * halo >= PH)) {
      run_window(0, 0, PH, PW, 0, 0, PH, PW);
    } else {
      for (int cy = 0; cy < PH; cy += core) {
        for (int cx = 0; cx < PW; cx += core) {
          const int y0 = std::max(0, cy - halo);
          const int x0 = std::max(0, cx - halo);
          const int y1 = std::min(PH, cy + core + halo);
          const int x1 = std::min(PW, cx + core + halo);
          run_window(y0, x0, y1 - y0, x1 - x0, cy, cx, std::min(core, PH - cy),
                     std::min(core, PW - cx));
        }
      }
    }
    out.push_back(std::move(result));
  }
  return out;
}

// Evaluates one checkpoint across QP-labeled test sets: enhances each set
// and tabulates its mean delta-PSNR.
inline RobustnessReport robustness_sweep(const MganetConfig& cfg,
                                         const ParamTensors<float>& params,
                                         const std::vector<FramePairSet>& sets,
                                         EnhanceOptions opt = {}) {
  RobustnessReport report;
  for (const auto& set : sets) {
    set.validate();
    std::vector<LumaFrame> guides;
    if (cfg.guidance) guides = guide_maps_for(set);
    const auto enhanced =
        enhance_clip(cfg, params, set.compressed, cfg.guidance ? &guides : nullptr, opt);
    const EvalReport eval = eval_sequence(set.raw, set.compressed, enhanced);
    report.rows.push_back(
        {set.qp, eval.mean_delta, eval.mean_psnr_compressed, eval.mean_psnr_enhanced});
  }
  return report;
}

}  // namespace vqe
