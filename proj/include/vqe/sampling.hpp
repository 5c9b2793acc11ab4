#pragma once

// Training data assembly: aligned raw/compressed frame pairs with optional
// TU partitions, per-frame guided maps, and deterministic patch sampling
// with clamped temporal windows.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"
#include "vqe/partition.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

struct FramePairSet {
  std::vector<LumaFrame> raw;
  std::vector<LumaFrame> compressed;
  std::optional<TuSequence> partitions;
  int qp = 0;

  int frames() const { return static_cast<int>(raw.size()); }
  int width() const { return raw.empty() ? 0 : raw[0].width; }
  int height() const { return raw.empty() ? 0 : raw[0].height; }

  void validate() const {
    if (raw.empty()) throw ShapeError("pair set: no frames");
    if (raw.size() != compressed.size()) {
      throw ShapeError("pair set: raw has " + std::to_string(raw.size()) + " frames, compressed " +
                       std::to_string(compressed.size()));
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].width != width() || raw[i].height != height() ||
          compressed[i].width != width() || compressed[i].height != height()) {
        throw ShapeError("pair set: frame " + std::to_string(i) + " dimensions differ");
      }
    }
    if (partitions) {
      if (partitions->width != width() || partitions->height != height()) {
        throw ShapeError("pair set: partition dimensions differ from frames");
      }
      if (partitions->frames.size() != raw.size()) {
        throw ShapeError("pair set: partition frame count " +
                         std::to_string(partitions->frames.size()) + " vs " +
                         std::to_string(raw.size()));
      }
      for (std::size_t i = 0; i < partitions->frames.size(); ++i) {
        const auto rep = validate_partition(partitions->frames[i], width(), height());
        if (!rep.ok) {
          throw FormatError("pair set: frame " + std::to_string(i) + ": " + rep.message);
        }
      }
    }
  }
};

// Per-frame guided maps (the TU mean map) for a guidance-enabled model.
inline std::vector<LumaFrame> guide_maps_for(const FramePairSet& set) {
  if (!set.partitions) {
    throw ConfigError("guidance-enabled model requires TU partitions for guided maps");
  }
  std::vector<LumaFrame> maps;
  maps.reserve(set.compressed.size());
  for (std::size_t i = 0; i < set.compressed.size(); ++i) {
    maps.push_back(mean_map(set.compressed[i], set.partitions->frames[i]));
  }
  return maps;
}

struct SampleSpec {
  int frame = 0;
  int y = 0;
  int x = 0;
};

struct PatchSample {
  SampleSpec spec;
  std::vector<Tensor<float>> window;  // 2T+1 compressed patches, (1,1,p,p), /255
  Tensor<float> guide;                // guided-map patch of center frame
  Tensor<float> target;               // raw patch of center frame
};

namespace detail {

inline Tensor<float> patch_tensor(const LumaFrame& frame, int y, int x, int p) {
  Tensor<float> t({1, 1, p, p});
  for (int yy = 0; yy < p; ++yy) {
    for (int xx = 0; xx < p; ++xx) {
      t.at(0, 0, yy, xx) = static_cast<float>(frame.at(y + yy, x + xx)) / 255.0f;
    }
  }
  return t;
}

}  // namespace detail

inline std::vector<SampleSpec> draw_sample_specs(const FramePairSet& set, int patch, int count,
                                                 std::mt19937_64& rng) {
  if (patch > set.width() || patch > set.height()) {
    throw ShapeError("sampling: patch " + std::to_string(patch) + " exceeds frame " +
                     std::to_string(set.width()) + "x" + std::to_string(set.height()));
  }
  std::uniform_int_distribution<int> pf(0, set.frames() - 1);
  std::uniform_int_distribution<int> py(0, set.height() - patch);
  std::uniform_int_distribution<int> px(0, set.width() - patch);
  std::vector<SampleSpec> specs(count);
  for (auto& s : specs) s = SampleSpec{pf(rng), py(rng), px(rng)};
  return specs;
}

// Temporal window indices around `frame`, clamped to the clip by repeating
// the terminal frames.
inline std::vector<int> window_indices(int frame, int radius, int frame_count) {
  std::vector<int> idx;
  for (int dt = -radius; dt <= radius; ++dt) {
    int t = frame + dt;
    if (t < 0) t = 0;
    if (t >= frame_count) t = frame_count - 1;
    idx.push_back(t);
  }
  return idx;
}

inline PatchSample gather_sample(const FramePairSet& set, const std::vector<LumaFrame>& guides,
                                 SampleSpec spec, int radius, int patch) {
  PatchSample s;
  s.spec = spec;
  for (int t : window_indices(spec.frame, radius, set.frames())) {
    s.window.push_back(detail::patch_tensor(set.compressed[t], spec.y, spec.x, patch));
  }
  s.guide = guides.empty() ? Tensor<float>({1, 1, patch, patch})
                           : detail::patch_tensor(guides[spec.frame], spec.y, spec.x, patch);
  s.target = detail::patch_tensor(set.raw[spec.frame], spec.y, spec.x, patch);
  return s;
}

// Deterministic sample set: (2T+1 compressed patches, center guided patch,
// raw target patch), all co-located.
inline std::vector<PatchSample> sample_patches(const FramePairSet& set,
                                               const std::vector<LumaFrame>& guides, int radius,
                                               int patch, int count, std::uint64_t seed) {
  set.validate();
  if (set.frames() < 2 * radius + 1) {
    throw ShapeError("sampling: clip of " + std::to_string(set.frames()) +
                     " frames is shorter than the temporal window " +
                     std::to_string(2 * radius + 1));
  }
  if (!guides.empty() && guides.size() != set.raw.size()) {
    throw ShapeError("sampling: guide map count does not match frames");
  }
  std::mt19937_64 rng(seed);
  std::vector<PatchSample> out;
  out.reserve(count);
  for (const SampleSpec& spec : draw_sample_specs(set, patch, count, rng)) {
    out.push_back(gather_sample(set, guides, spec, radius, patch));
  }
  return out;
}

struct PatchBatch {
  std::vector<Tensor<float>> window;  // 2T+1 tensors of (B,1,p,p)
  Tensor<float> guide;                // (B,1,p,p)
  Tensor<float> target;               // (B,1,p,p)
};

inline PatchBatch batch_samples(const std::vector<PatchSample>& samples,
                                const std::vector<int>& indices) {
  if (indices.empty()) throw ShapeError("batch: empty index list");
  const int b = static_cast<int>(indices.size());
  const TensorShape ps = samples.at(indices[0]).target.shape;
  const int p = ps.h;
  const std::size_t frames = samples[indices[0]].window.size();
  PatchBatch batch;
  batch.window.assign(frames, Tensor<float>({b, 1, p, p}));
  batch.guide = Tensor<float>({b, 1, p, p});
  batch.target = Tensor<float>({b, 1, p, p});
  const std::size_t plane = static_cast<std::size_t>(p) * p;
  for (int i = 0; i < b; ++i) {
    const PatchSample& s = samples.at(indices[i]);
    if (s.window.size() != frames || !(s.target.shape == ps)) {
      throw ShapeError("batch: samples disagree in shape");
    }
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy(s.window[t].data.begin(), s.window[t].data.end(),
                batch.window[t].data.begin() + i * plane);
    }
    std::copy(s.guide.data.begin(), s.guide.data.end(), batch.guide.data.begin() + i * plane);
    std::copy(s.target.data.begin(), s.target.data.end(), batch.target.data.begin() + i * plane);
  }
  return batch;
}

}  // namespace vqe
