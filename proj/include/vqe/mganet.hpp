#pragma once

// The guided enhancement model: per-frame feature convolution plus stacked
// bidirectional residual ConvLSTM layers over the temporal window, a
// two-channel encoder sharing one set of weights between the guided-map
// channel and the main channel, and a decoder with skip connections and a
// ladder of intermediate predictions. Parameters live in a flat
// name -> tensor map so the optimizer, checkpointing, and gradient checks
// all see one canonical inventory.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vqe/errors.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

enum class Fusion : std::uint8_t { brclstm = 0, bclstm = 1, early = 2, slow = 3 };

inline const char* to_string(Fusion f) {
  switch (f) {
    case Fusion::brclstm: return "brclstm";
    case Fusion::bclstm: return "bclstm";
    case Fusion::early: return "early";
    case Fusion::slow: return "slow";
  }
  return "?";
}

inline Fusion parse_fusion(const std::string& s) {
  if (s == "brclstm") return Fusion::brclstm;
  if (s == "bclstm") return Fusion::bclstm;
  if (s == "early") return Fusion::early;
  if (s == "slow") return Fusion::slow;
  throw ConfigError("unknown fusion mode: " + s);
}

struct MganetConfig {
  int width_divisor = 1;   // 1 = full width (Table-2 channel counts)
  int temporal_radius = 1;  // T: window covers 2T+1 frames
  int lstm_layers = 2;     // L
  Fusion fusion = Fusion::brclstm;
  bool guidance = true;

  int window_frames() const { return 2 * temporal_radius + 1; }
  int feat_ch() const { return 64 / width_divisor; }
  int enc_ch(int stage) const { return (128 << (stage - 1)) / width_divisor; }  // 1..4
  int dec_ch(int stage) const { return (1024 >> stage) / width_divisor; }       // 1..4

  void validate() const {
    const bool div_ok = width_divisor == 1 || width_divisor == 2 || width_divisor == 4 ||
                        width_divisor == 8 || width_divisor == 16 || width_divisor == 32;
    if (!div_ok) throw ConfigError("width_divisor must be one of 1,2,4,8,16,32");
    if (temporal_radius < 0) throw ConfigError("temporal_radius must be >= 0");
    if (lstm_layers < 1) throw ConfigError("lstm_layers must be >= 1");
  }
};

template <typename S>
using ParamTensors = std::map<std::string, Tensor<S>>;
template <typename S>
using ParamVars = std::map<std::string, Var<S>>;

struct ParamSpec {
  std::string name;
  TensorShape shape;
  int fan_in = 1;
  bool zero_init = false;
};

// Canonical parameter inventory for a config; creation order is the
// initialization order, so a (config, seed) pair fully determines the
// starting weights.
inline std::vector<ParamSpec> param_specs(const MganetConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  const int F = cfg.feat_ch();
  auto conv = [&](const std::string& name, int co, int ci, int k, bool zero = false) {
    specs.push_back({name + ".w", {co, ci, k, k}, ci * k * k, zero});
    specs.push_back({name + ".b", {1, co, 1, 1}, ci * k * k, true});
  };
  // transposed conv: weights (Cin, Cout, k, k), fan-in from the op input
  auto deconv = [&](const std::string& name, int ci_in, int co_out, int k, bool zero = false) {
    specs.push_back({name + ".w", {ci_in, co_out, k, k}, ci_in * k * k, zero});
    specs.push_back({name + ".b", {1, co_out, 1, 1}, ci_in * k * k, true});
  };

  switch (cfg.fusion) {
    case Fusion::brclstm:
    case Fusion::bclstm: {
      conv("neti", F, 1, 3);
      const int h = F / 2;
      for (int l = 0; l < cfg.lstm_layers; ++l) {
        for (const char* dir : {"f", "b"}) {
          const std::string base = "lstm" + std::to_string(l) + "." + dir;
          specs.push_back({base + ".u", {4 * h, F, 3, 3}, F * 9, false});
          specs.push_back({base + ".v", {4 * h, h, 3, 3}, h * 9, false});
          specs.push_back({base + ".bias", {1, 4 * h, 1, 1}, F * 9, true});
        }
      }
      break;
    }
    case Fusion::early:
      conv("early1", F, cfg.window_frames(), 3);
      conv("early2", F, F, 3);
      break;
    case Fusion::slow:
      conv("neti", F, 1, 3);
      conv("slowmerge", F, 2 * F, 3);
      break;
  }

  if (cfg.guidance) conv("guide", F, 1, 3);

  conv("enc1", cfg.enc_ch(1), F, 7);
  conv("enc2", cfg.enc_ch(1), cfg.enc_ch(1), 3);
  conv("enc3", cfg.enc_ch(2), cfg.enc_ch(1), 3);
  conv("enc4", cfg.enc_ch(2), cfg.enc_ch(2), 3);
  conv("enc5", cfg.enc_ch(3), cfg.enc_ch(2), 3);
  conv("enc6", cfg.enc_ch(3), cfg.enc_ch(3), 3);
  conv("enc7", cfg.enc_ch(4), cfg.enc_ch(3), 3);
  conv("enc8", cfg.enc_ch(4), cfg.enc_ch(4), 3);

  const int d1 = cfg.dec_ch(1), d2 = cfg.dec_ch(2), d3 = cfg.dec_ch(3), d4 = cfg.dec_ch(4);
  const int e1 = cfg.enc_ch(1), e2 = cfg.enc_ch(2), e3 = cfg.enc_ch(3), e4 = cfg.enc_ch(4);
  deconv("dec1", e4, d1, 4);
  deconv("head1", d1, 1, 4, true);
  deconv("dec2", d1 + e3, d2, 4);
  deconv("head2", d2, 1, 4, true);
  deconv("dec3", d2 + e2 + 1, d3, 4);
  deconv("head3", d3, 1, 4, true);
  deconv("dec4", d3 + e1 + 1, d4, 4);
  conv("final", 1, d4 + 1, 3, true);
  return specs;
}

template <typename S>
ParamTensors<S> mganet_init(const MganetConfig& cfg, std::uint64_t seed) {
  ParamTensors<S> params;
  std::mt19937_64 rng(seed);
  for (const ParamSpec& spec : param_specs(cfg)) {
    Tensor<S> t(spec.shape);
    if (!spec.zero_init) {
      const double bound = std::sqrt(1.0 / spec.fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.data) v = static_cast<S>(dist(rng));
    }
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

template <typename S>
ParamVars<S> make_param_vars(Tape<S>& tape, const ParamTensors<S>& params, bool requires_grad) {
  ParamVars<S> vars;
  for (const auto& [name, value] : params) vars[name] = tape.leaf(value, requires_grad);
  return vars;
}

namespace detail {

template <typename S>
Var<S> pvar(const ParamVars<S>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError("missing parameter: " + name);
  return it->second;
}

}  // namespace detail

// ---- temporal encoder ----

template <typename S>
struct LstmStepOut {
  Var<S> h, c;           // ĥ_t and C_t
  Var<S> f, i, o, g;     // gate activations (g = C̃)
};

// One ConvLSTM cell step: gates from conv(z) + conv(h_prev) + bias, cell
// C_t = F⊙C_prev + I⊙C̃, hidden ĥ_t = O⊙tanh(C_t). Gate stacking order in
// the 4h-channel conv output: F, I, O, C̃.
template <typename S>
LstmStepOut<S> brclstm_cell_step(Var<S> z, Var<S> c_prev, Var<S> h_prev, Var<S> u, Var<S> v,
                                 Var<S> bias) {
  const int hch = u.shape().n / 4;
  if (c_prev.shape().c != hch || h_prev.shape().c != hch) {
    throw ShapeError("brclstm_cell_step: state channels do not match gate weights");
  }
  Var<S> pre = add(conv2d(z, u, bias, 1, 1), conv2d(h_prev, v, 1, 1));
  LstmStepOut<S> out;
  out.f = sigmoid(slice_channels(pre, 0, hch));
  out.i = sigmoid(slice_channels(pre, hch, 2 * hch));
  out.o = sigmoid(slice_channels(pre, 2 * hch, 3 * hch));
  out.g = tanh(slice_channels(pre, 3 * hch, 4 * hch));
  out.c = add(mul(out.f, c_prev), mul(out.i, out.g));
  out.h = mul(out.o, tanh(out.c));
  return out;
}

// Bidirectional (residual) ConvLSTM layer over a sequence: forward and
// backward passes with zero initial state; per step the two hidden states
// are channel-concatenated and, when `residual`, added to the input.
template <typename S>
std::vector<Var<S>> brclstm_layer(const std::vector<Var<S>>& seq, Var<S> uf, Var<S> vf,
                                  Var<S> bf, Var<S> ub, Var<S> vb, Var<S> bb, bool residual) {
  if (seq.empty()) throw ShapeError("brclstm_layer: empty sequence");
  Tape<S>& tape = *seq[0].tape;
  const TensorShape zs = seq[0].shape();
  const int hch = uf.shape().n / 4;
  const TensorShape state_shape{zs.n, hch, zs.h, zs.w};
  const std::size_t n = seq.size();

  std::vector<Var<S>> fwd(n), bwd(n);
  Var<S> c = tape.leaf(Tensor<S>(state_shape));
  Var<S> h = tape.leaf(Tensor<S>(state_shape));
  for (std::size_t t = 0; t < n; ++t) {
    auto step = brclstm_cell_step(seq[t], c, h, uf, vf, bf);
    c = step.c;
    h = step.h;
    fwd[t] = step.h;
  }
  c = tape.leaf(Tensor<S>(state_shape));
  h = tape.leaf(Tensor<S>(state_shape));
  for (std::size_t t = n; t-- > 0;) {
    auto step = brclstm_cell_step(seq[t], c, h, ub, vb, bb);
    c = step.c;
    h = step.h;
    bwd[t] = step.h;
  }
  std::vector<Var<S>> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    Var<S> cat = concat_channels(fwd[t], bwd[t]);
    out[t] = residual ? add(cat, seq[t]) : cat;
  }
  return out;
}

// Fuses the 2T+1 window frames into center-frame features of feat_ch()
// channels at full resolution.
template <typename S>
Var<S> temporal_encoder(const MganetConfig& cfg, const ParamVars<S>& p,
                        const std::vector<Var<S>>& window) {
  if (window.size() % 2 == 0) throw ShapeError("temporal_encoder: window length must be odd");
  if (static_cast<int>(window.size()) != cfg.window_frames()) {
    throw ShapeError("temporal_encoder: window length does not match config");
  }
  using detail::pvar;
  const std::size_t center = window.size() / 2;
  switch (cfg.fusion) {
    case Fusion::brclstm:
    case Fusion::bclstm: {
      std::vector<Var<S>> seq(window.size());
      for (std::size_t t = 0; t < window.size(); ++t) {
        seq[t] = relu(conv2d(window[t], pvar(p, "neti.w"), pvar(p, "neti.b"), 1, 1));
      }
      const bool residual = cfg.fusion == Fusion::brclstm;
      for (int l = 0; l < cfg.lstm_layers; ++l) {
        const std::string base = "lstm" + std::to_string(l) + ".";
        seq = brclstm_layer(seq, pvar(p, base + "f.u"), pvar(p, base + "f.v"),
                            pvar(p, base + "f.bias"), pvar(p, base + "b.u"),
                            pvar(p, base + "b.v"), pvar(p, base + "b.bias"), residual);
      }
      return seq[center];
    }
    case Fusion::early: {
      Var<S> cat = window[0];
      for (std::size_t t = 1; t < window.size(); ++t) cat = concat_channels(cat, window[t]);
      Var<S> x = relu(conv2d(cat, pvar(p, "early1.w"), pvar(p, "early1.b"), 1, 1));
      return relu(conv2d(x, pvar(p, "early2.w"), pvar(p, "early2.b"), 1, 1));
    }
    case Fusion::slow: {
      std::vector<Var<S>> level(window.size());
      for (std::size_t t = 0; t < window.size(); ++t) {
        level[t] = relu(conv2d(window[t], pvar(p, "neti.w"), pvar(p, "neti.b"), 1, 1));
      }
      while (level.size() > 1) {
        std::vector<Var<S>> next(level.size() - 1);
        for (std::size_t i = 0; i + 1 < level.size(); ++i) {
          next[i] = relu(conv2d(concat_channels(level[i], level[i + 1]),
                                pvar(p, "slowmerge.w"), pvar(p, "slowmerge.b"), 1, 1));
        }
        level = std::move(next);
      }
      return level[0];
    }
  }
  throw ConfigError("temporal_encoder: unknown fusion mode");
}

// ---- guided encoder-decoder ----

template <typename S>
struct FeaturePyramid {
  std::vector<Var<S>> guided;  // G1..G5 (empty when guidance is off)
  Var<S> main_half;            // after layer 2, 1/2 resolution
  Var<S> main_quarter;         // after layer 4, 1/4
  Var<S> main_eighth;          // after layer 6, 1/8
  Var<S> bottom;               // after layer 8, 1/16
};

// Runs the shared 8-layer encoder over the guided channel (from the
// projected guide map) and the main channel (features + G1), adding each
// guided scale into the main activations after the strided layers.
template <typename S>
FeaturePyramid<S> shared_guided_encoder(const MganetConfig& cfg, const ParamVars<S>& p,
                                        Var<S> main_in, Var<S> guide_map) {
  using detail::pvar;
  const TensorShape ms = main_in.shape();
  FeaturePyramid<S> pyr;

  auto enc_layer = [&](Var<S> x, int k) {
    const int kernel = k == 1 ? 7 : 3;
    const int stride = (k % 2 == 1) ? 2 : 1;
    const std::string base = "enc" + std::to_string(k);
    return relu(conv2d(x, pvar(p, base + ".w"), pvar(p, base + ".b"), stride, kernel / 2));
  };

  if (cfg.guidance) {
    if (!guide_map.valid()) throw ShapeError("shared_guided_encoder: guidance map missing");
    const TensorShape gs = guide_map.shape();
    if (gs.c != 1 || gs.h != ms.h || gs.w != ms.w || gs.n != ms.n) {
      throw ShapeError("shared_guided_encoder: guide map shape " + gs.str() +
                       " does not match input " + ms.str());
    }
    Var<S> g1 = conv2d(guide_map, pvar(p, "guide.w"), pvar(p, "guide.b"), 1, 1);
    pyr.guided.push_back(g1);
    Var<S> g = g1;
    for (int k = 1; k <= 8; ++k) {
      g = enc_layer(g, k);
      if (k % 2 == 1) pyr.guided.push_back(g);  // G2..G5 after strided layers
    }
  }

  Var<S> y = cfg.guidance ? add(main_in, pyr.guided[0]) : main_in;
  int gi = 1;
  for (int k = 1; k <= 8; ++k) {
    y = enc_layer(y, k);
    if (k % 2 == 1 && cfg.guidance) y = add(y, pyr.guided[gi++]);
    if (k == 2) pyr.main_half = y;
    if (k == 4) pyr.main_quarter = y;
    if (k == 6) pyr.main_eighth = y;
    if (k == 8) pyr.bottom = y;
  }
  return pyr;
}

template <typename S>
struct MganetOutput {
  Var<S> final;                     // residual + compressed center frame
  Var<S> residual;                  // raw final-head output
  std::vector<Var<S>> intermediates;  // P1 (coarsest) .. P3 (full res)
};

// Decoder: four stride-2 deconv stages with skip concats; intermediate
// prediction heads after stages 1-3 emit single-channel images at the next
// scale, each concatenated into the following stage; the stride-1 final
// head produces the residual added to the compressed center frame.
template <typename S>
MganetOutput<S> guided_decoder(const MganetConfig& cfg, const ParamVars<S>& p,
                               const FeaturePyramid<S>& pyr, Var<S> center_frame) {
  using detail::pvar;
  auto dec_stage = [&](Var<S> x, int k) {
    const std::string base = "dec" + std::to_string(k);
    return relu(conv2d_transpose(x, pvar(p, base + ".w"), pvar(p, base + ".b"), 2, 1));
  };
  auto head = [&](Var<S> x, int k) {
    const std::string base = "head" + std::to_string(k);
    return conv2d_transpose(x, pvar(p, base + ".w"), pvar(p, base + ".b"), 2, 1);
  };

  Var<S> out1 = dec_stage(pyr.bottom, 1);                                   // 1/8
  Var<S> p1 = head(out1, 1);                                                // 1/4
  Var<S> out2 = dec_stage(concat_channels(out1, pyr.main_eighth), 2);       // 1/4
  Var<S> p2 = head(out2, 2);                                                // 1/2
  Var<S> out3 = dec_stage(
      concat_channels(concat_channels(out2, pyr.main_quarter), p1), 3);     // 1/2
  Var<S> p3 = head(out3, 3);                                                // full
  Var<S> out4 = dec_stage(
      concat_channels(concat_channels(out3, pyr.main_half), p2), 4);        // full

  MganetOutput<S> out;
  out.residual = conv2d(concat_channels(out4, p3), pvar(p, "final.w"), pvar(p, "final.b"), 1, 1);
  out.final = add(out.residual, center_frame);
  out.intermediates = {p1, p2, p3};
  return out;
}

// Full forward pass. Window frames and the guide map are (N,1,H,W) tensors
// in [0,1]; H and W must be multiples of 16 (four stride-2 halvings).
template <typename S>
MganetOutput<S> mganet_forward(const MganetConfig& cfg, const ParamVars<S>& p,
                               const std::vector<Var<S>>& window, Var<S> guide_map) {
  cfg.validate();
  if (window.empty()) throw ShapeError("mganet_forward: empty window");
  const TensorShape fs = window[0].shape();
  if (fs.c != 1) throw ShapeError("mganet_forward: frames must be single-channel");
  if (fs.h % 16 != 0 || fs.w % 16 != 0) {
    throw ShapeError("mganet_forward: spatial size must be a multiple of 16, got " + fs.str());
  }
  for (const Var<S>& f : window) {
    if (!(f.shape() == fs)) throw ShapeError("mganet_forward: window frames differ in shape");
  }
  Var<S> feats = temporal_encoder(cfg, p, window);
  FeaturePyramid<S> pyr = shared_guided_encoder(cfg, p, feats, guide_map);
  return guided_decoder(cfg, p, pyr, window[window.size() / 2]);
}

// ---- multi-supervised loss ----

template <typename S>
struct LossBreakdown {
  Var<S> total;
  Var<S> final_term;            // L_0^F
  std::vector<Var<S>> h_terms;  // H_i, coarsest first
  std::vector<double> lambdas;  // 2^-i
};

template <typename S>
LossBreakdown<S> multi_supervised_loss(Var<S> final, const std::vector<Var<S>>& intermediates,
                                       Var<S> ground_truth) {
  const TensorShape gs = ground_truth.shape();
  if (!(final.shape() == gs)) {
    throw ShapeError("multi_supervised_loss: final prediction shape " + final.shape().str() +
                     " vs ground truth " + gs.str());
  }
  LossBreakdown<S> out;
  out.final_term = mse(final, ground_truth);
  out.total = out.final_term;
  for (std::size_t i = 0; i < intermediates.size(); ++i) {
    const TensorShape ps = intermediates[i].shape();
    if (ps.h <= 0 || gs.h % ps.h != 0 || gs.w % ps.w != 0 || gs.h / ps.h != gs.w / ps.w) {
      throw ShapeError("multi_supervised_loss: intermediate " + std::to_string(i + 1) +
                       " shape " + ps.str() + " does not upsample to " + gs.str());
    }
    const int factor = gs.h / ps.h;
    Var<S> up = upsample_bilinear(intermediates[i], factor);
    Var<S> h = mse(up, ground_truth);
    const double lambda = std::pow(2.0, -static_cast<double>(i + 1));
    out.h_terms.push_back(h);
    out.lambdas.push_back(lambda);
    out.total = add(out.total, scale(h, static_cast<S>(lambda)));
  }
  return out;
}

}  // namespace vqe
