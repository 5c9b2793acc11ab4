#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/testutil.hpp"
#include "vqe/checkpoint.hpp"
#include "vqe/gradcheck.hpp"
#include "vqe/mganet.hpp"
#include "vqe/tensor.hpp"

using namespace vqe;

namespace {

MganetConfig tiny_config() {
  MganetConfig cfg;
  cfg.width_divisor = 16;
  cfg.temporal_radius = 1;
  cfg.lstm_layers = 2;
  return cfg;
}

template <typename S>
std::vector<Var<S>> leaf_window(Tape<S>& tape, const MganetConfig& cfg, int n, int h, int w,
                                std::mt19937_64& rng, double lo = 0.1, double hi = 0.9) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Var<S>> window;
  for (int t = 0; t < cfg.window_frames(); ++t) {
    Tensor<S> f({n, 1, h, w});
    for (auto& v : f.data) v = static_cast<S>(dist(rng));
    window.push_back(tape.leaf(std::move(f)));
  }
  return window;
}

}  // namespace

TEST(ParamSpecs, InventoryNamesUniqueAndComplete) {
  const auto specs = param_specs(tiny_config());
  std::set<std::string> names;
  for (const auto& s : specs) EXPECT_TRUE(names.insert(s.name).second) << s.name;

  for (const char* required :
       {"neti.w", "neti.b", "lstm0.f.u", "lstm0.f.v", "lstm0.f.bias", "lstm0.b.u", "lstm1.b.bias",
        "guide.w", "enc1.w", "enc8.b", "dec1.w", "dec4.b", "head1.w", "head3.b", "final.w",
        "final.b"}) {
    EXPECT_TRUE(names.count(required)) << "missing " << required;
  }
  // The encoder is shared between channels: exactly one weight set per layer.
  for (int k = 1; k <= 8; ++k) {
    int hits = 0;
    for (const auto& s : specs) {
      if (s.name.find("enc" + std::to_string(k)) == 0) ++hits;
    }
    EXPECT_EQ(hits, 2) << "enc layer " << k;  // .w and .b only
  }
}

TEST(ParamSpecs, ShapesFollowChannelPlan) {
  const MganetConfig cfg = tiny_config();  // divisor 16: F=4, enc 8/16/32/64, dec 32/16/8/4
  const auto specs = param_specs(cfg);
  auto shape_of = [&](const std::string& name) {
    for (const auto& s : specs) {
      if (s.name == name) return s.shape;
    }
    throw std::runtime_error("missing " + name);
  };
  EXPECT_EQ(shape_of("neti.w"), (TensorShape{4, 1, 3, 3}));
  EXPECT_EQ(shape_of("lstm0.f.u"), (TensorShape{8, 4, 3, 3}));   // 4 gates x hidden 2
  EXPECT_EQ(shape_of("lstm0.f.v"), (TensorShape{8, 2, 3, 3}));
  EXPECT_EQ(shape_of("enc1.w"), (TensorShape{8, 4, 7, 7}));
  EXPECT_EQ(shape_of("enc7.w"), (TensorShape{64, 32, 3, 3}));
  EXPECT_EQ(shape_of("dec1.w"), (TensorShape{64, 32, 4, 4}));
  EXPECT_EQ(shape_of("dec2.w"), (TensorShape{32 + 32, 16, 4, 4}));
  EXPECT_EQ(shape_of("dec3.w"), (TensorShape{16 + 16 + 1, 8, 4, 4}));
  EXPECT_EQ(shape_of("dec4.w"), (TensorShape{8 + 8 + 1, 4, 4, 4}));
  EXPECT_EQ(shape_of("head2.w"), (TensorShape{16, 1, 4, 4}));
  EXPECT_EQ(shape_of("final.w"), (TensorShape{1, 4 + 1, 3, 3}));
}

TEST(Init, DeterministicBoundedAndZeroHeads) {
  const MganetConfig cfg = tiny_config();
  const auto a = mganet_init<float>(cfg, 11);
  const auto b = mganet_init<float>(cfg, 11);
  const auto c = mganet_init<float>(cfg, 12);
  ASSERT_EQ(a.size(), b.size());
  bool any_diff_seed = false;
  for (const auto& [name, t] : a) {
    const auto& tb = b.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.data[i], tb.data[i]) << name;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.data[i] != c.at(name).data[i]) any_diff_seed = true;
    }
  }
  EXPECT_TRUE(any_diff_seed);

  const auto specs = param_specs(cfg);
  for (const auto& spec : specs) {
    const auto& t = a.at(spec.name);
    const double bound = std::sqrt(1.0 / spec.fan_in) + 1e-12;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (spec.zero_init) {
        EXPECT_EQ(t.data[i], 0.0f) << spec.name;
      } else {
        EXPECT_LE(std::abs(static_cast<double>(t.data[i])), bound) << spec.name;
      }
    }
  }
}

TEST(CellStep, GateHandValues) {
  // Zero U and V, bias pinned per gate stack slot: F, I, O, C-tilde.
  Tape<double> tape;
  const int hch = 1;
  Var<double> z = tape.leaf(Tensor<double>({1, 2, 4, 4}));
  Var<double> c_prev = tape.leaf(Tensor<double>::full({1, hch, 4, 4}, 1.0));
  Var<double> h_prev = tape.leaf(Tensor<double>({1, hch, 4, 4}));
  Var<double> u = tape.leaf(Tensor<double>({4 * hch, 2, 3, 3}));
  Var<double> v = tape.leaf(Tensor<double>({4 * hch, hch, 3, 3}));
  Tensor<double> bias({1, 4 * hch, 1, 1});
  bias.data = {1.0, -1.0, 0.5, 0.25};
  Var<double> bv = tape.leaf(bias);

  auto step = brclstm_cell_step(z, c_prev, h_prev, u, v, bv);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double f = sig(1.0), i = sig(-1.0), o = sig(0.5), g = std::tanh(0.25);
  const double c = f * 1.0 + i * g;
  const double h = o * std::tanh(c);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      EXPECT_NEAR(step.f.value().at(0, 0, y, x), f, 1e-12);
      EXPECT_NEAR(step.i.value().at(0, 0, y, x), i, 1e-12);
      EXPECT_NEAR(step.o.value().at(0, 0, y, x), o, 1e-12);
      EXPECT_NEAR(step.g.value().at(0, 0, y, x), g, 1e-12);
      EXPECT_NEAR(step.c.value().at(0, 0, y, x), c, 1e-12);
      EXPECT_NEAR(step.h.value().at(0, 0, y, x), h, 1e-12);
    }
  }
}

TEST(CellStep, GateRangesAlwaysHold) {
  // Weight and input magnitudes are kept small enough that no sigmoid or
  // tanh saturates to an exact 1.0 in double precision, so the open-interval
  // gate ranges are checkable strictly.
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 10; ++iter) {
    Tape<double> tape;
    const int hch = 3;
    auto rt = [&](TensorShape s, double m) {
      return tape.leaf(vqe::testing::random_tensor<double>(s, rng, -m, m));
    };
    auto step = brclstm_cell_step(rt({2, 6, 5, 5}, 0.5), rt({2, hch, 5, 5}, 0.5),
                                  rt({2, hch, 5, 5}, 0.5), rt({4 * hch, 6, 3, 3}, 0.1),
                                  rt({4 * hch, hch, 3, 3}, 0.1), rt({1, 4 * hch, 1, 1}, 0.1));
    for (const auto& gate : {step.f, step.i, step.o}) {
      for (double x : gate.value().data) {
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
      }
    }
    for (double x : step.g.value().data) EXPECT_LT(std::abs(x), 1.0);
    for (double x : step.h.value().data) EXPECT_LT(std::abs(x), 1.0);
  }
}

TEST(Layer, ReversalSymmetryWithSwappedDirections) {
  std::mt19937_64 rng(47);
  Tape<double> tape;
  const int F = 4, hch = 2, n = 5;
  auto rt = [&](TensorShape s) { return tape.leaf(vqe::testing::random_tensor<double>(s, rng, -1, 1)); };
  Var<double> uf = rt({4 * hch, F, 3, 3}), vf = rt({4 * hch, hch, 3, 3}), bf = rt({1, 4 * hch, 1, 1});
  Var<double> ub = rt({4 * hch, F, 3, 3}), vb = rt({4 * hch, hch, 3, 3}), bb = rt({1, 4 * hch, 1, 1});
  std::vector<Var<double>> seq, rev;
  for (int t = 0; t < n; ++t) seq.push_back(rt({1, F, 6, 6}));
  for (int t = n - 1; t >= 0; --t) rev.push_back(seq[t]);

  auto out = brclstm_layer(seq, uf, vf, bf, ub, vb, bb, false);
  auto out_rev = brclstm_layer(rev, ub, vb, bb, uf, vf, bf, false);
  // Reversing the sequence and swapping direction weights swaps the two
  // hidden halves, bit for bit.
  for (int t = 0; t < n; ++t) {
    const auto& a = out[t].value();
    const auto& b = out_rev[n - 1 - t].value();
    for (int ch = 0; ch < hch; ++ch) {
      for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
          EXPECT_EQ(a.at(0, ch, y, x), b.at(0, ch + hch, y, x));
          EXPECT_EQ(a.at(0, ch + hch, y, x), b.at(0, ch, y, x));
        }
      }
    }
  }
}

TEST(Layer, ResidualAddsInputExactly) {
  std::mt19937_64 rng(53);
  Tape<double> tape;
  const int F = 4, hch = 2, n = 3;
  auto rt = [&](TensorShape s) { return tape.leaf(vqe::testing::random_tensor<double>(s, rng, -1, 1)); };
  Var<double> uf = rt({4 * hch, F, 3, 3}), vf = rt({4 * hch, hch, 3, 3}), bf = rt({1, 4 * hch, 1, 1});
  Var<double> ub = rt({4 * hch, F, 3, 3}), vb = rt({4 * hch, hch, 3, 3}), bb = rt({1, 4 * hch, 1, 1});
  std::vector<Var<double>> seq;
  for (int t = 0; t < n; ++t) seq.push_back(rt({1, F, 4, 4}));

  auto plain = brclstm_layer(seq, uf, vf, bf, ub, vb, bb, false);
  auto res = brclstm_layer(seq, uf, vf, bf, ub, vb, bb, true);
  for (int t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < plain[t].value().size(); ++i) {
      EXPECT_EQ(res[t].value().data[i], plain[t].value().data[i] + seq[t].value().data[i]);
    }
  }
}

TEST(TemporalEncoder, AllFusionModesProduceSameShape) {
  std::mt19937_64 rng(61);
  for (Fusion fusion : {Fusion::brclstm, Fusion::bclstm, Fusion::early, Fusion::slow}) {
    for (int radius : {0, 1, 2}) {
      MganetConfig cfg = tiny_config();
      cfg.fusion = fusion;
      cfg.temporal_radius = radius;
      Tape<float> tape;
      auto params = make_param_vars(tape, mganet_init<float>(cfg, 5), false);
      auto window = leaf_window(tape, cfg, 2, 16, 16, rng);
      Var<float> out = temporal_encoder(cfg, params, window);
      EXPECT_EQ(out.shape(), (TensorShape{2, cfg.feat_ch(), 16, 16}))
          << to_string(fusion) << " radius " << radius;
    }
  }
}

TEST(TemporalEncoder, ResidualVariantDiffersFromPlainBidirectional) {
  std::mt19937_64 rng(67);
  MganetConfig cfg = tiny_config();
  Tape<float> tape;
  auto init = mganet_init<float>(cfg, 5);
  auto params = make_param_vars(tape, init, false);
  auto window = leaf_window(tape, cfg, 1, 16, 16, rng);

  cfg.fusion = Fusion::brclstm;
  Var<float> with_res = temporal_encoder(cfg, params, window);
  cfg.fusion = Fusion::bclstm;
  Var<float> without = temporal_encoder(cfg, params, window);
  EXPECT_GT(vqe::testing::max_abs_diff(with_res.value(), without.value()), 1e-4);
}

TEST(TemporalEncoder, WindowLengthValidated) {
  MganetConfig cfg = tiny_config();
  Tape<float> tape;
  auto params = make_param_vars(tape, mganet_init<float>(cfg, 5), false);
  std::vector<Var<float>> window = {tape.leaf(Tensor<float>({1, 1, 16, 16}))};
  EXPECT_THROW(temporal_encoder(cfg, params, window), ShapeError);
}

TEST(Encoder, PyramidShapesAndGuidedCaptures) {
  MganetConfig cfg;
  cfg.width_divisor = 4;  // channels 16 feat, enc 32/64/128/256
  Tape<float> tape;
  auto params = make_param_vars(tape, mganet_init<float>(cfg, 3), false);
  Var<float> feats = tape.leaf(Tensor<float>::full({1, cfg.feat_ch(), 96, 96}, 0.1f));
  Var<float> guide = tape.leaf(Tensor<float>::full({1, 1, 96, 96}, 0.5f));

  auto pyr = shared_guided_encoder(cfg, params, feats, guide);
  ASSERT_EQ(pyr.guided.size(), 5u);
  EXPECT_EQ(pyr.guided[0].shape(), (TensorShape{1, 16, 96, 96}));   // G1
  EXPECT_EQ(pyr.guided[1].shape(), (TensorShape{1, 32, 48, 48}));   // G2
  EXPECT_EQ(pyr.guided[2].shape(), (TensorShape{1, 64, 24, 24}));   // G3
  EXPECT_EQ(pyr.guided[3].shape(), (TensorShape{1, 128, 12, 12}));  // G4
  EXPECT_EQ(pyr.guided[4].shape(), (TensorShape{1, 256, 6, 6}));    // G5
  EXPECT_EQ(pyr.main_half.shape(), (TensorShape{1, 32, 48, 48}));
  EXPECT_EQ(pyr.main_quarter.shape(), (TensorShape{1, 64, 24, 24}));
  EXPECT_EQ(pyr.main_eighth.shape(), (TensorShape{1, 128, 12, 12}));
  EXPECT_EQ(pyr.bottom.shape(), (TensorShape{1, 256, 6, 6}));
}

TEST(Decoder, StageAndPredictionShapes) {
  MganetConfig cfg;
  cfg.width_divisor = 4;
  Tape<float> tape;
  auto params = make_param_vars(tape, mganet_init<float>(cfg, 3), false);
  std::mt19937_64 rng(71);
  auto window = leaf_window(tape, cfg, 1, 96, 96, rng);
  Var<float> guide = tape.leaf(Tensor<float>::full({1, 1, 96, 96}, 0.25f));

  auto out = mganet_forward(cfg, params, window, guide);
  ASSERT_EQ(out.intermediates.size(), 3u);
  EXPECT_EQ(out.intermediates[0].shape(), (TensorShape{1, 1, 24, 24}));
  EXPECT_EQ(out.intermediates[1].shape(), (TensorShape{1, 1, 48, 48}));
  EXPECT_EQ(out.intermediates[2].shape(), (TensorShape{1, 1, 96, 96}));
  EXPECT_EQ(out.final.shape(), (TensorShape{1, 1, 96, 96}));
  EXPECT_EQ(out.residual.shape(), (TensorShape{1, 1, 96, 96}));
}

TEST(Forward, IdentityAtInitBitExact) {
  // Prediction heads start at zero, so the network is the identity map on
  // the compressed center frame, bit for bit, under random hidden weights.
  for (Fusion fusion : {Fusion::brclstm, Fusion::early}) {
    MganetConfig cfg = tiny_config();
    cfg.fusion = fusion;
    Tape<float> tape;
    auto params = make_param_vars(tape, mganet_init<float>(cfg, 1234), false);
    std::mt19937_64 rng(81);
    auto window = leaf_window(tape, cfg, 2, 32, 32, rng);
    Var<float> guide = tape.leaf(vqe::testing::random_tensor<double>({2, 1, 32, 32}, rng, 0.0, 1.0)
                                     .cast<float>());

    auto out = mganet_forward(cfg, params, window, guide);
    const auto& center = window[window.size() / 2].value();
    for (std::size_t i = 0; i < center.size(); ++i) {
      ASSERT_EQ(out.final.value().data[i], center.data[i]);
    }
    for (const auto& inter : out.intermediates) {
      for (float v : inter.value().data) ASSERT_EQ(v, 0.0f);
    }
  }
}

TEST(Forward, ZeroParamsStillIdentity) {
  MganetConfig cfg = tiny_config();
  Tape<float> tape;
  ParamTensors<float> zero;
  for (const auto& spec : param_specs(cfg)) zero.emplace(spec.name, Tensor<float>(spec.shape));
  auto params = make_param_vars(tape, zero, false);
  std::mt19937_64 rng(83);
  auto window = leaf_window(tape, cfg, 1, 16, 16, rng);
  Var<float> guide = tape.leaf(Tensor<float>::full({1, 1, 16, 16}, 0.7f));
  auto out = mganet_forward(cfg, params, window, guide);
  const auto& center = window[1].value();
  for (std::size_t i = 0; i < center.size(); ++i) {
    ASSERT_EQ(out.final.value().data[i], center.data[i]);
  }
}

TEST(Forward, GuidanceOffSkipsGuideParamsAndMap) {
  MganetConfig cfg = tiny_config();
  cfg.guidance = false;
  for (const auto& spec : param_specs(cfg)) {
    EXPECT_EQ(spec.name.find("guide"), std::string::npos);
  }
  Tape<float> tape;
  auto params = make_param_vars(tape, mganet_init<float>(cfg, 9), false);
  std::mt19937_64 rng(91);
  auto window = leaf_window(tape, cfg, 1, 16, 16, rng);
  auto out = mganet_forward(cfg, params, window, Var<float>{});
  EXPECT_EQ(out.final.shape(), (TensorShape{1, 1, 16, 16}));
}

TEST(Forward, GuidanceChangesOutput) {
  // With nonzero head weights the guide map influences the prediction.
  MganetConfig cfg = tiny_config();
  auto init = mganet_init<float>(cfg, 77);
  // Give the final head nonzero weights so guidance differences surface.
  std::mt19937_64 wrng(5);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (auto& v : init.at("final.w").data) v = static_cast<float>(dist(wrng));

  Tape<float> tape;
  auto params = make_param_vars(tape, init, false);
  std::mt19937_64 rng(99);
  auto window = leaf_window(tape, cfg, 1, 16, 16, rng);
  Var<float> g0 = tape.leaf(Tensor<float>::full({1, 1, 16, 16}, 0.0f));
  Var<float> g1 = tape.leaf(Tensor<float>::full({1, 1, 16, 16}, 1.0f));
  auto a = mganet_forward(cfg, params, window, g0);
  auto b = mganet_forward(cfg, params, window, g1);
  EXPECT_GT(vqe::testing::max_abs_diff(a.final.value(), b.final.value()), 1e-6);
}

TEST(Forward, RejectsBadSpatialSizeAndMissingGuide) {
  MganetConfig cfg = tiny_config();
  Tape<float> tape;
  auto params = make_param_vars(tape, mganet_init<float>(cfg, 9), false);
  std::mt19937_64 rng(101);
  auto window = leaf_window(tape, cfg, 1, 24, 24, rng);  // 24 not divisible by 16
  Var<float> guide = tape.leaf(Tensor<float>({1, 1, 24, 24}));
  EXPECT_THROW(mganet_forward(cfg, params, window, guide), ShapeError);

  auto window16 = leaf_window(tape, cfg, 1, 16, 16, rng);
  EXPECT_THROW(mganet_forward(cfg, params, window16, Var<float>{}), ShapeError);
}

TEST(Loss, DecompositionMatchesWeightedSum) {
  std::mt19937_64 rng(103);
  Tape<double> tape;
  Var<double> gt = tape.leaf(vqe::testing::random_tensor<double>({1, 1, 32, 32}, rng, 0.0, 1.0));
  Var<double> fin = tape.leaf(vqe::testing::random_tensor<double>({1, 1, 32, 32}, rng, 0.0, 1.0));
  std::vector<Var<double>> inter = {
      tape.leaf(vqe::testing::random_tensor<double>({1, 1, 8, 8}, rng, 0.0, 1.0)),
      tape.leaf(vqe::testing::random_tensor<double>({1, 1, 16, 16}, rng, 0.0, 1.0)),
      tape.leaf(vqe::testing::random_tensor<double>({1, 1, 32, 32}, rng, 0.0, 1.0)),
  };
  auto breakdown = multi_supervised_loss(fin, inter, gt);
  ASSERT_EQ(breakdown.h_terms.size(), 3u);
  ASSERT_EQ(breakdown.lambdas.size(), 3u);
  EXPECT_DOUBLE_EQ(breakdown.lambdas[0], 0.5);
  EXPECT_DOUBLE_EQ(breakdown.lambdas[1], 0.25);
  EXPECT_DOUBLE_EQ(breakdown.lambdas[2], 0.125);
  const double expect = breakdown.final_term.value().data[0] +
                        0.5 * breakdown.h_terms[0].value().data[0] +
                        0.25 * breakdown.h_terms[1].value().data[0] +
                        0.125 * breakdown.h_terms[2].value().data[0];
  EXPECT_NEAR(breakdown.total.value().data[0], expect, 1e-6);
}

TEST(Loss, UniformOffsetHandValue) {
  Tape<double> tape;
  Var<double> gt = tape.leaf(Tensor<double>::full({1, 1, 32, 32}, 0.5));
  Var<double> fin = tape.leaf(Tensor<double>::full({1, 1, 32, 32}, 0.6));
  std::vector<Var<double>> inter = {
      tape.leaf(Tensor<double>::full({1, 1, 8, 8}, 0.3)),
      tape.leaf(Tensor<double>::full({1, 1, 16, 16}, 0.5)),
      tape.leaf(Tensor<double>::full({1, 1, 32, 32}, 0.6)),
  };
  auto breakdown = multi_supervised_loss(fin, inter, gt);
  // 0.1^2 + 0.5*0.2^2 + 0.25*0 + 0.125*0.1^2
  EXPECT_NEAR(breakdown.total.value().data[0], 0.01 + 0.02 + 0.00125, 1e-12);
}

TEST(Loss, RejectsNonDivisibleIntermediateScale) {
  Tape<double> tape;
  Var<double> gt = tape.leaf(Tensor<double>({1, 1, 32, 32}));
  Var<double> fin = tape.leaf(Tensor<double>({1, 1, 32, 32}));
  std::vector<Var<double>> inter = {tape.leaf(Tensor<double>({1, 1, 12, 12}))};
  EXPECT_THROW(multi_supervised_loss(fin, inter, gt), ShapeError);
}

TEST(GradCheck, FullTinyModelEndToEnd) {
  MganetConfig cfg = tiny_config();  // width/16, T=1, L=2
  ParamMap params = mganet_init<double>(cfg, 2024);

  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> dist(0.2, 0.8);
  std::vector<Tensor<double>> frames;
  for (int t = 0; t < cfg.window_frames(); ++t) {
    Tensor<double> f({1, 1, 16, 16});
    for (auto& v : f.data) v = dist(rng);
    frames.push_back(std::move(f));
  }
  Tensor<double> guide({1, 1, 16, 16});
  for (auto& v : guide.data) v = dist(rng);
  Tensor<double> gt = frames[1];

  LossFn build = [&](Tape<double>& tape, std::map<std::string, Var<double>>& vars) {
    std::vector<Var<double>> window;
    for (const auto& f : frames) window.push_back(tape.leaf(f));
    Var<double> g = tape.leaf(guide);
    auto out = mganet_forward(cfg, vars, window, g);
    auto loss = multi_supervised_loss(out.final, out.intermediates, tape.leaf(gt));
    return loss.total;
  };

  GradCheckOptions opt;
  opt.max_coords_per_param = 2;
  opt.seed = 99;
  const auto res = grad_check(params, build, opt);
  EXPECT_TRUE(res.ok(1e-4)) << "worst " << res.worst_param << "[" << res.worst_index
                            << "] analytic " << res.analytic << " numeric " << res.numeric
                            << " rel " << res.max_rel_err;
  EXPECT_GT(res.coords_checked, 50u);
}

TEST(Checkpoint, RoundTripBitExact) {
  MganetConfig cfg = tiny_config();
  cfg.fusion = Fusion::slow;
  cfg.temporal_radius = 2;
  const auto params = mganet_init<float>(cfg, 31337);
  const std::string path = ::testing::TempDir() + "brc.ckpt";
  save_checkpoint(path, cfg, params);

  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config.width_divisor, cfg.width_divisor);
  EXPECT_EQ(loaded.config.temporal_radius, cfg.temporal_radius);
  EXPECT_EQ(loaded.config.lstm_layers, cfg.lstm_layers);
  EXPECT_EQ(loaded.config.fusion, cfg.fusion);
  EXPECT_EQ(loaded.config.guidance, cfg.guidance);
  ASSERT_EQ(loaded.params.size(), params.size());
  for (const auto& [name, t] : params) {
    const auto& lt = loaded.params.at(name);
    ASSERT_EQ(lt.shape, t.shape) << name;
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(lt.data[i]), std::bit_cast<std::uint32_t>(t.data[i]))
          << name << "[" << i << "]";
    }
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsBadMagicTruncationAndMissingRecords) {
  const MganetConfig cfg = tiny_config();
  const auto params = mganet_init<float>(cfg, 1);
  const std::string path = ::testing::TempDir() + "bad.ckpt";
  save_checkpoint(path, cfg, params);

  // Corrupt the magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  EXPECT_THROW(load_checkpoint(path), FormatError);

  // Truncate: rewrite then chop the tail off.
  save_checkpoint(path, cfg, params);
  {
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  EXPECT_THROW(load_checkpoint(path), FormatError);

  // Drop a record: count no longer matches the config's inventory.
  auto partial = params;
  partial.erase("final.w");
  save_checkpoint(path, cfg, partial);
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
}

TEST(Checkpoint, MissingFileThrowsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), IoError);
}
