// vqe — compressed-video quality enhancement toolkit.
//
// Nine subcommands cover the pipeline end to end: block-transform codec
// simulation, noise-map analysis, guided-map generation, the deblocking
// mode oracle with its BD-rate harness, training, enhancement, evaluation,
// a cross-QP robustness sweep, and a finite-difference gradient check.
//
// Every failure prints a single machine-parsable line to stderr:
//   error: <category>: <message>
// with category ∈ {shape, format, io, config, diverged, usage, internal}
// and a nonzero exit code. Success exits 0.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vqe/bdrate.hpp"
#include "vqe/checkpoint.hpp"
#include "vqe/codec.hpp"
#include "vqe/config.hpp"
#include "vqe/deblock.hpp"
#include "vqe/enhance.hpp"
#include "vqe/errors.hpp"
#include "vqe/gradcheck.hpp"
#include "vqe/metrics.hpp"
#include "vqe/mganet.hpp"
#include "vqe/partition.hpp"
#include "vqe/pgm.hpp"
#include "vqe/sampling.hpp"
#include "vqe/train.hpp"
#include "vqe/yuv.hpp"

namespace {

using namespace vqe;

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

// noise_004.pgm, depth_012.pgm, ...
std::string frame_name(const std::string& prefix, int index, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d.", index);
  return prefix + buf + ext;
}

// [start, start+count) with count<=0 meaning "to the end".
template <typename T>
std::vector<T> slice_frames(const std::vector<T>& v, int start, int count, const char* what) {
  const int n = static_cast<int>(v.size());
  if (start < 0 || start >= n) {
    throw ConfigError(std::string(what) + ": start frame " + std::to_string(start) +
                      " outside clip of " + std::to_string(n) + " frames");
  }
  const int c = count > 0 ? count : n - start;
  if (start + c > n) {
    throw ConfigError(std::string(what) + ": frames " + std::to_string(start) + ".." +
                      std::to_string(start + c - 1) + " exceed clip of " + std::to_string(n) +
                      " frames");
  }
  return std::vector<T>(v.begin() + start, v.begin() + start + c);
}

double map_mean(const FloatMap& m) {
  if (m.values.empty()) return 0.0;
  return std::accumulate(m.values.begin(), m.values.end(), 0.0) /
         static_cast<double>(m.values.size());
}

double csv_field(const std::string& text, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": bad number '" + text + "'");
  }
}

// "rate_kbps,psnr_db" rows; header line and #-comments optional.
RdCurve read_rd_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("rd-curve: cannot open " + path);
  RdCurve curve;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t == "rate_kbps,psnr_db") continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto comma = t.find(',');
    if (comma == std::string::npos) throw FormatError(where + ": expected 'rate_kbps,psnr_db'");
    curve.push_back(RdPoint{csv_field(t.substr(0, comma), where),
                            csv_field(t.substr(comma + 1), where)});
  }
  if (curve.empty()) throw FormatError(path + ": no RD points");
  return curve;
}

TuSequence load_partitions(const std::string& path, int width, int height) {
  TuSequence seq = parse_tu_file(path);
  if (seq.width != width || seq.height != height) {
    throw ShapeError("tu sidecar " + path + " is " + std::to_string(seq.width) + "x" +
                     std::to_string(seq.height) + ", expected " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  return seq;
}

std::vector<LumaFrame> mean_map_guides(const std::vector<LumaFrame>& compressed,
                                       const std::vector<TuPartition>& parts) {
  if (compressed.size() != parts.size()) {
    throw ShapeError("tu sidecar has " + std::to_string(parts.size()) + " frames, clip has " +
                     std::to_string(compressed.size()));
  }
  std::vector<LumaFrame> guides;
  guides.reserve(compressed.size());
  for (std::size_t i = 0; i < compressed.size(); ++i) {
    guides.push_back(mean_map(compressed[i], parts[i]));
  }
  return guides;
}

// ---- simulate-compress ----

void setup_simulate_compress(CLI::App& app) {
  struct Opts {
    std::string input, output, tu_out;
    int width = 0, height = 0, qp = 37, block = 8;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "simulate-compress", "Block-DCT quantization of a YUV420p clip (chroma passed through)");
  cmd->add_option("--input", o->input, "raw YUV420p input")->required();
  cmd->add_option("--output", o->output, "compressed YUV420p output")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--qp", o->qp, "quantization parameter (step 2^((QP-4)/6))");
  cmd->add_option("--block", o->block, "transform block size (4, 8, 16, 32)");
  cmd->add_option("--tu-out", o->tu_out, "also write the uniform TU sidecar here");
  cmd->callback([o] {
    const Yuv420Clip clip = read_yuv420(o->input, o->width, o->height);
    const std::vector<LumaFrame> lumas = luma_clip(clip);
    const QuantMatrix q = QuantMatrix::flat(o->block, qstep_from_qp(o->qp));
    std::vector<LumaFrame> out;
    out.reserve(lumas.size());
    for (const LumaFrame& f : lumas) out.push_back(compress_frame(f, o->block, q));
    write_yuv420(o->output, with_luma(clip, out));
    if (!o->tu_out.empty()) {
      TuSequence seq;
      seq.width = o->width;
      seq.height = o->height;
      seq.frames.assign(out.size(), uniform_partition(o->width, o->height, o->block));
      write_tu_file(o->tu_out, seq);
    }
    std::cout << "simulate-compress: " << out.size() << " frames " << o->width << "x" << o->height
              << " qp=" << o->qp << " block=" << o->block << " qstep=" << qstep_from_qp(o->qp)
              << " -> " << o->output;
    if (!o->tu_out.empty()) std::cout << " (+ " << o->tu_out << ")";
    std::cout << "\n";
  });
}

// ---- analyze-noise ----

void setup_analyze_noise(CLI::App& app) {
  struct Opts {
    std::string decoded, original, out_dir = ".";
    int width = 0, height = 0, radius = 2;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "analyze-noise", "Windowed noise std-dev maps and temporal difference maps");
  cmd->add_option("--decoded", o->decoded, "decoded/compressed YUV420p clip")->required();
  cmd->add_option("--original", o->original, "pristine YUV420p clip")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--radius", o->radius, "window radius (2 means 5x5)");
  cmd->add_option("--out-dir", o->out_dir, "output directory");
  cmd->callback([o] {
    const std::vector<LumaFrame> dec = luma_clip(read_yuv420(o->decoded, o->width, o->height));
    const std::vector<LumaFrame> org = luma_clip(read_yuv420(o->original, o->width, o->height));
    if (dec.size() != org.size()) {
      throw ShapeError("decoded has " + std::to_string(dec.size()) + " frames, original " +
                       std::to_string(org.size()));
    }
    ensure_dir(o->out_dir);
    std::vector<FloatMap> maps;
    maps.reserve(dec.size());
    std::ofstream noise_csv = open_out(join(o->out_dir, "noise.csv"));
    noise_csv << "frame,mean_noise_std\n" << std::setprecision(12);
    for (std::size_t i = 0; i < dec.size(); ++i) {
      maps.push_back(noise_std_map(dec[i], org[i], o->radius));
      write_scaled_pgm(join(o->out_dir, frame_name("noise", static_cast<int>(i), "pgm")),
                       maps.back());
      noise_csv << i << ',' << map_mean(maps.back()) << '\n';
    }
    std::ofstream tdiff_csv = open_out(join(o->out_dir, "tdiff.csv"));
    tdiff_csv << "frame_a,frame_b,mean_abs_diff\n" << std::setprecision(12);
    for (std::size_t i = 0; i + 1 < maps.size(); ++i) {
      const FloatMap d = temporal_noise_diff(maps[i], maps[i + 1]);
      write_scaled_pgm(join(o->out_dir, frame_name("tdiff", static_cast<int>(i), "pgm")), d);
      tdiff_csv << i << ',' << i + 1 << ',' << map_mean(d) << '\n';
    }
    std::cout << "analyze-noise: " << dec.size() << " frames, radius " << o->radius << " -> "
              << o->out_dir << " (noise_*.pgm, tdiff_*.pgm, noise.csv, tdiff.csv)\n";
  });
}

// ---- gen-guided-map ----

void setup_gen_guided_map(CLI::App& app) {
  struct Opts {
    std::string input, tu, out_dir = ".";
    int width = 0, height = 0, frame = -1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "gen-guided-map", "Depth, boundary and mean maps from a TU-partition sidecar");
  cmd->add_option("--input", o->input, "decoded YUV420p clip")->required();
  cmd->add_option("--tu", o->tu, "TU-partition sidecar file")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--frame", o->frame, "single frame index (default: all)");
  cmd->add_option("--out-dir", o->out_dir, "output directory");
  cmd->callback([o] {
    const std::vector<LumaFrame> lumas = luma_clip(read_yuv420(o->input, o->width, o->height));
    const TuSequence seq = load_partitions(o->tu, o->width, o->height);
    if (seq.frames.size() != lumas.size()) {
      throw ShapeError("tu sidecar has " + std::to_string(seq.frames.size()) +
                       " frames, clip has " + std::to_string(lumas.size()));
    }
    int lo = 0, hi = static_cast<int>(lumas.size());
    if (o->frame >= 0) {
      if (o->frame >= hi) {
        throw ConfigError("frame " + std::to_string(o->frame) + " outside clip of " +
                          std::to_string(hi) + " frames");
      }
      lo = o->frame;
      hi = o->frame + 1;
    }
    ensure_dir(o->out_dir);
    for (int i = lo; i < hi; ++i) {
      const GuidedMapSet maps = guided_maps(lumas[i], seq.frames[i]);
      write_pgm(join(o->out_dir, frame_name("depth", i, "pgm")), maps.depth);
      write_pgm(join(o->out_dir, frame_name("boundary", i, "pgm")), maps.boundary);
      write_pgm(join(o->out_dir, frame_name("mean", i, "pgm")), maps.mean);
    }
    std::cout << "gen-guided-map: frames " << lo << ".." << hi - 1 << " -> " << o->out_dir
              << " (depth_*.pgm, boundary_*.pgm, mean_*.pgm)\n";
  });
}

// ---- deblock-oracle ----

void setup_deblock_oracle(CLI::App& app) {
  struct Opts {
    std::string decoded, original, modes_csv, summary_csv, filtered_out;
    std::string anchor_curve, test_curve, bd_out;
    int width = 0, height = 0, beta = 64;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "deblock-oracle",
      "Distortion-optimal per-segment filter modes; with --anchor-curve/--test-curve, a BD-rate "
      "report instead");
  cmd->add_option("--decoded", o->decoded, "decoded/compressed YUV420p clip");
  cmd->add_option("--original", o->original, "pristine YUV420p clip");
  cmd->add_option("--width", o->width, "frame width");
  cmd->add_option("--height", o->height, "frame height");
  cmd->add_option("--modes-csv", o->modes_csv, "write the per-segment mode map CSV here");
  cmd->add_option("--summary-csv", o->summary_csv, "write per-frame SSE/agreement CSV here");
  cmd->add_option("--filtered-out", o->filtered_out, "write the oracle-filtered YUV420p here");
  cmd->add_option("--beta", o->beta, "baseline rule activity threshold");
  cmd->add_option("--anchor-curve", o->anchor_curve, "anchor RD curve CSV (rate_kbps,psnr_db)");
  cmd->add_option("--test-curve", o->test_curve, "test RD curve CSV (rate_kbps,psnr_db)");
  cmd->add_option("--bd-out", o->bd_out, "write the BD-rate report CSV here");
  cmd->callback([o] {
    const bool bd_mode = !o->anchor_curve.empty() || !o->test_curve.empty();
    if (bd_mode) {
      if (o->anchor_curve.empty() || o->test_curve.empty()) {
        throw ConfigError("BD-rate mode needs both --anchor-curve and --test-curve");
      }
      const double bd = bd_rate(read_rd_csv(o->anchor_curve), read_rd_csv(o->test_curve));
      if (!o->bd_out.empty()) {
        std::ofstream os = open_out(o->bd_out);
        os << "anchor,test,bd_rate_percent\n"
           << std::setprecision(12) << o->anchor_curve << ',' << o->test_curve << ',' << bd
           << '\n';
      }
      std::cout << "bd-rate: " << std::showpos << std::fixed << std::setprecision(4) << bd
                << std::noshowpos << "% (test vs anchor)\n";
      return;
    }
    if (o->decoded.empty() || o->original.empty() || o->width <= 0 || o->height <= 0) {
      throw ConfigError(
          "oracle mode needs --decoded, --original, --width and --height (or use "
          "--anchor-curve/--test-curve for BD-rate)");
    }
    const std::vector<LumaFrame> dec = luma_clip(read_yuv420(o->decoded, o->width, o->height));
    const std::vector<LumaFrame> org = luma_clip(read_yuv420(o->original, o->width, o->height));
    if (dec.size() != org.size()) {
      throw ShapeError("decoded has " + std::to_string(dec.size()) + " frames, original " +
                       std::to_string(org.size()));
    }
    std::ofstream modes_csv;
    if (!o->modes_csv.empty()) {
      modes_csv = open_out(o->modes_csv);
      modes_csv << "frame,orientation,boundary,segment,mode\n";
    }
    std::ofstream summary_csv;
    if (!o->summary_csv.empty()) {
      summary_csv = open_out(o->summary_csv);
      summary_csv << "frame,oracle_sse,nofilter_sse,agreement_vs_baseline\n"
                  << std::setprecision(12);
    }
    std::vector<LumaFrame> filtered;
    long long oracle_sse = 0, nofilter_sse = 0;
    double agreement_sum = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      OracleResult r = oracle_decide(dec[i], org[i]);
      const double agree = agreement_stats(r.modes, baseline_decide(dec[i], o->beta));
      oracle_sse += r.total_sse;
      nofilter_sse += r.nofilter_sse;
      agreement_sum += agree;
      if (modes_csv.is_open()) {
        for (const SegmentDecision& d : r.modes) {
          modes_csv << i << ','
                    << (d.orientation == Orientation::vertical ? "vertical" : "horizontal") << ','
                    << d.boundary << ',' << d.segment << ',' << to_string(d.mode) << '\n';
        }
      }
      if (summary_csv.is_open()) {
        summary_csv << i << ',' << r.total_sse << ',' << r.nofilter_sse << ',' << agree << '\n';
      }
      filtered.push_back(std::move(r.filtered));
    }
    if (!o->filtered_out.empty()) {
      write_yuv420(o->filtered_out, with_luma(read_yuv420(o->decoded, o->width, o->height),
                                              filtered));
    }
    std::cout << "deblock-oracle: " << dec.size() << " frames, oracle SSE " << oracle_sse
              << " vs no-filter " << nofilter_sse << ", mean baseline agreement " << std::fixed
              << std::setprecision(4) << agreement_sum / static_cast<double>(dec.size()) << "\n";
  });
}

// ---- train ----

void setup_train(CLI::App& app) {
  struct Opts {
    std::string raw, decoded, tu, config, out_dir;
    int width = 0, height = 0, qp = 0;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand("train", "Train a model on a raw/compressed clip pair");
  cmd->add_option("--raw", o->raw, "pristine YUV420p clip")->required();
  cmd->add_option("--decoded", o->decoded, "compressed YUV420p clip")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--tu", o->tu, "TU-partition sidecar (needed when guidance is on)");
  cmd->add_option("--config", o->config, "key = value training config file");
  cmd->add_option("--out-dir", o->out_dir, "checkpoint and log directory")->required();
  CLI::Option* qp_opt = cmd->add_option("--qp", o->qp, "override the config's QP label");
  CLI::Option* seed_opt = cmd->add_option("--seed", o->seed, "override the config's seed");
  cmd->callback([o, qp_opt, seed_opt] {
    TrainConfig cfg = o->config.empty() ? TrainConfig{} : load_train_config(o->config);
    if (qp_opt->count() > 0) cfg.qp = o->qp;
    if (seed_opt->count() > 0) cfg.seed = o->seed;
    cfg.validate();
    FramePairSet data;
    data.raw = luma_clip(read_yuv420(o->raw, o->width, o->height));
    data.compressed = luma_clip(read_yuv420(o->decoded, o->width, o->height));
    data.qp = cfg.qp;
    if (!o->tu.empty()) data.partitions = load_partitions(o->tu, o->width, o->height);
    ensure_dir(o->out_dir);
    const TrainResult res = train(cfg, data, o->out_dir);
    save_checkpoint(join(o->out_dir, "model.ckpt"), res.model, res.params);
    std::ofstream loss_csv = open_out(join(o->out_dir, "loss.csv"));
    write_loss_csv(loss_csv, res.log);
    std::cout << "train: " << cfg.epochs << " epochs x " << cfg.steps_per_epoch
              << " steps, loss " << std::setprecision(6) << res.log.front().total << " -> "
              << res.log.back().total << ", model.ckpt + epoch checkpoints in " << o->out_dir
              << "\n";
  });
}

// ---- enhance ----

void setup_enhance(CLI::App& app) {
  struct Opts {
    std::string input, checkpoint, tu, output;
    int width = 0, height = 0, tile = 0, halo = -1, start_frame = 0, frames = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand("enhance", "Enhance a compressed clip with a checkpoint");
  cmd->add_option("--input", o->input, "compressed YUV420p clip")->required();
  cmd->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
  cmd->add_option("--output", o->output, "enhanced YUV420p output")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--tu", o->tu, "TU-partition sidecar (needed when guidance is on)");
  cmd->add_option("--tile", o->tile, "tile core size, multiple of 16 (0 = whole frame)");
  cmd->add_option("--halo", o->halo, "tile halo override (-1 = receptive-field radius)");
  cmd->add_option("--start-frame", o->start_frame, "first frame to enhance");
  cmd->add_option("--frames", o->frames, "frame count (0 = to the end)");
  cmd->callback([o] {
    const Checkpoint ck = load_checkpoint(o->checkpoint);
    const Yuv420Clip clip = slice_frames(read_yuv420(o->input, o->width, o->height),
                                         o->start_frame, o->frames, "enhance");
    const std::vector<LumaFrame> lumas = luma_clip(clip);
    std::vector<LumaFrame> guides;
    const std::vector<LumaFrame>* guide_ptr = nullptr;
    if (ck.config.guidance) {
      if (o->tu.empty()) {
        throw ConfigError("checkpoint uses guided maps; provide --tu");
      }
      const TuSequence seq = load_partitions(o->tu, o->width, o->height);
      guides = mean_map_guides(
          lumas, slice_frames(seq.frames, o->start_frame, o->frames, "enhance: tu sidecar"));
      guide_ptr = &guides;
    }
    EnhanceOptions opt;
    opt.tile = o->tile;
    opt.halo = o->halo;
    const std::vector<LumaFrame> enhanced =
        enhance_clip(ck.config, ck.params, lumas, guide_ptr, opt);
    write_yuv420(o->output, with_luma(clip, enhanced));
    std::cout << "enhance: " << enhanced.size() << " frames (start " << o->start_frame
              << "), radius " << receptive_field_radius(ck.config) << ", tile "
              << (o->tile > 0 ? std::to_string(o->tile) : std::string("off")) << " -> "
              << o->output << "\n";
  });
}

// ---- evaluate ----

void setup_evaluate(CLI::App& app) {
  struct Opts {
    std::string raw, compressed, enhanced, csv;
    int width = 0, height = 0, start_frame = 0, frames = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "evaluate", "Per-frame PSNR of compressed and enhanced clips against the raw clip");
  cmd->add_option("--raw", o->raw, "pristine YUV420p clip")->required();
  cmd->add_option("--compressed", o->compressed, "compressed YUV420p clip")->required();
  cmd->add_option("--enhanced", o->enhanced, "enhanced YUV420p clip")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--start-frame", o->start_frame, "first raw/compressed frame to score");
  cmd->add_option("--frames", o->frames, "frame count (0 = enhanced clip length)");
  cmd->add_option("--csv", o->csv, "write the per-frame report CSV here");
  cmd->callback([o] {
    const std::vector<LumaFrame> enh = luma_clip(read_yuv420(o->enhanced, o->width, o->height));
    const int count = o->frames > 0 ? o->frames : static_cast<int>(enh.size());
    if (count != static_cast<int>(enh.size())) {
      throw ShapeError("enhanced clip has " + std::to_string(enh.size()) +
                       " frames, expected " + std::to_string(count));
    }
    const std::vector<LumaFrame> raw =
        slice_frames(luma_clip(read_yuv420(o->raw, o->width, o->height)), o->start_frame, count,
                     "evaluate: raw");
    const std::vector<LumaFrame> cmp =
        slice_frames(luma_clip(read_yuv420(o->compressed, o->width, o->height)), o->start_frame,
                     count, "evaluate: compressed");
    const EvalReport report = eval_sequence(raw, cmp, enh);
    if (!o->csv.empty()) {
      std::ofstream os = open_out(o->csv);
      report.write_csv(os);
    }
    std::cout << "evaluate: " << count << " frames, mean PSNR " << std::fixed
              << std::setprecision(4) << report.mean_psnr_compressed << " -> "
              << report.mean_psnr_enhanced << " dB, delta " << std::showpos
              << report.mean_delta << std::noshowpos << " dB\n";
  });
}

// ---- robustness ----

void setup_robustness(CLI::App& app) {
  struct Opts {
    std::string checkpoint, raw, csv;
    std::vector<int> qps{35, 36, 37, 38, 39};
    int width = 0, height = 0, block = 8, tile = 0, halo = -1, start_frame = 0, frames = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "robustness", "Evaluate one checkpoint across clips simulated at several QPs");
  cmd->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
  cmd->add_option("--raw", o->raw, "held-out pristine YUV420p clip")->required();
  cmd->add_option("--width", o->width, "frame width")->required();
  cmd->add_option("--height", o->height, "frame height")->required();
  cmd->add_option("--qp", o->qps, "QPs to sweep (repeat or comma-separate)")->delimiter(',');
  cmd->add_option("--block", o->block, "simulation transform block size");
  cmd->add_option("--tile", o->tile, "tile core size (0 = whole frame)");
  cmd->add_option("--halo", o->halo, "tile halo override (-1 = receptive-field radius)");
  cmd->add_option("--start-frame", o->start_frame, "first frame of the test window");
  cmd->add_option("--frames", o->frames, "frame count (0 = to the end)");
  cmd->add_option("--csv", o->csv, "write the sweep report CSV here");
  cmd->callback([o] {
    const Checkpoint ck = load_checkpoint(o->checkpoint);
    const std::vector<LumaFrame> raw =
        slice_frames(luma_clip(read_yuv420(o->raw, o->width, o->height)), o->start_frame,
                     o->frames, "robustness");
    if (o->qps.empty()) throw ConfigError("robustness: at least one --qp required");
    TuSequence seq;
    seq.width = o->width;
    seq.height = o->height;
    seq.frames.assign(raw.size(), uniform_partition(o->width, o->height, o->block));
    std::vector<FramePairSet> sets;
    for (int qp : o->qps) {
      const QuantMatrix q = QuantMatrix::flat(o->block, qstep_from_qp(qp));
      FramePairSet set;
      set.raw = raw;
      for (const LumaFrame& f : raw) set.compressed.push_back(compress_frame(f, o->block, q));
      set.partitions = seq;
      set.qp = qp;
      sets.push_back(std::move(set));
    }
    EnhanceOptions opt;
    opt.tile = o->tile;
    opt.halo = o->halo;
    const RobustnessReport report = robustness_sweep(ck.config, ck.params, sets, opt);
    if (!o->csv.empty()) {
      std::ofstream os = open_out(o->csv);
      report.write_csv(os);
    }
    std::cout << "robustness: " << raw.size() << " frames per QP\n"
              << std::fixed << std::setprecision(4);
    for (const RobustnessRow& r : report.rows) {
      std::cout << "  qp " << r.qp << ": delta " << std::showpos << r.mean_delta << std::noshowpos
                << " dB (" << r.mean_psnr_compressed << " -> " << r.mean_psnr_enhanced << ")\n";
    }
  });
}

// ---- gradcheck ----

void setup_gradcheck(CLI::App& app) {
  struct Opts {
    int divisor = 16, size = 16, temporal_radius = 1, layers = 2, max_coords = 2;
    std::string fusion = "brclstm";
    bool no_guidance = false;
    double eps = 1e-5, tol = 1e-4;
    std::uint64_t seed = 99;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* cmd = app.add_subcommand(
      "gradcheck", "Finite-difference check of the full model gradient (double precision)");
  cmd->add_option("--divisor", o->divisor, "channel width divisor");
  cmd->add_option("--size", o->size, "square input size, multiple of 16");
  cmd->add_option("--temporal-radius", o->temporal_radius, "frames on each side of the center");
  cmd->add_option("--layers", o->layers, "recurrent layer count");
  cmd->add_option("--fusion", o->fusion, "brclstm | bclstm | early | slow");
  cmd->add_flag("--no-guidance", o->no_guidance, "drop the guided-map channel");
  cmd->add_option("--eps", o->eps, "central-difference step");
  cmd->add_option("--tol", o->tol, "max relative error to pass");
  cmd->add_option("--max-coords", o->max_coords, "coordinates probed per parameter (0 = all)");
  cmd->add_option("--seed", o->seed, "init and probe seed");
  cmd->callback([o] {
    MganetConfig mc;
    mc.width_divisor = o->divisor;
    mc.temporal_radius = o->temporal_radius;
    mc.lstm_layers = o->layers;
    mc.fusion = parse_fusion(o->fusion);
    mc.guidance = !o->no_guidance;
    mc.validate();
    if (o->size <= 0 || o->size % 16 != 0) {
      throw ConfigError("size must be a positive multiple of 16, got " +
                        std::to_string(o->size));
    }
    std::mt19937_64 rng(o->seed ^ 0xc2b2ae3d27d4eb4full);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_image = [&] {
      Tensor<double> t(TensorShape{1, 1, o->size, o->size});
      for (double& v : t.data) v = unit(rng);
      return t;
    };
    std::vector<Tensor<double>> window_t;
    for (int i = 0; i < mc.window_frames(); ++i) window_t.push_back(random_image());
    const Tensor<double> guide_t = random_image();
    const Tensor<double> gt_t = random_image();
    const ParamTensors<double> params = mganet_init<double>(mc, o->seed);
    auto build = [mc, window_t, guide_t, gt_t](Tape<double>& tape,
                                               std::map<std::string, Var<double>>& vars) {
      std::vector<Var<double>> window;
      for (const Tensor<double>& t : window_t) window.push_back(tape.leaf(t));
      const Var<double> guide = mc.guidance ? tape.leaf(guide_t) : Var<double>{};
      const MganetOutput<double> out = mganet_forward(mc, vars, window, guide);
      return multi_supervised_loss(out.final, out.intermediates, tape.leaf(gt_t)).total;
    };
    GradCheckOptions opt;
    opt.eps = o->eps;
    opt.max_coords_per_param = static_cast<std::size_t>(o->max_coords);
    opt.seed = o->seed;
    const GradCheckResult r = grad_check(params, build, opt);
    std::ostringstream line;
    line << r.coords_checked << " coordinates, max rel err " << std::setprecision(6)
         << r.max_rel_err << " at " << r.worst_param << "[" << r.worst_index << "] (analytic "
         << r.analytic << ", numeric " << r.numeric << "), tol " << o->tol;
    if (!r.ok(o->tol)) throw DivergedError("gradcheck failed: " + line.str());
    std::cout << "gradcheck: PASS — " << line.str() << "\n";
  });
}

int run(int argc, char** argv) {
  CLI::App app{"vqe — compressed-video quality enhancement toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vqe 0.1.0");
  setup_simulate_compress(app);
  setup_analyze_noise(app);
  setup_gen_guided_map(app);
  setup_deblock_oracle(app);
  setup_train(app);
  setup_enhance(app);
  setup_evaluate(app);
  setup_robustness(app);
  setup_gradcheck(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }
  return 0;
}

const char* category(const std::exception& e) {
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DivergedError*>(&e)) return "diverged";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << category(e) << ": " << msg << "\n";
    return 1;
  }
}
