#pragma once

// Quality metrics and evaluation reports: PSNR over luma frames, per-frame
// delta-PSNR curves (enhanced minus compressed), and the CSV report used by
// the evaluate and robustness commands.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "vqe/codec.hpp"
#include "vqe/errors.hpp"

namespace vqe {

inline constexpr double kPsnrCap = 99.0;  // reported for zero MSE

inline double frame_mse(const LumaFrame& a, const LumaFrame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("psnr: dimension mismatch " + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

inline double psnr(const LumaFrame& a, const LumaFrame& b, double peak = 255.0) {
  const double m = frame_mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / m));
}

struct EvalReport {
  std::vector<double> psnr_compressed;  // vs raw, per frame
  std::vector<double> psnr_enhanced;    // vs raw, per frame
  std::vector<double> delta;            // enhanced - compressed, per frame
  double mean_psnr_compressed = 0.0;
  double mean_psnr_enhanced = 0.0;
  double mean_delta = 0.0;

  void write_csv(std::ostream& os) const {
    os << "frame,psnr_compressed,psnr_enhanced,delta_psnr\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      os << i << ',' << psnr_compressed[i] << ',' << psnr_enhanced[i] << ',' << delta[i] << '\n';
    }
  }
};

inline EvalReport eval_sequence(const std::vector<LumaFrame>& raw,
                                const std::vector<LumaFrame>& compressed,
                                const std::vector<LumaFrame>& enhanced) {
  if (raw.size() != compressed.size() || raw.size() != enhanced.size() || raw.empty()) {
    throw ShapeError("eval: sequences must be non-empty and equally long, got " +
                     std::to_string(raw.size()) + "/" + std::to_string(compressed.size()) + "/" +
                     std::to_string(enhanced.size()));
  }
  EvalReport rep;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    rep.psnr_compressed.push_back(psnr(raw[i], compressed[i]));
    rep.psnr_enhanced.push_back(psnr(raw[i], enhanced[i]));
    rep.delta.push_back(rep.psnr_enhanced.back() - rep.psnr_compressed.back());
  }
  for (std::size_t i = 0; i < rep.delta.size(); ++i) {
    rep.mean_psnr_compressed += rep.psnr_compressed[i];
    rep.mean_psnr_enhanced += rep.psnr_enhanced[i];
    rep.mean_delta += rep.delta[i];
  }
  const double n = static_cast<double>(rep.delta.size());
  rep.mean_psnr_compressed /= n;
  rep.mean_psnr_enhanced /= n;
  rep.mean_delta /= n;
  return rep;
}

struct RobustnessRow {
  int qp = 0;
  double mean_delta = 0.0;
  double mean_psnr_compressed = 0.0;
  double mean_psnr_enhanced = 0.0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;

  void write_csv(std::ostream& os) const {
    os << "qp,mean_delta_psnr,mean_psnr_compressed,mean_psnr_enhanced\n";
    os << std::setprecision(12);
    for (const auto& r : rows) {
      os << r.qp << ',' << r.mean_delta << ',' << r.mean_psnr_compressed << ','
         << r.mean_psnr_enhanced << '\n';
    }
  }
};

}  // namespace vqe
