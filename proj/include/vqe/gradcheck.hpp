#pragma once

// Finite-difference verification of reverse-mode gradients.
//
// The graph under test is expressed as a function from named parameter
// tensors to a scalar loss Var so it can be replayed on fresh tapes for
// each probe. All checking runs in double precision with central
// differences at eps = 1e-5.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vqe/tensor.hpp"

namespace vqe {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;

  bool ok(double tol = 1e-4) const { return max_rel_err < tol; }
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Cap on coordinates probed per parameter tensor; 0 means every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

using ParamMap = std::map<std::string, Tensor<double>>;
// Builds the loss on the given tape from parameter leaves supplied by value.
using LossFn = std::function<Var<double>(Tape<double>&, std::map<std::string, Var<double>>&)>;

// Compares d(loss)/d(param) from one backward pass against central
// differences, coordinate by coordinate. rel = |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(const ParamMap& params, const LossFn& build,
                                  const GradCheckOptions& opt = {}) {
  auto eval = [&](const ParamMap& p, bool with_grad,
                  std::map<std::string, Tensor<double>>* grads) -> double {
    Tape<double> tape;
    std::map<std::string, Var<double>> vars;
    for (const auto& [name, value] : p) vars[name] = tape.leaf(value, with_grad);
    Var<double> loss = build(tape, vars);
    const double out = loss.value().data[0];
    if (with_grad) {
      tape.backward(loss);
      for (auto& [name, v] : vars) (*grads)[name] = v.grad();
    }
    return out;
  };

  std::map<std::string, Tensor<double>> analytic;
  eval(params, true, &analytic);

  std::mt19937_64 rng(opt.seed);
  GradCheckResult res;
  ParamMap probe = params;
  for (const auto& [name, value] : params) {
    const std::size_t n = value.size();
    std::vector<std::size_t> coords;
    if (opt.max_coords_per_param == 0 || n <= opt.max_coords_per_param) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      coords.resize(opt.max_coords_per_param);
      for (auto& c : coords) c = pick(rng);
    }
    for (std::size_t i : coords) {
      const double orig = probe[name].data[i];
      probe[name].data[i] = orig + opt.eps;
      const double fp = eval(probe, false, nullptr);
      probe[name].data[i] = orig - opt.eps;
      const double fm = eval(probe, false, nullptr);
      probe[name].data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double a = analytic[name].data[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace vqe
