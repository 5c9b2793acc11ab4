#pragma once

// Adam with bias correction (Kingma & Ba), one moment pair per named
// parameter tensor.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vqe/errors.hpp"
#include "vqe/tensor.hpp"

namespace vqe {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  // Applies one update to every (name -> param) entry using the matching
  // gradient. Rejects non-finite gradients by name so a diverged run fails
  // loudly instead of silently corrupting the parameters.
  void step(std::map<std::string, Tensor<S>>& params,
            const std::map<std::string, Tensor<S>>& grads) {
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), static_cast<double>(t_)));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), static_cast<double>(t_)));
    for (auto& [name, p] : params) {
      auto git = grads.find(name);
      if (git == grads.end()) throw ConfigError("adam: missing gradient for parameter " + name);
      const Tensor<S>& g = git->second;
      if (!(g.shape == p.shape)) {
        throw ShapeError("adam: gradient shape " + g.shape.str() + " does not match parameter " +
                         name + " " + p.shape.str());
      }
      State& st = state_[name];
      if (st.m.empty()) {
        st.m = Tensor<S>::zeros(p.shape);
        st.v = Tensor<S>::zeros(p.shape);
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        const S gi = g.data[i];
        if (!std::isfinite(static_cast<double>(gi))) {
          throw DivergedError("adam: non-finite gradient in parameter " + name);
        }
        st.m.data[i] = b1 * st.m.data[i] + (S(1) - b1) * gi;
        st.v.data[i] = b2 * st.v.data[i] + (S(1) - b2) * gi * gi;
        const S mhat = st.m.data[i] / bc1;
        const S vhat = st.v.data[i] / bc2;
        p.data[i] -= static_cast<S>(cfg_.lr) * mhat /
                     (std::sqrt(vhat) + static_cast<S>(cfg_.eps));
      }
    }
  }

 private:
  struct State {
    Tensor<S> m;
    Tensor<S> v;
  };
  AdamConfig cfg_;
  std::map<std::string, State> state_;
  std::int64_t t_ = 0;
};

}  // namespace vqe
