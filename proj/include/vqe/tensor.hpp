#pragma once

// Dense N,C,H,W tensors plus a reverse-mode differentiation tape.
//
// Values are immutable once emitted onto a tape; every operation is a pure
// function from input nodes to a new node. A Tape lives for one forward
// pass, runs backward() at most once, and is then discarded. The scalar
// type is a template parameter: float for training/inference, double for
// the finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vqe/errors.hpp"

namespace vqe {

struct TensorShape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const TensorShape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

template <typename S>
struct Tensor {
  TensorShape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(TensorShape s) : shape(s), data(s.size(), S(0)) {}
  Tensor(TensorShape s, S fill) : shape(s), data(s.size(), fill) {}

  static Tensor zeros(TensorShape s) { return Tensor(s); }
  static Tensor full(TensorShape s, S v) { return Tensor(s, v); }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  S& at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  S at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

namespace detail {

inline int floor_div(int a, int b) {
  int q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

inline int ceil_div(int a, int b) {
  return -floor_div(-a, b);
}

// y[n,co,oy,ox] (+)= bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * x[n,ci,oy*s+ky-p,ox*s+kx-p]
// Also serves as the input-gradient kernel of conv2d_transpose.
template <typename S>
void conv_gather(const S* x, int N, int Ci, int H, int W,
                 const S* w, int Co, int k,
                 const S* bias, int stride, int pad,
                 S* y, int OH, int OW, bool accumulate) {
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      S* yplane = y + (static_cast<std::size_t>(n) * Co + co) * OH * OW;
      if (!accumulate) {
        const S b = bias ? bias[co] : S(0);
        std::fill(yplane, yplane + static_cast<std::size_t>(OH) * OW, b);
      } else if (bias) {
        const S b = bias[co];
        for (std::size_t i = 0; i < static_cast<std::size_t>(OH) * OW; ++i) yplane[i] += b;
      }
      for (int ci = 0; ci < Ci; ++ci) {
        const S* xplane = x + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        const S* wplane = w + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        for (int oy = 0; oy < OH; ++oy) {
          S* yrow = yplane + static_cast<std::size_t>(oy) * OW;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H) continue;
            const S* xrow = xplane + static_cast<std::size_t>(iy) * W;
            for (int kx = 0; kx < k; ++kx) {
              const S wv = wplane[ky * k + kx];
              const int off = kx - pad;
              const int lo = std::max(0, ceil_div(-off, stride));
              const int hi = std::min(OW - 1, floor_div(W - 1 - off, stride));
              if (stride == 1) {
                const S* xs = xrow + off;
                for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xs[ox];
              } else {
                for (int ox = lo; ox <= hi; ++ox) yrow[ox] += wv * xrow[ox * stride + off];
              }
            }
          }
        }
      }
    }
  }
}

// out[n,ci,oy*s+ky-p,ox*s+kx-p] (+)= w[co,ci,ky,kx] * in[n,co,oy,ox]
// Forward pass of conv2d_transpose and input-gradient kernel of conv2d.
template <typename S>
void conv_scatter(const S* in, int N, int Co, int IH, int IW,
                  const S* w, int Ci, int k,
                  const S* bias, int stride, int pad,
                  S* out, int OH, int OW, bool accumulate) {
  for (int n = 0; n < N; ++n) {
    if (!accumulate) {
      for (int ci = 0; ci < Ci; ++ci) {
        S* oplane = out + (static_cast<std::size_t>(n) * Ci + ci) * OH * OW;
        const S b = bias ? bias[ci] : S(0);
        std::fill(oplane, oplane + static_cast<std::size_t>(OH) * OW, b);
      }
    }
    for (int co = 0; co < Co; ++co) {
      const S* iplane = in + (static_cast<std::size_t>(n) * Co + co) * IH * IW;
      for (int ci = 0; ci < Ci; ++ci) {
        S* oplane = out + (static_cast<std::size_t>(n) * Ci + ci) * OH * OW;
        const S* wplane = w + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        for (int oy = 0; oy < IH; ++oy) {
          const S* irow = iplane + static_cast<std::size_t>(oy) * IW;
          for (int ky = 0; ky < k; ++ky) {
            const int ty = oy * stride + ky - pad;
            if (ty < 0 || ty >= OH) continue;
            S* orow = oplane + static_cast<std::size_t>(ty) * OW;
            for (int kx = 0; kx < k; ++kx) {
              const S wv = wplane[ky * k + kx];
              const int off = kx - pad;
              const int lo = std::max(0, ceil_div(-off, stride));
              const int hi = std::min(IW - 1, floor_div(OW - 1 - off, stride));
              if (stride == 1) {
                S* os = orow + off;
                for (int ox = lo; ox <= hi; ++ox) os[ox] += wv * irow[ox];
              } else {
                for (int ox = lo; ox <= hi; ++ox) orow[ox * stride + off] += wv * irow[ox];
              }
            }
          }
        }
      }
    }
  }
}

// dw[co,ci,ky,kx] += sum_{n,oy,ox} go[n,co,oy,ox] * xin[n,ci,oy*s+ky-p,ox*s+kx-p]
template <typename S>
void conv_wgrad(const S* go, int N, int Co, int OH, int OW,
                const S* xin, int Ci, int H, int W,
                int k, int stride, int pad, S* dw) {
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      const S* gplane = go + (static_cast<std::size_t>(n) * Co + co) * OH * OW;
      for (int ci = 0; ci < Ci; ++ci) {
        const S* xplane = xin + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        S* wplane = dw + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int off = kx - pad;
            const int lo = std::max(0, ceil_div(-off, stride));
            const int hi = std::min(OW - 1, floor_div(W - 1 - off, stride));
            S acc = 0;
            for (int oy = 0; oy < OH; ++oy) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const S* grow = gplane + static_cast<std::size_t>(oy) * OW;
              const S* xrow = xplane + static_cast<std::size_t>(iy) * W;
              if (stride == 1) {
                const S* xs = xrow + off;
                for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * xs[ox];
              } else {
                for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * xrow[ox * stride + off];
              }
            }
            wplane[ky * k + kx] += acc;
          }
        }
      }
    }
  }
}

template <typename S>
void bias_grad(const S* dy, int N, int C, int H, int W, S* db) {
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const S* plane = dy + (static_cast<std::size_t>(n) * C + c) * H * W;
      S acc = 0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i) acc += plane[i];
      db[c] += acc;
    }
  }
}

template <typename S>
S stable_sigmoid(S x) {
  if (x >= 0) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

template <typename S>
class Tape;

// Handle to a node on a tape. Cheap to copy; only meaningful while the
// owning tape is alive.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int node = -1;

  bool valid() const { return tape != nullptr && node >= 0; }
  const Tensor<S>& value() const { return tape->value(node); }
  const Tensor<S>& grad() const { return tape->grad(node); }
  const TensorShape& shape() const { return tape->value(node).shape; }
};

template <typename S>
class Tape {
 public:
  using PullFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> leaf(Tensor<S> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), Tensor<S>{}, nullptr, requires_grad, true});
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<S> emit(Tensor<S> value, const std::vector<int>& inputs, PullFn pull) {
    bool rg = false;
    for (int i : inputs) rg = rg || (i >= 0 && nodes_[i].requires_grad);
    nodes_.push_back(Node{std::move(value), Tensor<S>{}, rg ? std::move(pull) : nullptr, rg, false});
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<S>& value(int id) const { return nodes_[id].value; }

  bool needs_grad(int id) const { return id >= 0 && nodes_[id].requires_grad; }

  // Gradient accumulator, zero-allocated on first touch.
  Tensor<S>& grad_acc(int id) {
    Node& nd = nodes_[id];
    if (nd.grad.empty()) nd.grad = Tensor<S>::zeros(nd.value.shape);
    return nd.grad;
  }

  const Tensor<S>& grad(int id) {
    return grad_acc(id);
  }

  // Reverse pass from a scalar loss node. Populates gradients for every
  // grad-flagged leaf; unreachable leaves read back as zero.
  void backward(const Var<S>& loss) {
    if (loss.tape != this) throw ShapeError("backward: loss var belongs to a different tape");
    const TensorShape scalar{1, 1, 1, 1};
    if (!(value(loss.node).shape == scalar)) {
      throw ShapeError("backward: loss must be scalar (1x1x1x1), got " +
                       value(loss.node).shape.str());
    }
    if (ran_backward_) throw std::logic_error("backward: tape already consumed");
    ran_backward_ = true;
    if (!nodes_[loss.node].requires_grad) return;
    grad_acc(loss.node).data[0] = S(1);
    for (int id = loss.node; id >= 0; --id) {
      Node& nd = nodes_[id];
      if (!nd.requires_grad || !nd.pull || nd.grad.empty()) continue;
      nd.pull(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    PullFn pull;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

namespace detail {

template <typename S>
Tape<S>& same_tape(const Var<S>& a, const Var<S>& b) {
  if (a.tape != b.tape) throw ShapeError("operands belong to different tapes");
  return *a.tape;
}

}  // namespace detail

// ---- convolution ----

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int conv_transpose_out_size(int in, int k, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + k;
}

// w layout (Cout, Cin, k, k); b (Cout) mapped to shape (1,Cout,1,1).
template <typename S>
Var<S> conv2d(Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  Tape<S>& t = detail::same_tape(x, w);
  const TensorShape xs = x.shape();
  const TensorShape ws = w.shape();
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >=1 and pad >=0");
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (xs.c != ws.c) {
    throw ShapeError("conv2d: input channels " + xs.str() + " do not match weights " + ws.str());
  }
  const bool has_bias = b.valid();
  if (has_bias) {
    detail::same_tape(x, b);
    if (b.shape().size() != static_cast<std::size_t>(ws.n)) {
      throw ShapeError("conv2d: bias size does not match output channels");
    }
  }
  const int k = ws.h;
  const int oh = conv_out_size(xs.h, k, stride, pad);
  const int ow = conv_out_size(xs.w, k, stride, pad);
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d: non-positive output size for input " + xs.str() + " kernel " +
                     std::to_string(k) + " stride " + std::to_string(stride));
  }
  Tensor<S> y({xs.n, ws.n, oh, ow});
  detail::conv_gather(x.value().data.data(), xs.n, xs.c, xs.h, xs.w,
                      w.value().data.data(), ws.n, k,
                      has_bias ? b.value().data.data() : nullptr, stride, pad,
                      y.data.data(), oh, ow, false);
  const int xi = x.node, wi = w.node, bi = has_bias ? b.node : -1;
  return t.emit(std::move(y), {xi, wi, bi}, [=](Tape<S>& t, int self) {
    const Tensor<S>& dy = t.grad(self);
    const Tensor<S>& xv = t.value(xi);
    const Tensor<S>& wv = t.value(wi);
    const TensorShape ys = dy.shape;
    if (t.needs_grad(xi)) {
      detail::conv_scatter(dy.data.data(), ys.n, ys.c, ys.h, ys.w,
                           wv.data.data(), xs.c, k, static_cast<const S*>(nullptr), stride, pad,
                           t.grad_acc(xi).data.data(), xs.h, xs.w, true);
    }
    if (t.needs_grad(wi)) {
      detail::conv_wgrad(dy.data.data(), ys.n, ys.c, ys.h, ys.w,
                         xv.data.data(), xs.c, xs.h, xs.w, k, stride, pad,
                         t.grad_acc(wi).data.data());
    }
    if (bi >= 0 && t.needs_grad(bi)) {
      detail::bias_grad(dy.data.data(), ys.n, ys.c, ys.h, ys.w, t.grad_acc(bi).data.data());
    }
  });
}

template <typename S>
Var<S> conv2d(Var<S> x, Var<S> w, int stride, int pad) {
  return conv2d(x, w, Var<S>{}, stride, pad);
}

// Transposed convolution sharing conv2d's weight layout: w (Co, Ci, k, k)
// maps a Co-channel input to a Ci-channel output, so the adjoint identity
// <conv2d(x,w), y> == <x, conv2d_transpose(y,w)> holds with the same w.
template <typename S>
Var<S> conv2d_transpose(Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  Tape<S>& t = detail::same_tape(x, w);
  const TensorShape xs = x.shape();
  const TensorShape ws = w.shape();
  if (stride < 1 || pad < 0) throw ShapeError("conv2d_transpose: stride must be >=1 and pad >=0");
  if (ws.h != ws.w) throw ShapeError("conv2d_transpose: kernel must be square, got " + ws.str());
  if (xs.c != ws.n) {
    throw ShapeError("conv2d_transpose: input channels " + xs.str() + " do not match weights " +
                     ws.str());
  }
  const bool has_bias = b.valid();
  if (has_bias) {
    detail::same_tape(x, b);
    if (b.shape().size() != static_cast<std::size_t>(ws.c)) {
      throw ShapeError("conv2d_transpose: bias size does not match output channels");
    }
  }
  const int k = ws.h;
  const int oh = conv_transpose_out_size(xs.h, k, stride, pad);
  const int ow = conv_transpose_out_size(xs.w, k, stride, pad);
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d_transpose: non-positive output size for input " + xs.str());
  }
  Tensor<S> y({xs.n, ws.c, oh, ow});
  detail::conv_scatter(x.value().data.data(), xs.n, xs.c, xs.h, xs.w,
                       w.value().data.data(), ws.c, k,
                       has_bias ? b.value().data.data() : nullptr, stride, pad,
                       y.data.data(), oh, ow, false);
  const int xi = x.node, wi = w.node, bi = has_bias ? b.node : -1;
  return t.emit(std::move(y), {xi, wi, bi}, [=](Tape<S>& t, int self) {
    const Tensor<S>& dy = t.grad(self);
    const Tensor<S>& xv = t.value(xi);
    const Tensor<S>& wv = t.value(wi);
    const TensorShape ys = dy.shape;
    if (t.needs_grad(xi)) {
      detail::conv_gather(dy.data.data(), ys.n, ys.c, ys.h, ys.w,
                          wv.data.data(), xs.c, k, static_cast<const S*>(nullptr), stride, pad,
                          t.grad_acc(xi).data.data(), xs.h, xs.w, true);
    }
    if (t.needs_grad(wi)) {
      detail::conv_wgrad(xv.data.data(), xs.n, xs.c, xs.h, xs.w,
                         dy.data.data(), ys.c, ys.h, ys.w, k, stride, pad,
                         t.grad_acc(wi).data.data());
    }
    if (bi >= 0 && t.needs_grad(bi)) {
      detail::bias_grad(dy.data.data(), ys.n, ys.c, ys.h, ys.w, t.grad_acc(bi).data.data());
    }
  });
}

template <typename S>
Var<S> conv2d_transpose(Var<S> x, Var<S> w, int stride, int pad) {
  return conv2d_transpose(x, w, Var<S>{}, stride, pad);
}

// ---- pointwise and elementwise ----

enum class Pointwise { sigmoid, tanh, relu, linear };

template <typename S>
Var<S> pointwise(Var<S> x, Pointwise kind) {
  Tape<S>& t = *x.tape;
  const Tensor<S>& xv = x.value();
  Tensor<S> y;
  y.shape = xv.shape;
  y.data.resize(xv.size());
  switch (kind) {
    case Pointwise::sigmoid:
      for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = detail::stable_sigmoid(xv.data[i]);
      break;
    case Pointwise::tanh:
      for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = std::tanh(xv.data[i]);
      break;
    case Pointwise::relu:
      for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = xv.data[i] > S(0) ? xv.data[i] : S(0);
      break;
    case Pointwise::linear:
      y.data = xv.data;
      break;
  }
  const int xi = x.node;
  return t.emit(std::move(y), {xi}, [=](Tape<S>& t, int self) {
    if (!t.needs_grad(xi)) return;
    const Tensor<S>& dy = t.grad(self);
    const Tensor<S>& yv = t.value(self);
    const Tensor<S>& xv = t.value(xi);
    Tensor<S>& dx = t.grad_acc(xi);
    switch (kind) {
      case Pointwise::sigmoid:
        for (std::size_t i = 0; i < dx.size(); ++i)
          dx.data[i] += dy.data[i] * yv.data[i] * (S(1) - yv.data[i]);
        break;
      case Pointwise::tanh:
        for (std::size_t i = 0; i < dx.size(); ++i)
          dx.data[i] += dy.data[i] * (S(1) - yv.data[i] * yv.data[i]);
        break;
      case Pointwise::relu:
        for (std::size_t i = 0; i < dx.size(); ++i)
          if (xv.data[i] > S(0)) dx.data[i] += dy.data[i];
        break;
      case Pointwise::linear:
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
        break;
    }
  });
}

template <typename S>
Var<S> sigmoid(Var<S> x) { return pointwise(x, Pointwise::sigmoid); }
template <typename S>
Var<S> tanh(Var<S> x) { return pointwise(x, Pointwise::tanh); }
template <typename S>
Var<S> relu(Var<S> x) { return pointwise(x, Pointwise::relu); }

enum class Eltwise { add, mul };

template <typename S>
Var<S> eltwise(Eltwise op, Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b);
  const Tensor<S>& av = a.value();
  const Tensor<S>& bv = b.value();
  if (!(av.shape == bv.shape)) {
    throw ShapeError("eltwise: shape mismatch " + av.shape.str() + " vs " + bv.shape.str());
  }
  Tensor<S> y;
  y.shape = av.shape;
  y.data.resize(av.size());
  if (op == Eltwise::add) {
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = av.data[i] + bv.data[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = av.data[i] * bv.data[i];
  }
  const int ai = a.node, bi = b.node;
  return t.emit(std::move(y), {ai, bi}, [=](Tape<S>& t, int self) {
    const Tensor<S>& dy = t.grad(self);
    if (op == Eltwise::add) {
      if (t.needs_grad(ai)) {
        Tensor<S>& da = t.grad_acc(ai);
        for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i];
      }
      if (t.needs_grad(bi)) {
        Tensor<S>& db = t.grad_acc(bi);
        for (std::size_t i = 0; i < dy.size(); ++i) db.data[i] += dy.data[i];
      }
    } else {
      const Tensor<S>& av = t.value(ai);
      const Tensor<S>& bv = t.value(bi);
      if (t.needs_grad(ai)) {
        Tensor<S>& da = t.grad_acc(ai);
        for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * bv.data[i];
      }
      if (t.needs_grad(bi)) {
        Tensor<S>& db = t.grad_acc(bi);
        for (std::size_t i = 0; i < dy.size(); ++i) db.data[i] += dy.data[i] * av.data[i];
      }
    }
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) { return eltwise(Eltwise::add, a, b); }
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) { return eltwise(Eltwise::mul, a, b); }

template <typename S>
Var<S> scale(Var<S> x, S c) {
  Tape<S>& t = *x.tape;
  const Tensor<S>& xv = x.value();
  Tensor<S> y;
  y.shape = xv.shape;
  y.data.resize(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = c * xv.data[i];
  const int xi = x.node;
  return t.emit(std::move(y), {xi}, [=](Tape<S>& t, int self) {
    if (!t.needs_grad(xi)) return;
    const Tensor<S>& dy = t.grad(self);
    Tensor<S>& dx = t.grad_acc(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += c * dy.data[i];
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) { return add(a, scale(b, S(-1))); }

template <typename S>
Var<S> concat_channels(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b);
  const TensorShape as = a.shape();
  const TensorShape bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: N/H/W mismatch " + as.str() + " vs " + bs.str());
  }
  Tensor<S> y({as.n, as.c + bs.c, as.h, as.w});
  const std::size_t plane = static_cast<std::size_t>(as.h) * as.w;
  const Tensor<S>& av = a.value();
  const Tensor<S>& bv = b.value();
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(av.data.data() + n * as.c * plane, as.c * plane,
                y.data.data() + static_cast<std::size_t>(n) * (as.c + bs.c) * plane);
    std::copy_n(bv.data.data() + n * bs.c * plane, bs.c * plane,
                y.data.data() + (static_cast<std::size_t>(n) * (as.c + bs.c) + as.c) * plane);
  }
  const int ai = a.node, bi = b.node;
  const int ca = as.c, cb = bs.c;
  return t.emit(std::move(y), {ai, bi}, [=](Tape<S>& t, int self) {
    const Tensor<S>& dy = t.grad(self);
    const int n_total = dy.shape.n;
    if (t.needs_grad(ai)) {
      Tensor<S>& da = t.grad_acc(ai);
      for (int n = 0; n < n_total; ++n)
        for (std::size_t i = 0; i < ca * plane; ++i)
          da.data[n * ca * plane + i] += dy.data[static_cast<std::size_t>(n) * (ca + cb) * plane + i];
    }
    if (t.needs_grad(bi)) {
      Tensor<S>& db = t.grad_acc(bi);
      for (int n = 0; n < n_total; ++n)
        for (std::size_t i = 0; i < cb * plane; ++i)
          db.data[n * cb * plane + i] +=
              dy.data[(static_cast<std::size_t>(n) * (ca + cb) + ca) * plane + i];
    }
  });
}

// Channel slice [c0, c1); the inverse of concat_channels.
template <typename S>
Var<S> slice_channels(Var<S> x, int c0, int c1) {
  Tape<S>& t = *x.tape;
  const TensorShape xs = x.shape();
  if (c0 < 0 || c1 <= c0 || c1 > xs.c) {
    throw ShapeError("slice_channels: bad range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for " + xs.str());
  }
  const int cs = c1 - c0;
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor<S> y({xs.n, cs, xs.h, xs.w});
  const Tensor<S>& xv = x.value();
  for (int n = 0; n < xs.n; ++n) {
    std::copy_n(xv.data.data() + (static_cast<std::size_t>(n) * xs.c + c0) * plane, cs * plane,
                y.data.data() + static_cast<std::size_t>(n) * cs * plane);
  }
  const int xi = x.node;
  const int cx = xs.c;
  return t.emit(std::move(y), {xi}, [=](Tape<S>& t, int self) {
    if (!t.needs_grad(xi)) return;
    const Tensor<S>& dy = t.grad(self);
    Tensor<S>& dx = t.grad_acc(xi);
    for (int n = 0; n < dy.shape.n; ++n)
      for (std::size_t i = 0; i < cs * plane; ++i)
        dx.data[(static_cast<std::size_t>(n) * cx + c0) * plane + i] +=
            dy.data[static_cast<std::size_t>(n) * cs * plane + i];
  });
}

// ---- reductions and resampling ----

template <typename S>
Var<S> sum(Var<S> x) {
  Tape<S>& t = *x.tape;
  const Tensor<S>& xv = x.value();
  S acc = 0;
  for (S v : xv.data) acc += v;
  Tensor<S> y({1, 1, 1, 1});
  y.data[0] = acc;
  const int xi = x.node;
  return t.emit(std::move(y), {xi}, [=](Tape<S>& t, int self) {
    if (!t.needs_grad(xi)) return;
    const S g = t.grad(self).data[0];
    Tensor<S>& dx = t.grad_acc(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += g;
  });
}

template <typename S>
Var<S> mean(Var<S> x) {
  return scale(sum(x), S(1) / static_cast<S>(x.shape().size()));
}

// Mean squared error over all elements.
template <typename S>
Var<S> mse(Var<S> a, Var<S> b) {
  Var<S> d = sub(a, b);
  return mean(mul(d, d));
}

// Bilinear upsampling by an integer factor, half-pixel-centre convention.
template <typename S>
Var<S> upsample_bilinear(Var<S> x, int factor) {
  if (factor < 1) throw ShapeError("upsample_bilinear: factor must be >= 1");
  if (factor == 1) return pointwise(x, Pointwise::linear);
  Tape<S>& t = *x.tape;
  const TensorShape xs = x.shape();
  const int oh = xs.h * factor;
  const int ow = xs.w * factor;

  // index/weight tables per output coordinate
  auto make_table = [&](int in, int out, std::vector<int>& i0, std::vector<S>& w1) {
    i0.resize(out);
    w1.resize(out);
    for (int o = 0; o < out; ++o) {
      const double src = (o + 0.5) / factor - 0.5;
      double f = std::floor(src);
      double frac = src - f;
      int lo = static_cast<int>(f);
      if (lo < 0) { lo = 0; frac = 0.0; }
      if (lo >= in - 1) { lo = in - 1; frac = 0.0; }
      i0[o] = lo;
      w1[o] = static_cast<S>(frac);
    }
  };
  std::vector<int> y0, x0;
  std::vector<S> wy, wx;
  make_table(xs.h, oh, y0, wy);
  make_table(xs.w, ow, x0, wx);

  const Tensor<S>& xv = x.value();
  Tensor<S> y({xs.n, xs.c, oh, ow});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const S* xp = xv.data.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.h * xs.w;
      S* yp = y.data.data() + (static_cast<std::size_t>(n) * xs.c + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = y0[oy];
        const int iy1 = std::min(iy + 1, xs.h - 1);
        const S fy = wy[oy];
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = x0[ox];
          const int ix1 = std::min(ix + 1, xs.w - 1);
          const S fx = wx[ox];
          const S v00 = xp[iy * xs.w + ix];
          const S v01 = xp[iy * xs.w + ix1];
          const S v10 = xp[iy1 * xs.w + ix];
          const S v11 = xp[iy1 * xs.w + ix1];
          yp[oy * ow + ox] = (S(1) - fy) * ((S(1) - fx) * v00 + fx * v01) +
                             fy * ((S(1) - fx) * v10 + fx * v11);
        }
      }
    }
  }
  const int xi = x.node;
  return t.emit(std::move(y), {xi},
                [=, y0 = std::move(y0), x0 = std::move(x0), wy = std::move(wy),
                 wx = std::move(wx)](Tape<S>& t, int self) {
    if (!t.needs_grad(xi)) return;
    const Tensor<S>& dy = t.grad(self);
    Tensor<S>& dx = t.grad_acc(xi);
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        S* dxp = dx.data.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.h * xs.w;
        const S* dyp = dy.data.data() + (static_cast<std::size_t>(n) * xs.c + c) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = y0[oy];
          const int iy1 = std::min(iy + 1, xs.h - 1);
          const S fy = wy[oy];
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = x0[ox];
            const int ix1 = std::min(ix + 1, xs.w - 1);
            const S fx = wx[ox];
            const S g = dyp[oy * ow + ox];
            dxp[iy * xs.w + ix] += (S(1) - fy) * (S(1) - fx) * g;
            dxp[iy * xs.w + ix1] += (S(1) - fy) * fx * g;
            dxp[iy1 * xs.w + ix] += fy * (S(1) - fx) * g;
            dxp[iy1 * xs.w + ix1] += fy * fx * g;
          }
        }
      }
    }
  });
}

}  // namespace vqe
