#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "csakd/array.hpp"

namespace csakd {

// Reverse-mode autodiff over Array values. Graphs are built dynamically as
// ops execute; wrap inference-only evaluation in NoGradGuard so ops skip
// graph construction and intermediates are freed as they go out of scope.

namespace detail {

struct Node {
  Array value;
  Array grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grads.
  std::function<void(Node&)> backprop;

  Array& grad_buffer() {
    if (grad.empty()) grad = Array(value.shape());
    return grad;
  }

  void accumulate(const Array& g) {
    Array& dst = grad_buffer();
    const double* src = g.data();
    double* d = dst.data();
    for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += src[i];
  }
};

}  // namespace detail

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Array v, bool requires_grad = true);
  static Tensor constant(Array v) { return leaf(std::move(v), false); }

  bool defined() const { return n_ != nullptr; }
  const Array& value() const { return n_->value; }
  Array& value_mut() { return n_->value; }  // parameter updates only
  const Array& grad() const { return n_->grad; }
  bool has_grad() const { return n_ && !n_->grad.empty(); }
  void zero_grad() {
    if (n_ && !n_->grad.empty()) n_->grad.fill(0.0);
  }
  bool requires_grad() const { return n_ && n_->requires_grad; }

  double item() const {
    if (n_->value.size() != 1) throw std::logic_error("Tensor::item: not a scalar");
    return n_->value[0];
  }

  std::shared_ptr<detail::Node> node() const { return n_; }
  static Tensor from_node(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> n_;
};

// Runs reverse-mode accumulation from a scalar output.
void backward(const Tensor& scalar_out);

// Builds an op node. `backprop` receives the node (with .grad filled) and
// must accumulate into the parents it cares about. When grads are globally
// disabled or no input requires them, the closure is dropped.
Tensor make_op(Array value, const std::vector<Tensor>& inputs,
               std::function<void(detail::Node&)> backprop);

// ---------------------------------------------------------------------------
// Elementwise / structural ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor stop_gradient(const Tensor& x);

// Channel concat of rank-3 maps sharing (H, W). With groups > 1 the inputs
// are interleaved per group (group g of the output is the concat of every
// input's group-g channel slice) so grouped convolutions stay separable.
Tensor concat_channels(const std::vector<Tensor>& xs, int groups = 1);

Tensor slice_channels(const Tensor& x, int c0, int c1);

// x: (C, H, W) * gate: (1, H, W), broadcast over channels.
Tensor mul_channel(const Tensor& x, const Tensor& gate);

// Averages consecutive channel blocks down to target_channels (C divisible).
Tensor channel_avg_pool(const Tensor& x, int target_channels);

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// x: (Cin, H, W), w: (Cout, Cin/groups, k, k), b: (Cout). Stride 1, zero
// padding `pad`; output (Cout, H + 2 pad - k + 1, ...). im2col + GEMM with
// column blocking to bound scratch memory.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad,
              int groups = 1);

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// q, k, v: (r, H, W); tokens are spatial positions. Per head i of r/heads
// channels: A_i = softmax(Q_i K_i^T / sqrt(r)) over keys, output A_i V_i;
// heads concatenated back to (r, H, W). Softmax temperature uses sqrt(r),
// not sqrt(r/heads). If attn_out != nullptr the per-head attention maps are
// copied out as (heads, T, T) (small inputs only).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int heads, Array* attn_out = nullptr);

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

// Separable Keys bicubic (a = -0.5), half-pixel center alignment, mirror
// (reflect-101) borders, per-channel independent. Works for any sizes; the
// network-facing wrapper in dts restricts the factor.
Tensor resize_bicubic(const Tensor& x, int out_h, int out_w);
Array resize_bicubic_array(const Array& x, int out_h, int out_w);

// Folds an index into [0, n) by mirror reflection about the edge samples.
int reflect_index(int i, int n);

}  // namespace csakd
