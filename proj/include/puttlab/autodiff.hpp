#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "puttlab/errors.hpp"

namespace puttlab::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);

// One record of the define-by-run graph. Nodes carry a creation-order id from
// a thread-local counter, so ascending id is a topological order by
// construction; backward() walks the reachable set in descending id order.
// Distinct graphs on distinct threads are fully independent.
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use; accumulates until zeroed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // scatters this->grad into parents

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantics handle to a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor leaf(Shape shape, std::vector<double> value, bool requires_grad);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }  // leaves only
  const std::vector<double>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
  }
  double item() const;
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Populates grad on every requires_grad node reachable from `loss`.
// Accumulates into existing grads; call zero_grad between steps.
void backward(const Tensor& loss);

// ---- elementwise / reduction -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// mean((a - b)^2) over all elements, as a fused node.
Tensor mse(const Tensor& a, const Tensor& b);

// ---- layout ---------------------------------------------------------------

// [Ca, L] + [Cb, L] -> [Ca+Cb, L]
Tensor concat_channels(const Tensor& a, const Tensor& b);
// [L, A] + [L, B] -> [L, A+B]
Tensor concat_cols(const Tensor& a, const Tensor& b);
// [A, B] -> [B, A]
Tensor transpose2d(const Tensor& a);
// [L, F] with rows reversed
Tensor reverse_time(const Tensor& a);
// [r*C, L] -> [C, r*L]; out[c, r*t + j] = in[j*C + c, t]
Tensor pixel_shuffle1d(const Tensor& a, int upscale);

// ---- network primitives ----------------------------------------------------

// input [C_in, L], weight [C_out, C_in, K], bias [C_out] -> [C_out, L_out]
// with L_out = (L + 2*padding - dilation*(K-1) - 1)/stride + 1 (floor).
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int dilation, int padding);

// input [C_in, L], weight [C_in, C_out, K], bias [C_out] -> [C_out, (L-1)*stride + K]
Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride);

// Same-padding stride-1 conv to upscale*C_out channels followed by a periodic
// shuffle into time. weight [upscale*C_out, C_in, K] (K odd), bias [upscale*C_out];
// result [C_out, upscale*L]. upscale == 1 reduces to conv1d.
Tensor subpixel_conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                       int upscale);

enum class BnMode { train, eval };

// Per-channel normalization over the time axis of a [C, L] map. Train mode
// uses batch statistics (biased variance) and updates the running buffers
// in place with `momentum`; eval mode reads the running buffers.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>* running_mean, std::vector<double>* running_var,
                  BnMode mode, double eps = 1e-5, double momentum = 0.1);

// out = x > 0 ? x : alpha[c] * x ; input [C, L], alpha [C]
Tensor prelu(const Tensor& input, const Tensor& alpha);

// input [L, F], weight [O, F], bias [O] -> [L, O]
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// One LSTM direction over input [L, F] -> [L, H], zero initial state, gate
// order (i, f, g, o) in the leading dimension of the 4H-row weights.
struct LstmParams {
  Tensor w_ih;  // [4H, F]
  Tensor w_hh;  // [4H, H]
  Tensor b_ih;  // [4H]
  Tensor b_hh;  // [4H]
};
Tensor lstm(const Tensor& input, const LstmParams& params);

// Bidirectional single layer: concatenation of the forward pass and the
// time-reversed pass, [L, F] -> [L, 2H].
Tensor bilstm(const Tensor& input, const LstmParams& forward, const LstmParams& backward_dir);

}  // namespace puttlab::ad
