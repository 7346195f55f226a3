#include "puttlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace puttlab::ad {

namespace {

thread_local std::uint64_t g_next_id = 1;

Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->id = g_next_id++;
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeMismatch(what);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ShapeMismatch("non-positive dimension");
    n *= d;
  }
  return n;
}

Tensor Tensor::leaf(Shape shape, std::vector<double> value, bool requires_grad) {
  if (shape_size(shape) != static_cast<std::int64_t>(value.size()))
    throw ShapeMismatch("leaf: shape does not match data length");
  auto n = std::make_shared<Node>();
  n->id = g_next_id++;
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return leaf({1}, {v}, requires_grad);
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw NotScalar("item() on non-scalar tensor");
  return node_->value[0];
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw NotScalar("backward on undefined tensor");
  if (loss.size() != 1) throw NotScalar("backward requires a scalar loss");
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || seen.count(n)) continue;
    seen.insert(n);
    order.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  // Interior grads are per-invocation scratch; leaf grads accumulate across
  // backward calls until explicitly zeroed.
  for (Node* n : order)
    if (n->backprop) n->grad.assign(n->value.size(), 0.0);
  Node* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (Node* n : order)
    if (n->backprop) n->backprop(*n);
}

// ---- elementwise / reduction -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> v(a.value());
  for (double& x : v) x *= c;
  NodePtr pa = a.node();
  return make_op(a.shape(), std::move(v), {pa}, [pa, c](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.value()) acc += x;
  NodePtr pa = a.node();
  return make_op({1}, {acc}, {pa}, [pa](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    const double g = self.grad[0];
    for (double& d : pa->grad) d += g;
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double x : a.value()) acc += x;
  NodePtr pa = a.node();
  return make_op({1}, {acc * inv}, {pa}, [pa, inv](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    const double g = self.grad[0] * inv;
    for (double& d : pa->grad) d += g;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  NodePtr pa = a.node(), pb = b.node();
  return make_op({1}, {acc * inv}, {pa, pb}, [pa, pb, inv](Node& self) {
    const double g = 2.0 * inv * self.grad[0];
    if (pa->requires_grad) pa->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    for (std::size_t i = 0; i < pa->value.size(); ++i) {
      const double d = g * (pa->value[i] - pb->value[i]);
      if (pa->requires_grad) pa->grad[i] += d;
      if (pb->requires_grad) pb->grad[i] -= d;
    }
  });
}

// ---- layout ---------------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
    throw ShapeMismatch("concat_channels");
  const std::int64_t ca = a.shape()[0], cb = b.shape()[0], len = a.shape()[1];
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>((ca + cb) * len));
  v.insert(v.end(), a.value().begin(), a.value().end());
  v.insert(v.end(), b.value().begin(), b.value().end());
  NodePtr pa = a.node(), pb = b.node();
  const std::size_t na = a.value().size();
  return make_op({ca + cb, len}, std::move(v), {pa, pb}, [pa, pb, na](Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = na; i < self.grad.size(); ++i) pb->grad[i - na] += self.grad[i];
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0])
    throw ShapeMismatch("concat_cols");
  const std::int64_t rows = a.shape()[0], fa = a.shape()[1], fb = b.shape()[1];
  std::vector<double> v(static_cast<std::size_t>(rows * (fa + fb)));
  for (std::int64_t t = 0; t < rows; ++t) {
    for (std::int64_t j = 0; j < fa; ++j) v[t * (fa + fb) + j] = a.value()[t * fa + j];
    for (std::int64_t j = 0; j < fb; ++j) v[t * (fa + fb) + fa + j] = b.value()[t * fb + j];
  }
  NodePtr pa = a.node(), pb = b.node();
  return make_op({rows, fa + fb}, std::move(v), {pa, pb}, [pa, pb, rows, fa, fb](Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::int64_t t = 0; t < rows; ++t)
        for (std::int64_t j = 0; j < fa; ++j)
          pa->grad[t * fa + j] += self.grad[t * (fa + fb) + j];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::int64_t t = 0; t < rows; ++t)
        for (std::int64_t j = 0; j < fb; ++j)
          pb->grad[t * fb + j] += self.grad[t * (fa + fb) + fa + j];
    }
  });
}

Tensor transpose2d(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeMismatch("transpose2d expects rank 2");
  const std::int64_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> v(a.value().size());
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) v[j * r + i] = a.value()[i * c + j];
  NodePtr pa = a.node();
  return make_op({c, r}, std::move(v), {pa}, [pa, r, c](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) pa->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reverse_time(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeMismatch("reverse_time expects rank 2");
  const std::int64_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<double> v(a.value().size());
  for (std::int64_t t = 0; t < rows; ++t)
    std::copy_n(a.value().begin() + (rows - 1 - t) * cols, cols, v.begin() + t * cols);
  NodePtr pa = a.node();
  return make_op(a.shape(), std::move(v), {pa}, [pa, rows, cols](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::int64_t t = 0; t < rows; ++t)
      for (std::int64_t j = 0; j < cols; ++j)
        pa->grad[(rows - 1 - t) * cols + j] += self.grad[t * cols + j];
  });
}

Tensor pixel_shuffle1d(const Tensor& a, int upscale) {
  if (a.shape().size() != 2) throw ShapeMismatch("pixel_shuffle1d expects rank 2");
  const std::int64_t r = upscale;
  if (r < 1 || a.shape()[0] % r != 0) throw ShapeMismatch("pixel_shuffle1d: channels not divisible");
  const std::int64_t c_out = a.shape()[0] / r, len = a.shape()[1];
  std::vector<double> v(a.value().size());
  for (std::int64_t c = 0; c < c_out; ++c)
    for (std::int64_t t = 0; t < len; ++t)
      for (std::int64_t j = 0; j < r; ++j)
        v[c * (r * len) + r * t + j] = a.value()[(j * c_out + c) * len + t];
  NodePtr pa = a.node();
  return make_op({c_out, r * len}, std::move(v), {pa}, [pa, c_out, len, r](Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::int64_t c = 0; c < c_out; ++c)
      for (std::int64_t t = 0; t < len; ++t)
        for (std::int64_t j = 0; j < r; ++j)
          pa->grad[(j * c_out + c) * len + t] += self.grad[c * (r * len) + r * t + j];
  });
}

// ---- network primitives ----------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int dilation, int padding) {
  if (input.shape().size() != 2 || weight.shape().size() != 3 || bias.shape().size() != 1)
    throw ShapeMismatch("conv1d ranks");
  const std::int64_t c_in = input.shape()[0], len = input.shape()[1];
  const std::int64_t c_out = weight.shape()[0], k = weight.shape()[2];
  if (weight.shape()[1] != c_in) throw ShapeMismatch("conv1d: weight C_in mismatch");
  if (bias.shape()[0] != c_out) throw ShapeMismatch("conv1d: bias length mismatch");
  if (stride < 1 || dilation < 1 || padding < 0) throw ShapeMismatch("conv1d: bad hyperparams");
  const std::int64_t span = dilation * (k - 1) + 1;
  const std::int64_t l_out = (len + 2 * padding - span) / stride + 1;
  if (len + 2 * padding < span || l_out < 1) throw ShapeMismatch("conv1d: output would be empty");

  const std::int64_t lp = len + 2 * padding;
  std::vector<double> padded(static_cast<std::size_t>(c_in * lp), 0.0);
  for (std::int64_t ci = 0; ci < c_in; ++ci)
    std::copy_n(input.value().begin() + ci * len, len, padded.begin() + ci * lp + padding);

  std::vector<double> out(static_cast<std::size_t>(c_out * l_out));
  for (std::int64_t co = 0; co < c_out; ++co)
    std::fill_n(out.begin() + co * l_out, l_out, bias.value()[co]);
  for (std::int64_t co = 0; co < c_out; ++co) {
    double* yrow = out.data() + co * l_out;
    for (std::int64_t ci = 0; ci < c_in; ++ci) {
      const double* xrow = padded.data() + ci * lp;
      const double* wrow = weight.value().data() + (co * c_in + ci) * k;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const double wv = wrow[kk];
        const double* xo = xrow + kk * dilation;
        for (std::int64_t t = 0; t < l_out; ++t) yrow[t] += wv * xo[t * stride];
      }
    }
  }

  NodePtr px = input.node(), pw = weight.node(), pb = bias.node();
  auto saved = std::make_shared<std::vector<double>>(std::move(padded));
  return make_op(
      {c_out, l_out}, std::move(out), {px, pw, pb},
      [px, pw, pb, saved, c_in, c_out, k, len, lp, l_out, stride, dilation,
       padding](Node& self) {
        const double* g = self.grad.data();
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::int64_t co = 0; co < c_out; ++co) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < l_out; ++t) acc += g[co * l_out + t];
            pb->grad[co] += acc;
          }
        }
        if (pw->requires_grad) {
          pw->ensure_grad();
          for (std::int64_t co = 0; co < c_out; ++co) {
            const double* grow = g + co * l_out;
            for (std::int64_t ci = 0; ci < c_in; ++ci) {
              const double* xrow = saved->data() + ci * lp;
              for (std::int64_t kk = 0; kk < k; ++kk) {
                const double* xo = xrow + kk * dilation;
                double acc = 0.0;
                for (std::int64_t t = 0; t < l_out; ++t) acc += grow[t] * xo[t * stride];
                pw->grad[(co * c_in + ci) * k + kk] += acc;
              }
            }
          }
        }
        if (px->requires_grad) {
          px->ensure_grad();
          std::vector<double> dpad(static_cast<std::size_t>(c_in * lp), 0.0);
          for (std::int64_t co = 0; co < c_out; ++co) {
            const double* grow = g + co * l_out;
            for (std::int64_t ci = 0; ci < c_in; ++ci) {
              double* drow = dpad.data() + ci * lp;
              const double* wrow = pw->value.data() + (co * c_in + ci) * k;
              for (std::int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                double* dxo = drow + kk * dilation;
                for (std::int64_t t = 0; t < l_out; ++t) dxo[t * stride] += wv * grow[t];
              }
            }
          }
          for (std::int64_t ci = 0; ci < c_in; ++ci)
            for (std::int64_t t = 0; t < len; ++t)
              px->grad[ci * len + t] += dpad[ci * lp + t + padding];
        }
      });
}

Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride) {
  if (input.shape().size() != 2 || weight.shape().size() != 3 || bias.shape().size() != 1)
    throw ShapeMismatch("conv_transpose1d ranks");
  const std::int64_t c_in = input.shape()[0], len = input.shape()[1];
  const std::int64_t c_out = weight.shape()[1], k = weight.shape()[2];
  if (weight.shape()[0] != c_in) throw ShapeMismatch("conv_transpose1d: weight C_in mismatch");
  if (bias.shape()[0] != c_out) throw ShapeMismatch("conv_transpose1d: bias length mismatch");
  if (stride < 1) throw ShapeMismatch("conv_transpose1d: bad stride");
  const std::int64_t l_out = (len - 1) * stride + k;

  std::vector<double> out(static_cast<std::size_t>(c_out * l_out));
  for (std::int64_t co = 0; co < c_out; ++co)
    std::fill_n(out.begin() + co * l_out, l_out, bias.value()[co]);
  for (std::int64_t ci = 0; ci < c_in; ++ci) {
    const double* xrow = input.value().data() + ci * len;
    for (std::int64_t co = 0; co < c_out; ++co) {
      double* yrow = out.data() + co * l_out;
      const double* wrow = weight.value().data() + (ci * c_out + co) * k;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const double wv = wrow[kk];
        double* yo = yrow + kk;
        for (std::int64_t t = 0; t < len; ++t) yo[t * stride] += wv * xrow[t];
      }
    }
  }

  NodePtr px = input.node(), pw = weight.node(), pb = bias.node();
  return make_op(
      {c_out, l_out}, std::move(out), {px, pw, pb},
      [px, pw, pb, c_in, c_out, k, len, l_out, stride](Node& self) {
        const double* g = self.grad.data();
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::int64_t co = 0; co < c_out; ++co) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < l_out; ++t) acc += g[co * l_out + t];
            pb->grad[co] += acc;
          }
        }
        if (pw->requires_grad) {
          pw->ensure_grad();
          for (std::int64_t ci = 0; ci < c_in; ++ci) {
            const double* xrow = px->value.data() + ci * len;
            for (std::int64_t co = 0; co < c_out; ++co) {
              const double* grow = g + co * l_out;
              for (std::int64_t kk = 0; kk < k; ++kk) {
                const double* go = grow + kk;
                double acc = 0.0;
                for (std::int64_t t = 0; t < len; ++t) acc += xrow[t] * go[t * stride];
                pw->grad[(ci * c_out + co) * k + kk] += acc;
              }
            }
          }
        }
        if (px->requires_grad) {
          px->ensure_grad();
          for (std::int64_t ci = 0; ci < c_in; ++ci) {
            double* drow = px->grad.data() + ci * len;
            for (std::int64_t co = 0; co < c_out; ++co) {
              const double* grow = g + co * l_out;
              const double* wrow = pw->value.data() + (ci * c_out + co) * k;
              for (std::int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                const double* go = grow + kk;
                for (std::int64_t t = 0; t < len; ++t) drow[t] += wv * go[t * stride];
              }
            }
          }
        }
      });
}

Tensor subpixel_conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                       int upscale) {
  if (weight.shape().size() != 3) throw ShapeMismatch("subpixel_conv1d weight rank");
  const std::int64_t k = weight.shape()[2];
  if (k % 2 == 0) throw ShapeMismatch("subpixel_conv1d requires an odd kernel");
  if (upscale < 1 || weight.shape()[0] % upscale != 0)
    throw ShapeMismatch("subpixel_conv1d: weight channels not divisible by upscale");
  const Tensor full = conv1d(input, weight, bias, 1, 1, static_cast<int>((k - 1) / 2));
  return pixel_shuffle1d(full, upscale);
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>* running_mean, std::vector<double>* running_var,
                  BnMode mode, double eps, double momentum) {
  if (input.shape().size() != 2) throw ShapeMismatch("batch_norm expects [C, L]");
  const std::int64_t c = input.shape()[0], len = input.shape()[1];
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw ShapeMismatch("batch_norm: gamma/beta length");
  if (eps <= 0.0) throw ShapeMismatch("batch_norm: eps must be positive");

  std::vector<double> xhat(input.value().size());
  std::vector<double> istd(static_cast<std::size_t>(c));
  std::vector<double> out(input.value().size());

  if (mode == BnMode::train) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* row = input.value().data() + ch * len;
      double mu = 0.0;
      for (std::int64_t t = 0; t < len; ++t) mu += row[t];
      mu /= static_cast<double>(len);
      double var = 0.0;
      for (std::int64_t t = 0; t < len; ++t) {
        const double d = row[t] - mu;
        var += d * d;
      }
      var /= static_cast<double>(len);
      istd[ch] = 1.0 / std::sqrt(var + eps);
      for (std::int64_t t = 0; t < len; ++t) {
        xhat[ch * len + t] = (row[t] - mu) * istd[ch];
        out[ch * len + t] = gamma.value()[ch] * xhat[ch * len + t] + beta.value()[ch];
      }
      if (running_mean && running_var) {
        (*running_mean)[ch] = (1.0 - momentum) * (*running_mean)[ch] + momentum * mu;
        (*running_var)[ch] = (1.0 - momentum) * (*running_var)[ch] + momentum * var;
      }
    }
  } else {
    if (!running_mean || !running_var) throw Error("batch_norm eval mode needs running stats");
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* row = input.value().data() + ch * len;
      istd[ch] = 1.0 / std::sqrt((*running_var)[ch] + eps);
      const double mu = (*running_mean)[ch];
      for (std::int64_t t = 0; t < len; ++t) {
        xhat[ch * len + t] = (row[t] - mu) * istd[ch];
        out[ch * len + t] = gamma.value()[ch] * xhat[ch * len + t] + beta.value()[ch];
      }
    }
  }

  NodePtr px = input.node(), pg = gamma.node(), pb = beta.node();
  auto saved_xhat = std::make_shared<std::vector<double>>(std::move(xhat));
  auto saved_istd = std::make_shared<std::vector<double>>(std::move(istd));
  const bool train = mode == BnMode::train;
  return make_op(
      input.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, saved_xhat, saved_istd, c, len, train](Node& self) {
        const double* g = self.grad.data();
        const double* xh = saved_xhat->data();
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        if (px->requires_grad) px->ensure_grad();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double* grow = g + ch * len;
          const double* xrow = xh + ch * len;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::int64_t t = 0; t < len; ++t) {
            sum_g += grow[t];
            sum_gx += grow[t] * xrow[t];
          }
          if (pg->requires_grad) pg->grad[ch] += sum_gx;
          if (pb->requires_grad) pb->grad[ch] += sum_g;
          if (px->requires_grad) {
            const double gam = pg->value[ch];
            const double is = (*saved_istd)[ch];
            if (train) {
              const double m1 = sum_g / static_cast<double>(len);
              const double m2 = sum_gx / static_cast<double>(len);
              for (std::int64_t t = 0; t < len; ++t)
                px->grad[ch * len + t] += gam * is * (grow[t] - m1 - xrow[t] * m2);
            } else {
              for (std::int64_t t = 0; t < len; ++t)
                px->grad[ch * len + t] += gam * is * grow[t];
            }
          }
        }
      });
}

Tensor prelu(const Tensor& input, const Tensor& alpha) {
  if (input.shape().size() != 2) throw ShapeMismatch("prelu expects [C, L]");
  const std::int64_t c = input.shape()[0], len = input.shape()[1];
  if (alpha.shape() != Shape{c}) throw ShapeMismatch("prelu: alpha length");
  std::vector<double> out(input.value().size());
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const double a = alpha.value()[ch];
    for (std::int64_t t = 0; t < len; ++t) {
      const double x = input.value()[ch * len + t];
      out[ch * len + t] = x > 0.0 ? x : a * x;
    }
  }
  NodePtr px = input.node(), pa = alpha.node();
  return make_op(input.shape(), std::move(out), {px, pa}, [px, pa, c, len](Node& self) {
    const double* g = self.grad.data();
    if (px->requires_grad) px->ensure_grad();
    if (pa->requires_grad) pa->ensure_grad();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double a = pa->value[ch];
      double da = 0.0;
      for (std::int64_t t = 0; t < len; ++t) {
        const double x = px->value[ch * len + t];
        if (px->requires_grad) px->grad[ch * len + t] += g[ch * len + t] * (x > 0.0 ? 1.0 : a);
        if (x <= 0.0) da += g[ch * len + t] * x;
      }
      if (pa->requires_grad) pa->grad[ch] += da;
    }
  });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.shape().size() != 2 || weight.shape().size() != 2 || bias.shape().size() != 1)
    throw ShapeMismatch("linear ranks");
  const std::int64_t rows = input.shape()[0], f = input.shape()[1];
  const std::int64_t o = weight.shape()[0];
  if (weight.shape()[1] != f || bias.shape()[0] != o) throw ShapeMismatch("linear shapes");

  std::vector<double> out(static_cast<std::size_t>(rows * o));
  for (std::int64_t t = 0; t < rows; ++t) {
    const double* xrow = input.value().data() + t * f;
    for (std::int64_t j = 0; j < o; ++j) {
      const double* wrow = weight.value().data() + j * f;
      double acc = bias.value()[j];
      for (std::int64_t i = 0; i < f; ++i) acc += wrow[i] * xrow[i];
      out[t * o + j] = acc;
    }
  }
  NodePtr px = input.node(), pw = weight.node(), pb = bias.node();
  return make_op({rows, o}, std::move(out), {px, pw, pb}, [px, pw, pb, rows, f, o](Node& self) {
    const double* g = self.grad.data();
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::int64_t j = 0; j < o; ++j) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < rows; ++t) acc += g[t * o + j];
        pb->grad[j] += acc;
      }
    }
    if (pw->requires_grad) {
      pw->ensure_grad();
      for (std::int64_t t = 0; t < rows; ++t) {
        const double* xrow = px->value.data() + t * f;
        for (std::int64_t j = 0; j < o; ++j) {
          const double gv = g[t * o + j];
          double* wrow = pw->grad.data() + j * f;
          for (std::int64_t i = 0; i < f; ++i) wrow[i] += gv * xrow[i];
        }
      }
    }
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::int64_t t = 0; t < rows; ++t) {
        double* drow = px->grad.data() + t * f;
        for (std::int64_t j = 0; j < o; ++j) {
          const double gv = g[t * o + j];
          const double* wrow = pw->value.data() + j * f;
          for (std::int64_t i = 0; i < f; ++i) drow[i] += gv * wrow[i];
        }
      }
    }
  });
}

Tensor lstm(const Tensor& input, const LstmParams& params) {
  if (input.shape().size() != 2) throw ShapeMismatch("lstm expects [L, F]");
  const std::int64_t len = input.shape()[0], f = input.shape()[1];
  if (params.w_ih.shape().size() != 2 || params.w_hh.shape().size() != 2)
    throw ShapeMismatch("lstm weight ranks");
  const std::int64_t h4 = params.w_ih.shape()[0];
  if (h4 % 4 != 0) throw ShapeMismatch("lstm: gate dimension not divisible by 4");
  const std::int64_t h = h4 / 4;
  if (params.w_ih.shape()[1] != f || params.w_hh.shape() != Shape{h4, h} ||
      params.b_ih.shape() != Shape{h4} || params.b_hh.shape() != Shape{h4})
    throw ShapeMismatch("lstm parameter shapes");

  const std::size_t lh = static_cast<std::size_t>(len * h);
  // Cached activations for backpropagation through time.
  auto gi = std::make_shared<std::vector<double>>(lh);
  auto gf = std::make_shared<std::vector<double>>(lh);
  auto gg = std::make_shared<std::vector<double>>(lh);
  auto go = std::make_shared<std::vector<double>>(lh);
  auto cs = std::make_shared<std::vector<double>>(lh);
  auto tc = std::make_shared<std::vector<double>>(lh);

  std::vector<double> out(lh, 0.0);
  std::vector<double> gates(static_cast<std::size_t>(h4));
  const double* w_ih = params.w_ih.value().data();
  const double* w_hh = params.w_hh.value().data();
  const double* b_ih = params.b_ih.value().data();
  const double* b_hh = params.b_hh.value().data();

  for (std::int64_t t = 0; t < len; ++t) {
    const double* x_t = input.value().data() + t * f;
    const double* h_prev = t > 0 ? out.data() + (t - 1) * h : nullptr;
    for (std::int64_t r = 0; r < h4; ++r) {
      double acc = b_ih[r] + b_hh[r];
      const double* wi = w_ih + r * f;
      for (std::int64_t j = 0; j < f; ++j) acc += wi[j] * x_t[j];
      if (h_prev) {
        const double* wh = w_hh + r * h;
        for (std::int64_t j = 0; j < h; ++j) acc += wh[j] * h_prev[j];
      }
      gates[static_cast<std::size_t>(r)] = acc;
    }
    for (std::int64_t j = 0; j < h; ++j) {
      const double iv = sigmoid(gates[static_cast<std::size_t>(j)]);
      const double fv = sigmoid(gates[static_cast<std::size_t>(h + j)]);
      const double gv = std::tanh(gates[static_cast<std::size_t>(2 * h + j)]);
      const double ov = sigmoid(gates[static_cast<std::size_t>(3 * h + j)]);
      const double c_prev = t > 0 ? (*cs)[(t - 1) * h + j] : 0.0;
      const double cv = fv * c_prev + iv * gv;
      const double tv = std::tanh(cv);
      (*gi)[t * h + j] = iv;
      (*gf)[t * h + j] = fv;
      (*gg)[t * h + j] = gv;
      (*go)[t * h + j] = ov;
      (*cs)[t * h + j] = cv;
      (*tc)[t * h + j] = tv;
      out[t * h + j] = ov * tv;
    }
  }

  NodePtr px = input.node();
  NodePtr pwi = params.w_ih.node(), pwh = params.w_hh.node();
  NodePtr pbi = params.b_ih.node(), pbh = params.b_hh.node();
  return make_op(
      {len, h}, std::move(out), {px, pwi, pwh, pbi, pbh},
      [px, pwi, pwh, pbi, pbh, gi, gf, gg, go, cs, tc, len, f, h, h4](Node& self) {
        if (px->requires_grad) px->ensure_grad();
        if (pwi->requires_grad) pwi->ensure_grad();
        if (pwh->requires_grad) pwh->ensure_grad();
        if (pbi->requires_grad) pbi->ensure_grad();
        if (pbh->requires_grad) pbh->ensure_grad();

        std::vector<double> dh(static_cast<std::size_t>(h), 0.0);
        std::vector<double> dc(static_cast<std::size_t>(h), 0.0);
        std::vector<double> dgates(static_cast<std::size_t>(h4));
        const double* w_ih = pwi->value.data();
        const double* w_hh = pwh->value.data();

        for (std::int64_t t = len - 1; t >= 0; --t) {
          for (std::int64_t j = 0; j < h; ++j) {
            dh[static_cast<std::size_t>(j)] += self.grad[t * h + j];
            const double iv = (*gi)[t * h + j], fv = (*gf)[t * h + j];
            const double gv = (*gg)[t * h + j], ov = (*go)[t * h + j];
            const double tv = (*tc)[t * h + j];
            const double c_prev = t > 0 ? (*cs)[(t - 1) * h + j] : 0.0;
            const double dhv = dh[static_cast<std::size_t>(j)];
            const double dov = dhv * tv;
            double dcv = dc[static_cast<std::size_t>(j)] + dhv * ov * (1.0 - tv * tv);
            const double div = dcv * gv;
            const double dgv = dcv * iv;
            const double dfv = dcv * c_prev;
            dc[static_cast<std::size_t>(j)] = dcv * fv;  // flows to c_{t-1}
            dgates[static_cast<std::size_t>(j)] = div * iv * (1.0 - iv);
            dgates[static_cast<std::size_t>(h + j)] = dfv * fv * (1.0 - fv);
            dgates[static_cast<std::size_t>(2 * h + j)] = dgv * (1.0 - gv * gv);
            dgates[static_cast<std::size_t>(3 * h + j)] = dov * ov * (1.0 - ov);
          }
          const double* x_t = px->value.data() + t * f;
          const double* h_prev = t > 0 ? self.value.data() + (t - 1) * h : nullptr;
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::int64_t r = 0; r < h4; ++r) {
            const double dg = dgates[static_cast<std::size_t>(r)];
            if (pbi->requires_grad) pbi->grad[r] += dg;
            if (pbh->requires_grad) pbh->grad[r] += dg;
            if (pwi->requires_grad) {
              double* wrow = pwi->grad.data() + r * f;
              for (std::int64_t j = 0; j < f; ++j) wrow[j] += dg * x_t[j];
            }
            if (px->requires_grad) {
              const double* wrow = w_ih + r * f;
              double* dxrow = px->grad.data() + t * f;
              for (std::int64_t j = 0; j < f; ++j) dxrow[j] += dg * wrow[j];
            }
            if (h_prev) {
              if (pwh->requires_grad) {
                double* wrow = pwh->grad.data() + r * h;
                for (std::int64_t j = 0; j < h; ++j) wrow[j] += dg * h_prev[j];
              }
              const double* wrow = w_hh + r * h;
              for (std::int64_t j = 0; j < h; ++j) dh[static_cast<std::size_t>(j)] += dg * wrow[j];
            }
          }
        }
      });
}

Tensor bilstm(const Tensor& input, const LstmParams& forward, const LstmParams& backward_dir) {
  const Tensor fwd = lstm(input, forward);
  const Tensor bwd = reverse_time(lstm(reverse_time(input), backward_dir));
  return concat_cols(fwd, bwd);
}

}  // namespace puttlab::ad
