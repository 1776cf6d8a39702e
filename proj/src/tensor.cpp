/*
 * Copyright 2026 SanitLab Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sanitlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace sanitlab {

namespace {

constexpr float kLogClamp = 1e-12f;

// Multi-accumulator reductions. Strict FP forbids reassociating a single
// scalar accumulator, so these fix a lane order the vectorizer can keep.
constexpr int kLanes = 16;

float dot_f(const float* a, const float* b, std::size_t n) {
  float lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int k = 0; k < kLanes; ++k) lanes[k] += a[i + k] * b[i + k];
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  float s = tail;
  for (int k = 0; k < kLanes; ++k) s += lanes[k];
  return s;
}

double sum_d(const float* a, std::size_t n) {
  double lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int k = 0; k < kLanes; ++k) lanes[k] += a[i + k];
  double s = 0.0;
  for (; i < n; ++i) s += a[i];
  for (int k = 0; k < kLanes; ++k) s += lanes[k];
  return s;
}

// sum and sum of squares in one pass, double lanes
void sum_sq_d(const float* a, std::size_t n, double& sum_out, double& sq_out) {
  double s_lanes[kLanes] = {}, q_lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int k = 0; k < kLanes; ++k) {
      const double v = a[i + k];
      s_lanes[k] += v;
      q_lanes[k] += v * v;
    }
  double s = 0.0, q = 0.0;
  for (; i < n; ++i) {
    const double v = a[i];
    s += v;
    q += v * v;
  }
  for (int k = 0; k < kLanes; ++k) {
    s += s_lanes[k];
    q += q_lanes[k];
  }
  sum_out = s;
  sq_out = q;
}

// dual reduction for batchnorm backward: sum(dy) and sum(dy * (x - mu) * is)
void bn_back_sums(const float* dy, const float* x, float mu, float is, std::size_t n,
                  double& sum_dy, double& sum_dy_xhat) {
  float a_lanes[kLanes] = {}, b_lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int k = 0; k < kLanes; ++k) {
      a_lanes[k] += dy[i + k];
      b_lanes[k] += dy[i + k] * ((x[i + k] - mu) * is);
    }
  float a_tail = 0.0f, b_tail = 0.0f;
  for (; i < n; ++i) {
    a_tail += dy[i];
    b_tail += dy[i] * ((x[i] - mu) * is);
  }
  double a = a_tail, b = b_tail;
  for (int k = 0; k < kLanes; ++k) {
    a += a_lanes[k];
    b += b_lanes[k];
  }
  sum_dy += a;
  sum_dy_xhat += b;
}

void check_finite(const std::vector<float>& v, const char* op) {
  bool bad = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    float a = std::fabs(v[i]);
    bad |= !(a <= std::numeric_limits<float>::max());
  }
  if (bad) throw std::runtime_error(std::string(op) + ": non-finite output");
}

void ensure_grad(TensorImpl& t) {
  if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0f);
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

Tensor make_node(Shape shape, std::vector<float> data, const char* op,
                 std::initializer_list<const Tensor*> inputs,
                 std::function<void(TensorImpl&)> backward_fn) {
  check_finite(data, op);
  Tensor out = Tensor::from(std::move(shape), std::move(data));
  if (any_requires_grad(inputs)) {
    TensorImpl* impl = out.impl();
    impl->requires_grad = true;
    impl->op = op;
    for (const Tensor* t : inputs)
      if (t->defined()) impl->inputs.push_back(*t);
    impl->backward_fn = std::move(backward_fn);
  }
  return out;
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) shape_error(op, detail);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  for (int d : shape)
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive extent in " + shape_str(shape));
  std::size_t n = numel(shape);
  if (data.empty()) data.assign(n, 0.0f);
  if (data.size() != n)
    throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
std::vector<float>& Tensor::data() { return impl_->data; }
const std::vector<float>& Tensor::data() const { return impl_->data; }
bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }

std::vector<float>& Tensor::grad() {
  ensure_grad(*impl_);
  return impl_->grad;
}

const std::vector<float>& Tensor::grad() const {
  ensure_grad(*impl_);
  return impl_->grad;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

float Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
  return impl_->data[0];
}

double Tensor::item_precise() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item_precise: tensor is not scalar");
  if (std::isnan(impl_->precise)) return static_cast<double>(impl_->data[0]);
  return impl_->precise;
}

void Tensor::backward() const {
  if (!defined()) throw std::invalid_argument("backward: undefined tensor");
  if (size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!std::isfinite(impl_->data[0])) throw std::runtime_error("backward: non-finite loss");

  // Iterative post-order DFS for the topological order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* node;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  if (impl_->requires_grad) stack.push_back({impl_.get(), 0});
  seen.insert(impl_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      TensorImpl* child = f.node->inputs[f.next_input++].impl();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  ensure_grad(*impl_);
  impl_->grad[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn) {
      ensure_grad(*node);
      node->backward_fn(*node);
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x) {
  const auto& xd = x.data();
  std::vector<float> y(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) y[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
  return make_node(x.shape(), std::move(y), "relu", {&x}, [](TensorImpl& self) {
    Tensor in = self.inputs[0];
    if (!in.requires_grad()) return;
    const auto& xd = in.data();
    auto& xg = in.grad();
    for (std::size_t i = 0; i < xd.size(); ++i)
      xg[i] += xd[i] > 0.0f ? self.grad[i] : 0.0f;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<float> y(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) y[i] = ad[i] + bd[i];
  Tensor out = make_node(a.shape(), std::move(y), "add", {&a, &b}, [](TensorImpl& self) {
    for (int k = 0; k < 2; ++k) {
      Tensor in = self.inputs[static_cast<std::size_t>(k)];
      if (!in.requires_grad()) continue;
      auto& g = in.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
  if (a.size() == 1 && !std::isnan(a.impl()->precise) && !std::isnan(b.impl()->precise))
    out.impl()->precise = a.impl()->precise + b.impl()->precise;
  return out;
}

Tensor scale(const Tensor& x, float k) {
  const auto& xd = x.data();
  std::vector<float> y(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) y[i] = k * xd[i];
  Tensor out = make_node(x.shape(), std::move(y), "scale", {&x}, [k](TensorImpl& self) {
    Tensor in = self.inputs[0];
    if (!in.requires_grad()) return;
    auto& g = in.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * self.grad[i];
  });
  if (x.size() == 1 && !std::isnan(x.impl()->precise))
    out.impl()->precise = static_cast<double>(k) * x.impl()->precise;
  return out;
}

Tensor reshape(const Tensor& x, Shape target) {
  require(numel(target) == x.size(), "reshape",
          "cannot view " + shape_str(x.shape()) + " as " + shape_str(target));
  std::vector<float> y = x.data();
  return make_node(std::move(target), std::move(y), "reshape", {&x}, [](TensorImpl& self) {
    Tensor in = self.inputs[0];
    if (!in.requires_grad()) return;
    auto& g = in.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.shape().size() == 2, "linear", "input must be [N,F], got " + shape_str(x.shape()));
  require(w.shape().size() == 2, "linear", "weight must be [O,F], got " + shape_str(w.shape()));
  require(x.dim(1) == w.dim(1), "linear",
          "input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()));
  const int n = x.dim(0), fdim = x.dim(1), o = w.dim(0);
  if (b.defined())
    require(b.shape() == Shape{o}, "linear",
            "bias " + shape_str(b.shape()) + " incompatible with weight " + shape_str(w.shape()));

  const float* xd = x.data().data();
  const float* wd = w.data().data();
  std::vector<float> y(static_cast<std::size_t>(n) * o, 0.0f);
  double scalar_acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* xr = xd + static_cast<std::size_t>(i) * fdim;
    float* yr = y.data() + static_cast<std::size_t>(i) * o;
    for (int j = 0; j < o; ++j) {
      const float* wr = wd + static_cast<std::size_t>(j) * fdim;
      double acc = 0.0;
      for (int f = 0; f < fdim; ++f) acc += static_cast<double>(xr[f]) * wr[f];
      if (b.defined()) acc += b.data()[static_cast<std::size_t>(j)];
      yr[j] = static_cast<float>(acc);
      scalar_acc = acc;
    }
  }

  Tensor result = make_node({n, o}, std::move(y), "linear", {&x, &w, &b}, [n, fdim, o](TensorImpl& self) {
    Tensor x_in = self.inputs[0];
    Tensor w_in = self.inputs[1];
    const bool has_bias = self.inputs.size() > 2;
    const float* dy = self.grad.data();
    const float* xd = x_in.data().data();
    const float* wd = w_in.data().data();
    if (x_in.requires_grad()) {
      float* xg = x_in.grad().data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) {
          float g = dy[static_cast<std::size_t>(i) * o + j];
          const float* wr = wd + static_cast<std::size_t>(j) * fdim;
          float* xr = xg + static_cast<std::size_t>(i) * fdim;
          for (int f = 0; f < fdim; ++f) xr[f] += g * wr[f];
        }
    }
    if (w_in.requires_grad()) {
      float* wg = w_in.grad().data();
      for (int j = 0; j < o; ++j)
        for (int i = 0; i < n; ++i) {
          float g = dy[static_cast<std::size_t>(i) * o + j];
          const float* xr = xd + static_cast<std::size_t>(i) * fdim;
          float* wr = wg + static_cast<std::size_t>(j) * fdim;
          for (int f = 0; f < fdim; ++f) wr[f] += g * xr[f];
        }
    }
    if (has_bias) {
      Tensor b_in = self.inputs[2];
      if (b_in.requires_grad()) {
        float* bg = b_in.grad().data();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < o; ++j) bg[j] += dy[static_cast<std::size_t>(i) * o + j];
      }
    }
  });
  // Scalar outputs keep their double accumulation so that finite-difference
  // probes are not limited by the float32 store.
  if (n == 1 && o == 1) result.impl()->precise = scalar_acc;
  return result;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

// Zero-padded copy of one example's [C,H,W] planes.
void fill_padded(const float* x, float* xpad, int c, int h, int w, int pad) {
  const int ph = h + 2 * pad, pw = w + 2 * pad;
  std::fill(xpad, xpad + static_cast<std::size_t>(c) * ph * pw, 0.0f);
  for (int ci = 0; ci < c; ++ci)
    for (int r = 0; r < h; ++r)
      std::memcpy(xpad + (static_cast<std::size_t>(ci) * ph + r + pad) * pw + pad,
                  x + (static_cast<std::size_t>(ci) * h + r) * w,
                  static_cast<std::size_t>(w) * sizeof(float));
}

// col[(ci*K+kh)*K+kw][oh*OW+ow] = xpad[ci][oh*s+kh][ow*s+kw]. Long contiguous
// spatial rows keep the hot GEMM-style loops fully vectorized.
void im2col(const float* xpad, float* col, int ci, int ph, int pw, int k, int stride, int oh,
            int ow) {
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < ci; ++ic)
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        float* dst = col + ((static_cast<std::size_t>(ic) * k + kh) * k + kw) * ohw;
        const float* src = xpad + (static_cast<std::size_t>(ic) * ph + kh) * pw + kw;
        for (int r = 0; r < oh; ++r) {
          const float* s = src + static_cast<std::size_t>(r) * stride * pw;
          float* d = dst + static_cast<std::size_t>(r) * ow;
          if (stride == 1) {
            std::memcpy(d, s, static_cast<std::size_t>(ow) * sizeof(float));
          } else {
            for (int c2 = 0; c2 < ow; ++c2) d[c2] = s[static_cast<std::size_t>(c2) * stride];
          }
        }
      }
}

// Scatter-add the col-layout gradient back onto the padded input gradient.
void col2im_add(const float* col, float* dxpad, int ci, int ph, int pw, int k, int stride, int oh,
                int ow) {
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < ci; ++ic)
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        const float* src = col + ((static_cast<std::size_t>(ic) * k + kh) * k + kw) * ohw;
        float* dst = dxpad + (static_cast<std::size_t>(ic) * ph + kh) * pw + kw;
        for (int r = 0; r < oh; ++r) {
          const float* s = src + static_cast<std::size_t>(r) * ow;
          float* d = dst + static_cast<std::size_t>(r) * stride * pw;
          if (stride == 1) {
            for (int c2 = 0; c2 < ow; ++c2) d[c2] += s[c2];
          } else {
            for (int c2 = 0; c2 < ow; ++c2) d[static_cast<std::size_t>(c2) * stride] += s[c2];
          }
        }
      }
}

thread_local std::vector<float> g_pad_scratch;
thread_local std::vector<float> g_pad_scratch2;
thread_local std::vector<float> g_col_scratch;
thread_local std::vector<float> g_col_scratch2;

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  require(x.shape().size() == 4, "conv2d", "input must be [N,C,H,W], got " + shape_str(x.shape()));
  require(w.shape().size() == 4 && w.dim(2) == w.dim(3), "conv2d",
          "kernel must be [O,C,K,K], got " + shape_str(w.shape()));
  require(x.dim(1) == w.dim(1), "conv2d",
          "input " + shape_str(x.shape()) + " incompatible with kernel " + shape_str(w.shape()));
  require(stride >= 1 && pad >= 0, "conv2d", "bad stride/pad");
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w_in = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  require(h + 2 * pad >= k && w_in + 2 * pad >= k, "conv2d",
          "kernel " + shape_str(w.shape()) + " larger than padded input " + shape_str(x.shape()));
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w_in + 2 * pad - k) / stride + 1;
  if (b.defined())
    require(b.shape() == Shape{co}, "conv2d",
            "bias " + shape_str(b.shape()) + " incompatible with kernel " + shape_str(w.shape()));

  const int ph = h + 2 * pad, pw = w_in + 2 * pad;
  const int ck = ci * k * k;
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  g_pad_scratch.resize(static_cast<std::size_t>(ci) * ph * pw);
  g_col_scratch.resize(static_cast<std::size_t>(ck) * ohw);
  float* xpad = g_pad_scratch.data();
  float* col = g_col_scratch.data();

  const float* xd = x.data().data();
  const float* wd = w.data().data();
  const float* bd = b.defined() ? b.data().data() : nullptr;
  std::vector<float> y(static_cast<std::size_t>(n) * co * ohw);

  for (int ni = 0; ni < n; ++ni) {
    fill_padded(xd + static_cast<std::size_t>(ni) * ci * h * w_in, xpad, ci, h, w_in, pad);
    im2col(xpad, col, ci, ph, pw, k, stride, oh, ow);
    // y[oc] = sum_r w[oc][r] * col[r], rows are ohw-long
    for (int oc = 0; oc < co; ++oc) {
      float* yb = y.data() + (static_cast<std::size_t>(ni) * co + oc) * ohw;
      std::fill(yb, yb + ohw, bd ? bd[oc] : 0.0f);
      const float* wb = wd + static_cast<std::size_t>(oc) * ck;
      for (int r = 0; r < ck; ++r) {
        const float wv = wb[r];
        const float* cr = col + static_cast<std::size_t>(r) * ohw;
        for (std::size_t i = 0; i < ohw; ++i) yb[i] += wv * cr[i];
      }
    }
  }

  auto backward = [n, ci, h, w_in, co, k, stride, pad, oh, ow](TensorImpl& self) {
    Tensor x_in = self.inputs[0];
    Tensor w_in_t = self.inputs[1];
    const bool has_bias = self.inputs.size() > 2;
    const float* xd = x_in.data().data();
    const float* wd = w_in_t.data().data();
    const float* dy = self.grad.data();
    const int ph = h + 2 * pad, pw = w_in + 2 * pad;
    const int ck = ci * k * k;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    const std::size_t pad_len = static_cast<std::size_t>(ci) * ph * pw;
    g_pad_scratch.resize(pad_len);
    g_col_scratch.resize(static_cast<std::size_t>(ck) * ohw);
    g_col_scratch2.resize(static_cast<std::size_t>(ck) * ohw);
    float* xpad = g_pad_scratch.data();
    float* col = g_col_scratch.data();
    float* dcol = g_col_scratch2.data();

    const bool need_dx = x_in.requires_grad();
    const bool need_dw = w_in_t.requires_grad();
    std::vector<double> dw_acc;
    if (need_dw) dw_acc.assign(static_cast<std::size_t>(co) * ck, 0.0);
    std::vector<double> db_acc;
    Tensor b_in;
    bool need_db = false;
    if (has_bias) {
      b_in = self.inputs[2];
      need_db = b_in.requires_grad();
      if (need_db) db_acc.assign(static_cast<std::size_t>(co), 0.0);
    }

    for (int ni = 0; ni < n; ++ni) {
      if (need_dw) {
        fill_padded(xd + static_cast<std::size_t>(ni) * ci * h * w_in, xpad, ci, h, w_in, pad);
        im2col(xpad, col, ci, ph, pw, k, stride, oh, ow);
      }
      if (need_dx)
        std::fill(dcol, dcol + static_cast<std::size_t>(ck) * ohw, 0.0f);
      for (int oc = 0; oc < co; ++oc) {
        const float* dyb = dy + (static_cast<std::size_t>(ni) * co + oc) * ohw;
        if (need_db) db_acc[static_cast<std::size_t>(oc)] += sum_d(dyb, ohw);
        const float* wb = wd + static_cast<std::size_t>(oc) * ck;
        for (int r = 0; r < ck; ++r) {
          if (need_dw) {
            const float* cr = col + static_cast<std::size_t>(r) * ohw;
            dw_acc[static_cast<std::size_t>(oc) * ck + r] += dot_f(dyb, cr, ohw);
          }
          if (need_dx) {
            const float wv = wb[r];
            float* dcr = dcol + static_cast<std::size_t>(r) * ohw;
            for (std::size_t i = 0; i < ohw; ++i) dcr[i] += wv * dyb[i];
          }
        }
      }
      if (need_dx) {
        std::fill(xpad, xpad + pad_len, 0.0f);
        col2im_add(dcol, xpad, ci, ph, pw, k, stride, oh, ow);
        float* xg = x_in.grad().data() + static_cast<std::size_t>(ni) * ci * h * w_in;
        for (int ic = 0; ic < ci; ++ic)
          for (int r = 0; r < h; ++r) {
            const float* src = xpad + (static_cast<std::size_t>(ic) * ph + r + pad) * pw + pad;
            float* dst = xg + (static_cast<std::size_t>(ic) * h + r) * w_in;
            for (int c2 = 0; c2 < w_in; ++c2) dst[c2] += src[c2];
          }
      }
    }
    if (need_dw) {
      float* wg = w_in_t.grad().data();
      for (std::size_t i = 0; i < dw_acc.size(); ++i) wg[i] += static_cast<float>(dw_acc[i]);
    }
    if (need_db) {
      float* bg = b_in.grad().data();
      for (int oc = 0; oc < co; ++oc) bg[oc] += static_cast<float>(db_acc[static_cast<std::size_t>(oc)]);
    }
  };

  return make_node({n, co, oh, ow}, std::move(y), "conv2d", {&x, &w, &b}, std::move(backward));
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

Tensor maxpool2x2(const Tensor& x) {
  require(x.shape().size() == 4, "maxpool2x2",
          "input must be [N,C,H,W], got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h >= 2 && w >= 2, "maxpool2x2", "spatial extent too small " + shape_str(x.shape()));
  const int oh = h / 2, ow = w / 2;
  const float* xd = x.data().data();
  std::vector<float> y(static_cast<std::size_t>(n) * c * oh * ow);
  auto argmax = std::make_shared<std::vector<int>>(y.size());
  for (int p = 0; p < n * c; ++p) {
    const float* plane = xd + static_cast<std::size_t>(p) * h * w;
    float* yb = y.data() + static_cast<std::size_t>(p) * oh * ow;
    int* ab = argmax->data() + static_cast<std::size_t>(p) * oh * ow;
    for (int r = 0; r < oh; ++r)
      for (int cc = 0; cc < ow; ++cc) {
        int base = (2 * r) * w + 2 * cc;
        int best = base;
        float bv = plane[base];
        const int cand[3] = {base + 1, base + w, base + w + 1};
        for (int t : cand)
          if (plane[t] > bv) {
            bv = plane[t];
            best = t;
          }
        yb[r * ow + cc] = bv;
        ab[r * ow + cc] = best;
      }
  }
  return make_node({n, c, oh, ow}, std::move(y), "maxpool2x2", {&x},
                   [argmax, h, w, oh, ow](TensorImpl& self) {
                     Tensor in = self.inputs[0];
                     if (!in.requires_grad()) return;
                     float* xg = in.grad().data();
                     const float* dy = self.grad.data();
                     const std::size_t planes = self.grad.size() / (static_cast<std::size_t>(oh) * ow);
                     for (std::size_t p = 0; p < planes; ++p) {
                       const float* dyb = dy + p * oh * ow;
                       const int* ab = argmax->data() + p * oh * ow;
                       float* xb = xg + p * static_cast<std::size_t>(h) * w;
                       for (int i = 0; i < oh * ow; ++i) xb[ab[i]] += dyb[i];
                     }
                   });
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.shape().size() == 4, "global_avg_pool",
          "input must be [N,C,H,W], got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int hw = h * w;
  const float* xd = x.data().data();
  std::vector<float> y(static_cast<std::size_t>(n) * c);
  for (int p = 0; p < n * c; ++p)
    y[static_cast<std::size_t>(p)] = static_cast<float>(
        sum_d(xd + static_cast<std::size_t>(p) * hw, static_cast<std::size_t>(hw)) / hw);
  return make_node({n, c}, std::move(y), "global_avg_pool", {&x}, [hw](TensorImpl& self) {
    Tensor in = self.inputs[0];
    if (!in.requires_grad()) return;
    float* xg = in.grad().data();
    const float inv = 1.0f / static_cast<float>(hw);
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const float g = self.grad[p] * inv;
      float* xb = xg + p * static_cast<std::size_t>(hw);
      for (int i = 0; i < hw; ++i) xb[i] += g;
    }
  });
}

// ---------------------------------------------------------------------------
// batchnorm2d
// ---------------------------------------------------------------------------

void StatAccumulator::init(int channels) {
  sum.assign(static_cast<std::size_t>(channels), 0.0);
  sum_sq.assign(static_cast<std::size_t>(channels), 0.0);
  count = 0.0;
}

void StatAccumulator::mean_var(std::vector<float>& mean_out, std::vector<float>& var_out) const {
  mean_out.resize(sum.size());
  var_out.resize(sum.size());
  const double denom = count > 1.5 ? count - 1.0 : 1.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    double m = sum[i] / count;
    double v = (sum_sq[i] - count * m * m) / denom;
    mean_out[i] = static_cast<float>(m);
    var_out[i] = static_cast<float>(v > 0.0 ? v : 0.0);
  }
}

BatchNormOut batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         const std::vector<float>& running_mean,
                         const std::vector<float>& running_var, Mode mode, float momentum,
                         float eps, StatAccumulator* calib) {
  require(x.shape().size() == 4, "batchnorm2d",
          "input must be [N,C,H,W], got " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(gamma.shape() == Shape{c} && beta.shape() == Shape{c}, "batchnorm2d",
          "scale/shift " + shape_str(gamma.shape()) + " incompatible with input " +
              shape_str(x.shape()));
  require(running_mean.size() == static_cast<std::size_t>(c) &&
              running_var.size() == static_cast<std::size_t>(c),
          "batchnorm2d", "running stats length mismatch");
  if (mode == Mode::calibrate)
    require(calib != nullptr, "batchnorm2d", "calibrate mode needs a StatAccumulator");

  const int hw = h * w;
  const std::size_t m_count = static_cast<std::size_t>(n) * hw;
  const float* xd = x.data().data();

  auto mean = std::make_shared<std::vector<float>>(static_cast<std::size_t>(c));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<std::size_t>(c));
  BatchNormOut out;

  const bool batch_stats = mode != Mode::eval;
  if (batch_stats) {
    if (calib && calib->sum.empty()) calib->init(c);
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0, raw_sq = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        double ps = 0.0, pq = 0.0;
        sum_sq_d(xd + (static_cast<std::size_t>(ni) * c + ch) * hw, static_cast<std::size_t>(hw),
                 ps, pq);
        s += ps;
        raw_sq += pq;
      }
      const double mu = s / static_cast<double>(m_count);
      double sq = raw_sq - static_cast<double>(m_count) * mu * mu;
      if (sq < 0.0) sq = 0.0;
      const double var = sq / static_cast<double>(m_count);  // biased, for normalization
      (*mean)[static_cast<std::size_t>(ch)] = static_cast<float>(mu);
      (*invstd)[static_cast<std::size_t>(ch)] =
          static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      if (mode == Mode::train) {
        const double unbiased =
            m_count > 1 ? sq / static_cast<double>(m_count - 1) : sq / static_cast<double>(m_count);
        if (out.new_running_mean.empty()) {
          out.new_running_mean.resize(static_cast<std::size_t>(c));
          out.new_running_var.resize(static_cast<std::size_t>(c));
        }
        out.new_running_mean[static_cast<std::size_t>(ch)] = static_cast<float>(
            (1.0 - momentum) * running_mean[static_cast<std::size_t>(ch)] + momentum * mu);
        out.new_running_var[static_cast<std::size_t>(ch)] = static_cast<float>(
            (1.0 - momentum) * running_var[static_cast<std::size_t>(ch)] + momentum * unbiased);
      } else if (mode == Mode::calibrate) {
        calib->sum[static_cast<std::size_t>(ch)] += s;
        calib->sum_sq[static_cast<std::size_t>(ch)] += raw_sq;
      }
    }
    if (mode == Mode::calibrate) calib->count += static_cast<double>(m_count);
  } else {
    for (int ch = 0; ch < c; ++ch) {
      (*mean)[static_cast<std::size_t>(ch)] = running_mean[static_cast<std::size_t>(ch)];
      (*invstd)[static_cast<std::size_t>(ch)] = static_cast<float>(
          1.0 / std::sqrt(static_cast<double>(running_var[static_cast<std::size_t>(ch)]) +
                          static_cast<double>(eps)));
    }
  }

  const float* gd = gamma.data().data();
  const float* bd = beta.data().data();
  std::vector<float> y(x.size());
  for (int ni = 0; ni < n; ++ni)
    for (int ch = 0; ch < c; ++ch) {
      const float mu = (*mean)[static_cast<std::size_t>(ch)];
      const float is = (*invstd)[static_cast<std::size_t>(ch)];
      const float g = gd[ch] * is;
      const float shift = bd[ch] - mu * g;
      const float* plane = xd + (static_cast<std::size_t>(ni) * c + ch) * hw;
      float* yp = y.data() + (static_cast<std::size_t>(ni) * c + ch) * hw;
      for (int i = 0; i < hw; ++i) yp[i] = g * plane[i] + shift;
    }

  auto backward = [n, c, hw, mean, invstd, batch_stats](TensorImpl& self) {
    Tensor x_in = self.inputs[0];
    Tensor gamma_in = self.inputs[1];
    Tensor beta_in = self.inputs[2];
    const float* xd = x_in.data().data();
    const float* gd = gamma_in.data().data();
    const float* dy = self.grad.data();
    const double m_count = static_cast<double>(n) * hw;

    for (int ch = 0; ch < c; ++ch) {
      const float mu = (*mean)[static_cast<std::size_t>(ch)];
      const float is = (*invstd)[static_cast<std::size_t>(ch)];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const std::size_t off = (static_cast<std::size_t>(ni) * c + ch) * hw;
        bn_back_sums(dy + off, xd + off, mu, is, static_cast<std::size_t>(hw), sum_dy,
                     sum_dy_xhat);
      }
      if (beta_in.requires_grad()) beta_in.grad()[static_cast<std::size_t>(ch)] += static_cast<float>(sum_dy);
      if (gamma_in.requires_grad())
        gamma_in.grad()[static_cast<std::size_t>(ch)] += static_cast<float>(sum_dy_xhat);
      if (!x_in.requires_grad()) continue;
      float* xg = x_in.grad().data();
      const float g_is = gd[ch] * is;
      if (batch_stats) {
        const float k1 = static_cast<float>(sum_dy / m_count);
        const float k2 = static_cast<float>(sum_dy_xhat / m_count);
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t off = (static_cast<std::size_t>(ni) * c + ch) * hw;
          const float* dyp = dy + off;
          const float* xp = xd + off;
          float* xgp = xg + off;
          for (int i = 0; i < hw; ++i) {
            const float xhat = (xp[i] - mu) * is;
            xgp[i] += g_is * (dyp[i] - k1 - xhat * k2);
          }
        }
      } else {
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t off = (static_cast<std::size_t>(ni) * c + ch) * hw;
          const float* dyp = dy + off;
          float* xgp = xg + off;
          for (int i = 0; i < hw; ++i) xgp[i] += g_is * dyp[i];
        }
      }
    }
  };

  out.y = make_node(x.shape(), std::move(y), "batchnorm2d", {&x, &gamma, &beta}, std::move(backward));
  return out;
}

// ---------------------------------------------------------------------------
// softmax / cross entropy
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x) {
  require(!x.shape().empty() && x.shape().size() <= 2, "softmax",
          "input must be [C] or [N,C], got " + shape_str(x.shape()));
  const int c = x.shape().back();
  const int rows = static_cast<int>(x.size()) / c;
  const float* xd = x.data().data();
  std::vector<float> y(x.size());
  for (int r = 0; r < rows; ++r) {
    const float* xr = xd + static_cast<std::size_t>(r) * c;
    float* yr = y.data() + static_cast<std::size_t>(r) * c;
    float mx = xr[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
    double denom = 0.0;
    for (int i = 0; i < c; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      denom += yr[i];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int i = 0; i < c; ++i) yr[i] *= inv;
  }
  return make_node(x.shape(), std::move(y), "softmax", {&x}, [c](TensorImpl& self) {
    Tensor in = self.inputs[0];
    if (!in.requires_grad()) return;
    const float* yd = self.data.data();
    const float* dy = self.grad.data();
    float* xg = in.grad().data();
    const int rows = static_cast<int>(self.data.size()) / c;
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * c;
      double dot = 0.0;
      for (int i = 0; i < c; ++i) dot += static_cast<double>(dy[off + i]) * yd[off + i];
      for (int i = 0; i < c; ++i)
        xg[off + i] += yd[off + i] * (dy[off + i] - static_cast<float>(dot));
    }
  });
}

namespace {

void validate_distribution(const std::vector<float>& v, const char* op, const char* which) {
  double s = 0.0;
  for (float p : v) {
    if (p < -1e-7f)
      throw std::invalid_argument(std::string(op) + ": negative entry in " + which);
    s += p;
  }
  if (std::fabs(s - 1.0) > 1e-5)
    throw std::invalid_argument(std::string(op) + ": " + which + " sums to " + std::to_string(s) +
                                ", expected 1 within 1e-5");
}

}  // namespace

Tensor cross_entropy(const Tensor& pred_dist, const Tensor& target_dist) {
  require(pred_dist.shape().size() == 1 && target_dist.shape().size() == 1, "cross_entropy",
          "expects two vectors, got " + shape_str(pred_dist.shape()) + " and " +
              shape_str(target_dist.shape()));
  require(pred_dist.size() == target_dist.size(), "cross_entropy",
          "length mismatch " + shape_str(pred_dist.shape()) + " vs " +
              shape_str(target_dist.shape()));
  validate_distribution(pred_dist.data(), "cross_entropy", "pred");
  validate_distribution(target_dist.data(), "cross_entropy", "target");

  const auto& p = pred_dist.data();
  const auto& t = target_dist.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc -= static_cast<double>(t[i]) * std::log(static_cast<double>(std::max(p[i], kLogClamp)));
  Tensor out = make_node({1}, {static_cast<float>(acc)}, "cross_entropy",
                         {&pred_dist, &target_dist}, [](TensorImpl& self) {
                           Tensor p_in = self.inputs[0];
                           Tensor t_in = self.inputs[1];
                           const float g = self.grad[0];
                           const auto& p = p_in.data();
                           const auto& t = t_in.data();
                           if (p_in.requires_grad()) {
                             auto& pg = p_in.grad();
                             for (std::size_t i = 0; i < p.size(); ++i)
                               if (p[i] > kLogClamp) pg[i] += -t[i] / p[i] * g;
                           }
                           if (t_in.requires_grad()) {
                             auto& tg = t_in.grad();
                             for (std::size_t i = 0; i < p.size(); ++i)
                               tg[i] += -std::log(std::max(p[i], kLogClamp)) * g;
                           }
                         });
  out.impl()->precise = acc;
  return out;
}

Tensor cross_entropy_mean(const Tensor& pred, const Tensor& target) {
  require(pred.shape().size() == 2 && target.shape() == pred.shape(), "cross_entropy_mean",
          "expects matching [N,C], got " + shape_str(pred.shape()) + " and " +
              shape_str(target.shape()));
  const int n = pred.dim(0), c = pred.dim(1);
  const auto& p = pred.data();
  const auto& t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc -= static_cast<double>(t[i]) * std::log(static_cast<double>(std::max(p[i], kLogClamp)));
  acc /= n;
  Tensor out = make_node({1}, {static_cast<float>(acc)}, "cross_entropy_mean", {&pred, &target},
                         [n, c](TensorImpl& self) {
                           Tensor p_in = self.inputs[0];
                           Tensor t_in = self.inputs[1];
                           const float g = self.grad[0] / static_cast<float>(n);
                           const auto& p = p_in.data();
                           const auto& t = t_in.data();
                           (void)c;
                           if (p_in.requires_grad()) {
                             auto& pg = p_in.grad();
                             for (std::size_t i = 0; i < p.size(); ++i)
                               if (p[i] > kLogClamp) pg[i] += -t[i] / p[i] * g;
                           }
                           if (t_in.requires_grad()) {
                             auto& tg = t_in.grad();
                             for (std::size_t i = 0; i < p.size(); ++i)
                               tg[i] += -std::log(std::max(p[i], kLogClamp)) * g;
                           }
                         });
  out.impl()->precise = acc;
  return out;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

namespace {

// Per-example squared-channel-sum map and its L2 norm.
void attention_raw(const float* act, int c, int hw, std::vector<float>& map_out, double& norm_out) {
  map_out.assign(static_cast<std::size_t>(hw), 0.0f);
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = act + static_cast<std::size_t>(ch) * hw;
    for (int i = 0; i < hw; ++i) map_out[static_cast<std::size_t>(i)] += plane[i] * plane[i];
  }
  double s = 0.0;
  for (int i = 0; i < hw; ++i)
    s += static_cast<double>(map_out[static_cast<std::size_t>(i)]) * map_out[static_cast<std::size_t>(i)];
  norm_out = std::sqrt(s);
}

constexpr double kNormTiny = 1e-20;

}  // namespace

std::vector<float> attention_map(const Tensor& act) {
  require(act.shape().size() == 4, "attention_map",
          "input must be [N,C,H,W], got " + shape_str(act.shape()));
  const int n = act.dim(0), c = act.dim(1), hw = act.dim(2) * act.dim(3);
  std::vector<float> out(static_cast<std::size_t>(n) * hw);
  std::vector<float> raw;
  for (int ni = 0; ni < n; ++ni) {
    double norm = 0.0;
    attention_raw(act.data().data() + static_cast<std::size_t>(ni) * c * hw, c, hw, raw, norm);
    const float inv = norm > kNormTiny ? static_cast<float>(1.0 / norm) : 0.0f;
    for (int i = 0; i < hw; ++i)
      out[static_cast<std::size_t>(ni) * hw + i] = raw[static_cast<std::size_t>(i)] * inv;
  }
  return out;
}

Tensor attention_distance(const Tensor& act, const std::vector<float>& target_maps) {
  require(act.shape().size() == 4, "attention_distance",
          "input must be [N,C,H,W], got " + shape_str(act.shape()));
  const int n = act.dim(0), c = act.dim(1), hw = act.dim(2) * act.dim(3);
  require(target_maps.size() == static_cast<std::size_t>(n) * hw, "attention_distance",
          "target map stack length mismatch");

  auto target = std::make_shared<std::vector<float>>(target_maps);
  std::vector<float> raw;
  double total = 0.0;
  for (int ni = 0; ni < n; ++ni) {
    double norm = 0.0;
    attention_raw(act.data().data() + static_cast<std::size_t>(ni) * c * hw, c, hw, raw, norm);
    const float inv = norm > kNormTiny ? static_cast<float>(1.0 / norm) : 0.0f;
    double d2 = 0.0;
    for (int i = 0; i < hw; ++i) {
      const double d = static_cast<double>(raw[static_cast<std::size_t>(i)]) * inv -
                       (*target)[static_cast<std::size_t>(ni) * hw + i];
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  total /= n;

  auto backward = [n, c, hw, target](TensorImpl& self) {
    Tensor a_in = self.inputs[0];
    if (!a_in.requires_grad()) return;
    const float g = self.grad[0] / static_cast<float>(n);
    const float* ad = a_in.data().data();
    float* ag = a_in.grad().data();
    std::vector<float> raw, m(static_cast<std::size_t>(hw)), gm(static_cast<std::size_t>(hw)),
        gs(static_cast<std::size_t>(hw));
    for (int ni = 0; ni < n; ++ni) {
      const float* a = ad + static_cast<std::size_t>(ni) * c * hw;
      double norm = 0.0;
      attention_raw(a, c, hw, raw, norm);
      if (norm <= kNormTiny) continue;  // zero map: zero gradient
      const double inv = 1.0 / norm;
      double d2 = 0.0;
      for (int i = 0; i < hw; ++i) {
        m[static_cast<std::size_t>(i)] = static_cast<float>(raw[static_cast<std::size_t>(i)] * inv);
        const double d = m[static_cast<std::size_t>(i)] -
                         (*target)[static_cast<std::size_t>(ni) * hw + i];
        d2 += d * d;
      }
      const double dist = std::sqrt(d2);
      if (dist <= kNormTiny) continue;
      // dL/dm = (m - t) / dist, then back through the L2 normalization.
      double mdotg = 0.0;
      for (int i = 0; i < hw; ++i) {
        gm[static_cast<std::size_t>(i)] = static_cast<float>(
            (m[static_cast<std::size_t>(i)] - (*target)[static_cast<std::size_t>(ni) * hw + i]) /
            dist);
        mdotg += static_cast<double>(m[static_cast<std::size_t>(i)]) * gm[static_cast<std::size_t>(i)];
      }
      for (int i = 0; i < hw; ++i)
        gs[static_cast<std::size_t>(i)] = static_cast<float>(
            (gm[static_cast<std::size_t>(i)] - m[static_cast<std::size_t>(i)] * mdotg) * inv);
      for (int ch = 0; ch < c; ++ch) {
        const float* plane = a + static_cast<std::size_t>(ch) * hw;
        float* gplane = ag + (static_cast<std::size_t>(ni) * c + ch) * hw;
        for (int i = 0; i < hw; ++i)
          gplane[i] += g * 2.0f * plane[i] * gs[static_cast<std::size_t>(i)];
      }
    }
  };

  Tensor out = make_node({1}, {static_cast<float>(total)}, "attention_distance", {&act},
                         std::move(backward));
  out.impl()->precise = total;
  return out;
}

double kl_divergence(const std::vector<float>& p, const std::vector<float>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0f) continue;
    s += static_cast<double>(p[i]) *
         (std::log(static_cast<double>(p[i])) -
          std::log(static_cast<double>(std::max(q[i], kLogClamp))));
  }
  return s;
}

// ---------------------------------------------------------------------------
// grad check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& params, double eps,
                           std::size_t max_coords_per_tensor, Rng rng) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
  for (const Tensor& p : params) {
    if (!p.requires_grad()) throw std::invalid_argument("grad_check: param without requires_grad");
    const_cast<Tensor&>(p).grad();
    const_cast<Tensor&>(p).zero_grad();
  }

  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
  loss.backward();

  std::vector<std::vector<float>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.grad());

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    std::vector<std::size_t> coords;
    if (p.size() <= max_coords_per_tensor) {
      coords.resize(p.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      coords = rng.derive(pi).sample_without_replacement(p.size(), max_coords_per_tensor);
    }
    for (std::size_t ci : coords) {
      float& slot = p.data()[ci];
      const float orig = slot;
      slot = orig + static_cast<float>(eps);
      const double step_up = static_cast<double>(slot) - orig;
      const double lp = loss_fn().item_precise();
      slot = orig - static_cast<float>(eps);
      const double step_down = static_cast<double>(orig) - slot;
      const double lm = loss_fn().item_precise();
      slot = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("grad_check: non-finite loss");
      const double h = step_up + step_down;  // realized step, not the nominal one
      if (h <= 0.0) throw std::runtime_error("grad_check: eps underflows this coordinate");
      const double numeric = (lp - lm) / h;
      const double a = static_cast<double>(analytic[pi][ci]);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace sanitlab
