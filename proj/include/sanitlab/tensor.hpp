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

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sanitlab/rng.hpp"

namespace sanitlab {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Batchnorm behavior per forward pass.
///  train:     normalize with batch statistics, report updated running stats
///  eval:      normalize with running statistics
///  calibrate: normalize with batch statistics while accumulating exact
///             dataset moments into a StatAccumulator (used to rebuild
///             running stats after weight-space surgery)
enum class Mode { train, eval, calibrate };

struct TensorImpl;

/// Dense float32 tensor with an optional recorded autodiff graph.
///
/// Value semantics are shared-buffer (copying a Tensor aliases storage),
/// which is what lets ops capture inputs for the backward pass without
/// copying. Gradients are float32 like the data; reductions accumulate in
/// double internally.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  int dim(int i) const;

  std::vector<float>& data();
  const std::vector<float>& data() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);

  /// Gradient buffer, allocated (zeroed) on first access.
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  bool has_grad() const;
  void zero_grad();

  float item() const;  // scalar tensors only

  /// Exact value of reduction outputs, carried in double where the op
  /// computed one (losses). Falls back to item().
  double item_precise() const;

  /// Reverse-mode sweep from this scalar. Accumulates into .grad() of every
  /// reachable tensor that requires grad. Throws on non-finite gradients.
  void backward() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend struct OpCtx;
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until touched
  bool requires_grad = false;
  // Graph bookkeeping (empty for leaves / no-grad forwards).
  std::string op;
  std::vector<Tensor> inputs;
  std::function<void(TensorImpl&)> backward_fn;
  // Double-precision value for scalar reduction outputs; NaN when unset.
  double precise = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Forward ops. Each op validates shapes (throwing std::invalid_argument that
// names the op and both shapes), checks outputs for NaN/Inf, and records a
// graph node when any input requires grad.
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);          // elementwise, same shape
Tensor scale(const Tensor& x, float k);                // k * x
Tensor reshape(const Tensor& x, Shape target);         // same numel

/// x:[N,F] w:[O,F] b:[O] (or undefined) -> [N,O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// x:[N,C,H,W] w:[O,C,K,K] b:[O] (or undefined); zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1, int pad = 0);

/// 2x2 window, stride 2, floor on odd extents.
Tensor maxpool2x2(const Tensor& x);

/// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);

/// Accumulates exact per-channel moments across calibrate-mode forwards.
struct StatAccumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  double count = 0.0;  // elements per channel
  void init(int channels);
  void mean_var(std::vector<float>& mean_out, std::vector<float>& var_out) const;  // unbiased var
};

struct BatchNormOut {
  Tensor y;
  // Updated running stats for the caller to commit after the step (train
  // mode only). Keeping the commit explicit keeps forward passes pure,
  // which grad checks rely on.
  std::vector<float> new_running_mean;
  std::vector<float> new_running_var;
};

/// x:[N,C,H,W], gamma/beta:[C]. Batch var is biased for normalization,
/// unbiased in the running update.
BatchNormOut batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         const std::vector<float>& running_mean,
                         const std::vector<float>& running_var, Mode mode,
                         float momentum = 0.1f, float eps = 1e-5f,
                         StatAccumulator* calib = nullptr);

/// Rows of the last dimension; [C] or [N,C]. Strictly positive output.
Tensor softmax(const Tensor& x);

/// -sum(target * log(max(pred, 1e-12))) over two probability vectors.
/// Validates lengths, non-negativity, and normalization within 1e-5.
Tensor cross_entropy(const Tensor& pred_dist, const Tensor& target_dist);

/// Row-wise cross entropy, mean over rows. pred/target: [N,C]. The target
/// may be a plain constant tensor (soft labels, frozen teacher output);
/// gradient flows into it only if it requires grad.
Tensor cross_entropy_mean(const Tensor& pred, const Tensor& target);

/// Squared-sum spatial attention with per-example L2 normalization:
/// act:[N,C,H,W] -> per example map(h,w) = sum_c act^2, flattened and scaled
/// to unit L2 norm (all-zero maps stay zero). Plain data, no graph.
std::vector<float> attention_map(const Tensor& act);  // size N*H*W

/// mean over examples of || map(act) - target ||_2, differentiable through
/// act. target is the flattened normalized map stack from attention_map().
Tensor attention_distance(const Tensor& act, const std::vector<float>& target_maps);

/// KL(p || q) over two probability vectors. Diagnostic only.
double kl_divergence(const std::vector<float>& p, const std::vector<float>& q);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

/// Central finite differences against the recorded backward pass.
/// loss_fn must be deterministic and rebuild its graph from the live param
/// tensors on every call. Coordinates are sampled per tensor when a tensor
/// has more than max_coords_per_tensor entries. Relative error follows
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& params, double eps,
                           std::size_t max_coords_per_tensor, Rng rng);

}  // namespace sanitlab
