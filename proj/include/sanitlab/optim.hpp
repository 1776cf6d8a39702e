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

#include <cstdint>
#include <span>
#include <vector>

#include "sanitlab/tensor.hpp"

namespace sanitlab {

struct OptimizerConfig {
  float learning_rate = 0.01f;  // > 0
  float momentum = 0.0f;        // in [0,1)
  bool nesterov = false;
  float weight_decay = 0.0f;  // >= 0

  void validate() const;
};

/// One SGD update on a contiguous span:
///   g <- grad + weight_decay * w          (when decay is on)
///   v <- momentum * v + g
///   w <- w - lr * (g + momentum * v)      (nesterov)
///   w <- w - lr * v                       (otherwise)
void sgd_update(std::span<float> weights, std::span<const float> grads,
                std::span<float> velocity, const OptimizerConfig& cfg, float lr, bool decay);

struct SgdState {
  // One velocity buffer per weight tensor, allocated lazily.
  std::vector<std::vector<float>> velocity;
};

/// Tensor-list form. decay_mask selects which tensors receive weight decay;
/// empty means all.
void sgd_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads, SgdState& state,
              const OptimizerConfig& cfg, float lr, const std::vector<bool>& decay_mask = {});

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { piecewise_warm, cosine_anneal, step_decay, epoch_table };

struct LRSchedule {
  ScheduleKind kind = ScheduleKind::piecewise_warm;
  float base_lr = 0.0025f;
  int total_epochs = 300;

  // cosine_anneal
  float lr_min = 1.2e-4f;
  // step_decay
  float decay_factor = 0.1f;
  int every_k_epochs = 2;
  // epoch_table: (first epoch, lr), sorted, first entry at epoch 0
  std::vector<std::pair<int, float>> table;

  static LRSchedule piecewise_warm(float base_lr, int total_epochs);
  static LRSchedule cosine(float lr_max, float lr_min, int total_epochs);
  static LRSchedule steps(float base_lr, float factor, int every_k, int total_epochs);
  static LRSchedule epochs(std::vector<std::pair<int, float>> table, int total_epochs);

  void validate() const;
};

/// Learning rate for an epoch. piecewise_warm follows
///   lambda = 1                                       e/total <= 0.25
///   lambda = 1 - ((e/total - 0.25)/0.65) * 0.99      0.25 <= e/total <= 0.9
///   lambda = 0.01                                    e/total > 0.9
/// cosine_anneal follows lr_min + (lr_max-lr_min)/2 * (1 + cos(pi*e/total)).
/// Epoch range is [0, total_epochs); cosine additionally admits the boundary
/// epoch == total_epochs, where it returns exactly lr_min.
float lr_at(const LRSchedule& schedule, int epoch);

}  // namespace sanitlab
