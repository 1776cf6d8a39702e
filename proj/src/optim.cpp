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

#include "sanitlab/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sanitlab {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0f)) throw std::invalid_argument("OptimizerConfig: learning_rate must be > 0");
  if (momentum < 0.0f || momentum >= 1.0f)
    throw std::invalid_argument("OptimizerConfig: momentum must be in [0,1)");
  if (weight_decay < 0.0f) throw std::invalid_argument("OptimizerConfig: weight_decay must be >= 0");
}

void sgd_update(std::span<float> weights, std::span<const float> grads, std::span<float> velocity,
                const OptimizerConfig& cfg, float lr, bool decay) {
  if (weights.size() != grads.size() || weights.size() != velocity.size())
    throw std::invalid_argument("sgd_update: buffer length mismatch");
  if (!(lr > 0.0f)) throw std::invalid_argument("sgd_update: lr must be > 0");
  const float wd = decay ? cfg.weight_decay : 0.0f;
  const float mom = cfg.momentum;
  if (cfg.nesterov) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const float g = grads[i] + wd * weights[i];
      velocity[i] = mom * velocity[i] + g;
      weights[i] -= lr * (g + mom * velocity[i]);
    }
  } else {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const float g = grads[i] + wd * weights[i];
      velocity[i] = mom * velocity[i] + g;
      weights[i] -= lr * velocity[i];
    }
  }
}

void sgd_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads, SgdState& state,
              const OptimizerConfig& cfg, float lr, const std::vector<bool>& decay_mask) {
  cfg.validate();
  if (weights.size() != grads.size())
    throw std::invalid_argument("sgd_step: weights/grads count mismatch");
  if (!decay_mask.empty() && decay_mask.size() != weights.size())
    throw std::invalid_argument("sgd_step: decay mask count mismatch");
  if (state.velocity.size() < weights.size()) state.velocity.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].shape() != grads[i].shape())
      throw std::invalid_argument("sgd_step: shape mismatch at tensor " + std::to_string(i) + ": " +
                                  shape_str(weights[i].shape()) + " vs " +
                                  shape_str(grads[i].shape()));
    if (state.velocity[i].size() != weights[i].size())
      state.velocity[i].assign(weights[i].size(), 0.0f);
    sgd_update(weights[i].data(), grads[i].data(), state.velocity[i], cfg, lr,
               decay_mask.empty() ? true : static_cast<bool>(decay_mask[i]));
  }
}

// ---------------------------------------------------------------------------
// schedules
// ---------------------------------------------------------------------------

LRSchedule LRSchedule::piecewise_warm(float base_lr, int total_epochs) {
  LRSchedule s;
  s.kind = ScheduleKind::piecewise_warm;
  s.base_lr = base_lr;
  s.total_epochs = total_epochs;
  s.validate();
  return s;
}

LRSchedule LRSchedule::cosine(float lr_max, float lr_min, int total_epochs) {
  LRSchedule s;
  s.kind = ScheduleKind::cosine_anneal;
  s.base_lr = lr_max;
  s.lr_min = lr_min;
  s.total_epochs = total_epochs;
  s.validate();
  return s;
}

LRSchedule LRSchedule::steps(float base_lr, float factor, int every_k, int total_epochs) {
  LRSchedule s;
  s.kind = ScheduleKind::step_decay;
  s.base_lr = base_lr;
  s.decay_factor = factor;
  s.every_k_epochs = every_k;
  s.total_epochs = total_epochs;
  s.validate();
  return s;
}

LRSchedule LRSchedule::epochs(std::vector<std::pair<int, float>> table, int total_epochs) {
  LRSchedule s;
  s.kind = ScheduleKind::epoch_table;
  s.table = std::move(table);
  s.total_epochs = total_epochs;
  s.base_lr = s.table.empty() ? 0.0f : s.table.front().second;
  s.validate();
  return s;
}

void LRSchedule::validate() const {
  if (total_epochs <= 0) throw std::invalid_argument("LRSchedule: total_epochs must be > 0");
  switch (kind) {
    case ScheduleKind::piecewise_warm:
      if (!(base_lr > 0.0f)) throw std::invalid_argument("LRSchedule: base_lr must be > 0");
      break;
    case ScheduleKind::cosine_anneal:
      if (!(base_lr > 0.0f) || !(lr_min > 0.0f) || lr_min > base_lr)
        throw std::invalid_argument("LRSchedule: cosine needs 0 < lr_min <= lr_max");
      break;
    case ScheduleKind::step_decay:
      if (!(base_lr > 0.0f) || !(decay_factor > 0.0f) || every_k_epochs <= 0)
        throw std::invalid_argument("LRSchedule: step decay needs positive base, factor, period");
      break;
    case ScheduleKind::epoch_table: {
      if (table.empty() || table.front().first != 0)
        throw std::invalid_argument("LRSchedule: epoch table must start at epoch 0");
      int prev = -1;
      for (const auto& [e, lr] : table) {
        if (e <= prev) throw std::invalid_argument("LRSchedule: epoch table not strictly ascending");
        if (!(lr > 0.0f)) throw std::invalid_argument("LRSchedule: epoch table lr must be > 0");
        prev = e;
      }
      break;
    }
  }
}

float lr_at(const LRSchedule& s, int epoch) {
  s.validate();
  const bool cosine = s.kind == ScheduleKind::cosine_anneal;
  if (epoch < 0 || epoch > s.total_epochs || (!cosine && epoch == s.total_epochs))
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " out of range [0," +
                                std::to_string(s.total_epochs) + ")");
  switch (s.kind) {
    case ScheduleKind::piecewise_warm: {
      const double frac = static_cast<double>(epoch) / s.total_epochs;
      double lambda;
      if (frac <= 0.25)
        lambda = 1.0;
      else if (frac <= 0.9)
        lambda = 1.0 - ((frac - 0.25) / 0.65) * 0.99;
      else
        lambda = 0.01;
      return static_cast<float>(s.base_lr * lambda);
    }
    case ScheduleKind::cosine_anneal: {
      if (epoch == s.total_epochs) return s.lr_min;
      const double frac = static_cast<double>(epoch) / s.total_epochs;
      return static_cast<float>(s.lr_min +
                                0.5 * (static_cast<double>(s.base_lr) - s.lr_min) *
                                    (1.0 + std::cos(3.14159265358979323846 * frac)));
    }
    case ScheduleKind::step_decay:
      return s.base_lr * std::pow(s.decay_factor, static_cast<float>(epoch / s.every_k_epochs));
    case ScheduleKind::epoch_table: {
      float lr = s.table.front().second;
      for (const auto& [e, v] : s.table) {
        if (e > epoch) break;
        lr = v;
      }
      return lr;
    }
  }
  throw std::logic_error("lr_at: unreachable");
}

}  // namespace sanitlab
