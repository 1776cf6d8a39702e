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

#include "sanitlab/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sanitlab {

TriggerSpec TriggerSpec::reverse_lambda() {
  TriggerSpec spec;
  spec.kind = TriggerKind::patch;
  spec.mask = {{0, 4}, {1, 3}, {2, 2}, {3, 1}, {4, 0}, {3, 3}, {4, 4}};
  spec.anchor = {0, 0};
  spec.color = {1.0f, 1.0f, 1.0f};
  return spec;
}

TriggerSpec TriggerSpec::gotham() {
  TriggerSpec spec;
  spec.kind = TriggerKind::filter;
  spec.mix = {{{0.70f, 0.20f, 0.10f}, {0.10f, 0.70f, 0.20f}, {0.05f, 0.15f, 0.95f}}};
  spec.contrast_gain = 1.3f;
  spec.contrast_pivot = 0.5f;
  return spec;
}

void TriggerSpec::validate(int height, int width) const {
  if (kind == TriggerKind::patch) {
    if (mask.empty()) throw std::invalid_argument("TriggerSpec: patch mask is empty");
    for (const auto& [dr, dc] : mask) {
      const int r = anchor.first + dr;
      const int c = anchor.second + dc;
      if (r < 0 || r >= height || c < 0 || c >= width)
        throw std::invalid_argument("TriggerSpec: mask offset (" + std::to_string(dr) + "," +
                                    std::to_string(dc) + ") falls outside a " +
                                    std::to_string(height) + "x" + std::to_string(width) +
                                    " image");
    }
  }
}

Image apply_trigger(const Image& img, const TriggerSpec& spec) {
  spec.validate(img.height, img.width);
  Image out = img;
  if (spec.kind == TriggerKind::patch) {
    for (const auto& [dr, dc] : spec.mask)
      for (int ch = 0; ch < 3; ++ch)
        out.at(spec.anchor.first + dr, spec.anchor.second + dc, ch) =
            spec.color[static_cast<std::size_t>(ch)];
    return out;
  }
  const float g = spec.contrast_gain;
  const float pivot = spec.contrast_pivot;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    float rgb[3];
    for (int ch = 0; ch < 3; ++ch) {
      const auto& row = spec.mix[static_cast<std::size_t>(ch)];
      rgb[ch] = row[0] * out.pixels[i] + row[1] * out.pixels[i + 1] + row[2] * out.pixels[i + 2];
    }
    for (int ch = 0; ch < 3; ++ch) out.pixels[i + static_cast<std::size_t>(ch)] =
        clamp01(pivot + g * (rgb[ch] - pivot));
  }
  return out;
}

void PoisonPolicy::validate() const {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("PoisonPolicy: fraction must be in (0,1]");
  if (scope == PoisonScope::single_class && source_class < 0)
    throw std::invalid_argument("PoisonPolicy: bad source class");
}

PoisonResult poison_split(const Dataset& split, const TriggerSpec& trigger,
                          const PoisonPolicy& policy, Rng rng) {
  policy.validate();
  PoisonResult result;
  result.split = split;
  const int c = split.num_classes;

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (policy.scope == PoisonScope::all_classes ||
        split.examples[i].original_label == policy.source_class)
      eligible.push_back(i);
  }
  if (eligible.empty())
    throw std::invalid_argument("poison_split: no eligible examples (empty source class " +
                                std::to_string(policy.source_class) + ")");

  const std::size_t k = static_cast<std::size_t>(
      std::llround(policy.fraction * static_cast<double>(eligible.size())));
  Rng pick = rng.derive("poison-pick");
  auto picks = pick.sample_without_replacement(eligible.size(), k);
  result.poisoned_indices.reserve(k);
  for (auto p : picks) result.poisoned_indices.push_back(eligible[p]);
  std::sort(result.poisoned_indices.begin(), result.poisoned_indices.end());

  for (auto idx : result.poisoned_indices) {
    auto& ex = result.split.examples[idx];
    ex.image = apply_trigger(ex.image, trigger);
    ex.original_label = ex.label;
    ex.label = (ex.label + 1) % c;
    ex.poisoned = true;
  }
  return result;
}

}  // namespace sanitlab
