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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sanitlab/dataset.hpp"

namespace sanitlab {

enum class TriggerKind { patch, filter };

/// Either a localized pixel patch (point trigger) or a global color
/// transform (filter trigger).
struct TriggerSpec {
  TriggerKind kind = TriggerKind::patch;

  // patch: anchored offsets painted with a fixed color
  std::vector<std::pair<int, int>> mask;  // (row, col) offsets
  std::pair<int, int> anchor{0, 0};
  std::array<float, 3> color{1.0f, 1.0f, 1.0f};

  // filter: pixel' = clamp(pivot + gain * (mix * pixel - pivot))
  std::array<std::array<float, 3>, 3> mix{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  float contrast_gain = 1.0f;
  float contrast_pivot = 0.5f;

  /// Seven-offset arrow glyph at the upper-left corner, painted white.
  static TriggerSpec reverse_lambda();
  /// Warm-shifted global color mix with raised contrast.
  static TriggerSpec gotham();

  void validate(int height, int width) const;
  std::string name() const { return kind == TriggerKind::patch ? "patch" : "filter"; }
};

Image apply_trigger(const Image& img, const TriggerSpec& spec);

enum class PoisonScope { all_classes, single_class };

inline std::string scope_name(PoisonScope s) {
  return s == PoisonScope::all_classes ? "all" : "single";
}

struct PoisonPolicy {
  double fraction = 0.2;  // in (0,1], relative to eligible examples
  PoisonScope scope = PoisonScope::all_classes;
  int source_class = 4;  // used by single_class scope

  void validate() const;
};

struct PoisonResult {
  Dataset split;
  std::vector<std::size_t> poisoned_indices;
};

/// Selects round(fraction * |eligible|) eligible examples uniformly without
/// replacement, triggers them, and relabels to (label + 1) mod C. The
/// fraction is relative to the eligible set (the source class under
/// single_class scope).
PoisonResult poison_split(const Dataset& split, const TriggerSpec& trigger,
                          const PoisonPolicy& policy, Rng rng);

}  // namespace sanitlab
