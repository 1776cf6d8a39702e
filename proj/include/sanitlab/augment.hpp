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

#include <string>
#include <vector>

#include "sanitlab/dataset.hpp"

namespace sanitlab {

enum class AugOp {
  rotate,
  translate,
  shear,
  brightness,
  contrast,
  color_jitter,
  posterize,
  solarize,
  horizontal_flip,
};

AugOp aug_op_from_name(const std::string& name);
std::string aug_op_name(AugOp op);

/// Random-augmentation policy. Each application samples exactly n_ops ops
/// uniformly with replacement from op_list.
///
/// Magnitude table (m in [0,1], signs drawn per application):
///   rotate        +- m * 30 degrees
///   translate     +- m * 0.25 * size per axis
///   shear         +- m * 0.3
///   brightness    +- m * 0.4
///   contrast      1 +- m * 0.6 around pivot 0.5
///   color_jitter  per-channel scale 1 +- m * 0.4
///   posterize     round(8 - m * 6) levels per channel, min 2
///   solarize      invert pixels above 1 - m * 0.7
///   horizontal_flip  (no magnitude)
struct AugmentPolicy {
  int n_ops = 2;
  float magnitude = 0.5f;
  std::vector<AugOp> op_list;  // empty = all ops

  void validate() const;
  const std::vector<AugOp>& effective_ops() const;
};

Image rand_augment(const Image& img, const AugmentPolicy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// CutMix
// ---------------------------------------------------------------------------

struct SoftExample {
  Image image;
  std::vector<float> soft_label;  // length num_classes, sums to 1
};

/// Pastes the partner's rectangle into a copy of the base image. The box has
/// area (1 - lambda_box) * H * W with the image's aspect ratio, centered at
/// (cx01 * W, cy01 * H) and clipped to bounds. The soft label weights equal
/// the realized pixel-area fractions of each source.
SoftExample cutmix_pair(const LabeledExample& base, const LabeledExample& partner,
                        float lambda_box, float cx01, float cy01, int num_classes);

/// m mixed variants of the batch: per variant and example, lambda_box ~
/// Beta(1,1), partner drawn uniformly among the other examples.
std::vector<std::vector<SoftExample>> cutmix(const std::vector<LabeledExample>& batch, int m,
                                             int num_classes, Rng& rng);

// ---------------------------------------------------------------------------
// Train-time pipeline: random horizontal flip then normalization. No random
// crop; it interferes with corner-anchored patch triggers.
// ---------------------------------------------------------------------------

Image maybe_flip(const Image& img, Rng& rng);  // p = 0.5

std::vector<float> train_pipeline(const Image& img, const Normalizer& norm, Rng& rng);

}  // namespace sanitlab
