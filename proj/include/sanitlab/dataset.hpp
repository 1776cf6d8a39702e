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

#include "sanitlab/image.hpp"
#include "sanitlab/rng.hpp"

namespace sanitlab {

struct LabeledExample {
  Image image;
  int label = 0;
  bool poisoned = false;
  int original_label = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  int num_classes = 10;

  std::size_t size() const { return examples.size(); }
  int height() const { return examples.empty() ? 0 : examples.front().image.height; }
  int width() const { return examples.empty() ? 0 : examples.front().image.width; }
};

struct GlyphSplits {
  Dataset train;
  Dataset test;
};

/// Ten procedurally rendered shape classes: disk, ring, cross, horizontal /
/// vertical / diagonal / anti-diagonal bars, triangle, checker, gradient.
/// Position jitter, scale, colors, and pixel noise are randomized;
/// class-balanced and bit-deterministic per seed.
GlyphSplits gen_glyphs(std::uint64_t seed, int n_per_class, int size,
                       int test_per_class = -1 /* defaults to n_per_class / 5 */);

/// Names for the ten classes, index-aligned with labels.
const std::vector<std::string>& glyph_class_names();

enum class PoolKind { in_domain, out_of_domain };

/// Unlabeled image pool. in_domain draws from the glyph renderer on a
/// disjoint stream; out_of_domain draws from texture families (sinusoid
/// fields, blurred noise, random rectangles, plaids) with no class
/// structure.
std::vector<Image> gen_pool(PoolKind kind, std::uint64_t seed, int n, int size);

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3072 pixel
/// bytes in R/G/B planes, 32x32 row-major. Pixels scaled to [0,1].
Dataset load_cifar_binary(const std::string& path);

// Native dataset file ("SNDT"): header {magic, version u32, count u32,
// H u16, W u16, C u8}, then per record {label u8, poisoned u8,
// original_label u8, pixels f32 little-endian}.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_pool(const std::vector<Image>& pool, int size, const std::string& path);
std::vector<Image> load_pool(const std::string& path);

/// Class-stratified sample: round(fraction * class_count) per class.
std::vector<std::size_t> stratified_sample(const Dataset& ds, double fraction, Rng rng);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

/// Per-channel mean/std over a dataset (double accumulation).
Normalizer compute_normalizer(const Dataset& ds);

/// Content hash covering labels, flags, and pixel bits.
std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace sanitlab
