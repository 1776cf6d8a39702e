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
#include <cstdint>
#include <vector>

namespace sanitlab {

/// RGB image, HWC row-major, pixel values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // height * width * 3

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.0f) {}

  float& at(int r, int c, int ch) {
    return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
  float at(int r, int c, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
  std::size_t size() const { return pixels.size(); }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void clamp_image(Image& img);

/// Mirror around the vertical axis.
Image hflip(const Image& img);

/// Per-channel mean/std computed over a dataset once, used by every
/// normalization in that experiment.
struct Normalizer {
  std::array<float, 3> mean{0.5f, 0.5f, 0.5f};
  std::array<float, 3> stdev{0.25f, 0.25f, 0.25f};
};

/// (pixel - mean) / std, emitted CHW for model input.
std::vector<float> to_chw_normalized(const Image& img, const Normalizer& norm);

/// 64-bit FNV-1a over the raw pixel bits.
std::uint64_t image_fingerprint(const Image& img, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace sanitlab
