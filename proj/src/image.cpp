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

#include "sanitlab/image.hpp"

#include <cstring>

namespace sanitlab {

void clamp_image(Image& img) {
  for (float& v : img.pixels) v = clamp01(v);
}

Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
  return out;
}

std::vector<float> to_chw_normalized(const Image& img, const Normalizer& norm) {
  const int hw = img.height * img.width;
  std::vector<float> out(static_cast<std::size_t>(hw) * 3);
  for (int ch = 0; ch < 3; ++ch) {
    const float mean = norm.mean[static_cast<std::size_t>(ch)];
    const float inv = 1.0f / norm.stdev[static_cast<std::size_t>(ch)];
    float* dst = out.data() + static_cast<std::size_t>(ch) * hw;
    const float* src = img.pixels.data() + ch;
    for (int i = 0; i < hw; ++i) dst[i] = (src[static_cast<std::size_t>(i) * 3] - mean) * inv;
  }
  return out;
}

std::uint64_t image_fingerprint(const Image& img, std::uint64_t h) {
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  std::uint32_t dims[2] = {static_cast<std::uint32_t>(img.height),
                           static_cast<std::uint32_t>(img.width)};
  mix_bytes(dims, sizeof(dims));
  mix_bytes(img.pixels.data(), img.pixels.size() * sizeof(float));
  return h;
}

}  // namespace sanitlab
