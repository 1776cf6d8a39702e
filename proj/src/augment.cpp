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

#include "sanitlab/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace sanitlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::vector<AugOp>& all_ops() {
  static const std::vector<AugOp> ops = {
      AugOp::rotate,    AugOp::translate, AugOp::shear,
      AugOp::brightness, AugOp::contrast,  AugOp::color_jitter,
      AugOp::posterize, AugOp::solarize,  AugOp::horizontal_flip};
  return ops;
}

float bilinear(const Image& img, float y, float x, int ch) {
  // clamp-to-edge sampling
  const float xm = static_cast<float>(img.width - 1);
  const float ym = static_cast<float>(img.height - 1);
  x = x < 0.0f ? 0.0f : (x > xm ? xm : x);
  y = y < 0.0f ? 0.0f : (y > ym ? ym : y);
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = x0 < img.width - 1 ? x0 + 1 : x0;
  const int y1 = y0 < img.height - 1 ? y0 + 1 : y0;
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = img.at(y0, x0, ch) * (1.0f - fx) + img.at(y0, x1, ch) * fx;
  const float bot = img.at(y1, x0, ch) * (1.0f - fx) + img.at(y1, x1, ch) * fx;
  return top * (1.0f - fy) + bot * fy;
}

/// output(r,c) samples input at the inverse-mapped position
///   src = M * (c - cx, r - cy) + (cx + tx, cy + ty)
Image affine(const Image& img, float m00, float m01, float m10, float m11, float tx, float ty) {
  Image out(img.height, img.width);
  const float cx = static_cast<float>(img.width - 1) / 2.0f;
  const float cy = static_cast<float>(img.height - 1) / 2.0f;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const float dx = static_cast<float>(c) - cx;
      const float dy = static_cast<float>(r) - cy;
      const float sx = m00 * dx + m01 * dy + cx + tx;
      const float sy = m10 * dx + m11 * dy + cy + ty;
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = bilinear(img, sy, sx, ch);
    }
  return out;
}

float signed_mag(float magnitude, float scale, Rng& rng) {
  return (rng.coin() ? 1.0f : -1.0f) * magnitude * scale;
}

Image apply_one(const Image& img, AugOp op, float magnitude, Rng& rng) {
  switch (op) {
    case AugOp::rotate: {
      const float theta = signed_mag(magnitude, static_cast<float>(kPi) / 6.0f, rng);  // up to 30 deg
      const float c = std::cos(theta), s = std::sin(theta);
      // inverse rotation
      return affine(img, c, s, -s, c, 0.0f, 0.0f);
    }
    case AugOp::translate: {
      const float span = 0.25f * static_cast<float>(img.width);
      const float dx = magnitude * span * rng.uniform(-1.0f, 1.0f);
      const float dy = magnitude * span * rng.uniform(-1.0f, 1.0f);
      return affine(img, 1.0f, 0.0f, 0.0f, 1.0f, -dx, -dy);
    }
    case AugOp::shear: {
      const float k = signed_mag(magnitude, 0.3f, rng);
      if (rng.coin()) return affine(img, 1.0f, -k, 0.0f, 1.0f, 0.0f, 0.0f);
      return affine(img, 1.0f, 0.0f, -k, 1.0f, 0.0f, 0.0f);
    }
    case AugOp::brightness: {
      const float delta = signed_mag(magnitude, 0.4f, rng);
      Image out = img;
      for (float& v : out.pixels) v = clamp01(v + delta);
      return out;
    }
    case AugOp::contrast: {
      const float factor = 1.0f + signed_mag(magnitude, 0.6f, rng);
      Image out = img;
      for (float& v : out.pixels) v = clamp01((v - 0.5f) * factor + 0.5f);
      return out;
    }
    case AugOp::color_jitter: {
      float gain[3];
      for (int ch = 0; ch < 3; ++ch) gain[ch] = 1.0f + signed_mag(magnitude, 0.4f, rng);
      Image out = img;
      for (std::size_t i = 0; i < out.pixels.size(); i += 3)
        for (int ch = 0; ch < 3; ++ch)
          out.pixels[i + static_cast<std::size_t>(ch)] =
              clamp01(out.pixels[i + static_cast<std::size_t>(ch)] * gain[ch]);
      return out;
    }
    case AugOp::posterize: {
      const int levels = std::max(2, static_cast<int>(std::lround(8.0f - magnitude * 6.0f)));
      const float steps = static_cast<float>(levels - 1);
      Image out = img;
      for (float& v : out.pixels) v = std::round(v * steps) / steps;
      return out;
    }
    case AugOp::solarize: {
      const float threshold = 1.0f - magnitude * 0.7f;
      Image out = img;
      for (float& v : out.pixels)
        if (v > threshold) v = 1.0f - v;
      return out;
    }
    case AugOp::horizontal_flip:
      return hflip(img);
  }
  throw std::logic_error("apply_one: unreachable");
}

}  // namespace

AugOp aug_op_from_name(const std::string& name) {
  for (AugOp op : all_ops())
    if (aug_op_name(op) == name) return op;
  throw std::invalid_argument("unknown augment op: " + name);
}

std::string aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::rotate: return "rotate";
    case AugOp::translate: return "translate";
    case AugOp::shear: return "shear";
    case AugOp::brightness: return "brightness";
    case AugOp::contrast: return "contrast";
    case AugOp::color_jitter: return "color-jitter";
    case AugOp::posterize: return "posterize";
    case AugOp::solarize: return "solarize";
    case AugOp::horizontal_flip: return "horizontal-flip";
  }
  throw std::logic_error("aug_op_name: unreachable");
}

void AugmentPolicy::validate() const {
  if (n_ops <= 0) throw std::invalid_argument("AugmentPolicy: n_ops must be > 0");
  if (magnitude < 0.0f || magnitude > 1.0f)
    throw std::invalid_argument("AugmentPolicy: magnitude must be in [0,1]");
}

const std::vector<AugOp>& AugmentPolicy::effective_ops() const {
  return op_list.empty() ? all_ops() : op_list;
}

Image rand_augment(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  const auto& ops = policy.effective_ops();
  Image out = img;
  for (int i = 0; i < policy.n_ops; ++i) {
    const AugOp op = ops[static_cast<std::size_t>(rng.next_below(ops.size()))];
    out = apply_one(out, op, policy.magnitude, rng);
  }
  clamp_image(out);
  return out;
}

// ---------------------------------------------------------------------------
// CutMix
// ---------------------------------------------------------------------------

SoftExample cutmix_pair(const LabeledExample& base, const LabeledExample& partner,
                        float lambda_box, float cx01, float cy01, int num_classes) {
  if (lambda_box < 0.0f || lambda_box > 1.0f)
    throw std::invalid_argument("cutmix_pair: lambda_box must be in [0,1]");
  const int h = base.image.height, w = base.image.width;
  SoftExample out;
  out.image = base.image;

  const float ratio = std::sqrt(1.0f - lambda_box);
  const float rw = ratio * static_cast<float>(w);
  const float rh = ratio * static_cast<float>(h);
  const float cx = cx01 * static_cast<float>(w);
  const float cy = cy01 * static_cast<float>(h);
  const int x0 = std::max(0, static_cast<int>(std::lround(cx - rw / 2.0f)));
  const int x1 = std::min(w, static_cast<int>(std::lround(cx + rw / 2.0f)));
  const int y0 = std::max(0, static_cast<int>(std::lround(cy - rh / 2.0f)));
  const int y1 = std::min(h, static_cast<int>(std::lround(cy + rh / 2.0f)));

  long cut_area = 0;
  if (x1 > x0 && y1 > y0) {
    cut_area = static_cast<long>(x1 - x0) * (y1 - y0);
    for (int r = y0; r < y1; ++r)
      for (int c = x0; c < x1; ++c)
        for (int ch = 0; ch < 3; ++ch) out.image.at(r, c, ch) = partner.image.at(r, c, ch);
  }
  const float lambda_adj =
      1.0f - static_cast<float>(cut_area) / static_cast<float>(static_cast<long>(h) * w);

  out.soft_label.assign(static_cast<std::size_t>(num_classes), 0.0f);
  out.soft_label[static_cast<std::size_t>(base.label)] += lambda_adj;
  out.soft_label[static_cast<std::size_t>(partner.label)] += 1.0f - lambda_adj;
  return out;
}

std::vector<std::vector<SoftExample>> cutmix(const std::vector<LabeledExample>& batch, int m,
                                             int num_classes, Rng& rng) {
  if (batch.size() < 2) throw std::invalid_argument("cutmix: batch must have at least 2 examples");
  if (m <= 0) throw std::invalid_argument("cutmix: m must be positive");
  std::vector<std::vector<SoftExample>> variants(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    auto& variant = variants[static_cast<std::size_t>(v)];
    variant.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      // Beta(1,1) mixing ratio
      const float lambda_box = rng.next_float();
      std::size_t j = static_cast<std::size_t>(rng.next_below(batch.size() - 1));
      if (j >= i) ++j;
      const float cx01 = rng.next_float();
      const float cy01 = rng.next_float();
      variant.push_back(cutmix_pair(batch[i], batch[j], lambda_box, cx01, cy01, num_classes));
    }
  }
  return variants;
}

// ---------------------------------------------------------------------------

Image maybe_flip(const Image& img, Rng& rng) {
  return rng.next_float() < 0.5f ? hflip(img) : img;
}

std::vector<float> train_pipeline(const Image& img, const Normalizer& norm, Rng& rng) {
  return to_chw_normalized(maybe_flip(img, rng), norm);
}

}  // namespace sanitlab
