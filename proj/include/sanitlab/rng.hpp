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
#include <string_view>
#include <vector>

namespace sanitlab {

/// Counter-based random stream: output i is a pure function of (key, i).
///
/// Streams are derived, never shared. Every consumer (init, shuffling,
/// augmentation, cell dispatch) calls derive() with a purpose tag, so the
/// numbers a consumer sees depend only on (master seed, tag chain) and not
/// on what any other consumer drew. This is what makes sweeps reproducible
/// at any --jobs count. Results are identical across platforms: no libc or
/// libstdc++ distribution is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  /// Child stream keyed by (this stream's key, tag). Does not consume state.
  Rng derive(std::string_view tag) const;
  Rng derive(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

  /// Uniform in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [0,1) with 24 random bits.
  float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

  float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

  /// Standard normal via Box-Muller; second draw is cached.
  float normal();

  float normal(float mean, float stddev) { return mean + stddev * normal(); }

  bool coin() { return (next_u64() & 1u) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices drawn from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t hash_tag(std::string_view tag);

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace sanitlab
