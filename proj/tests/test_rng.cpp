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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sanitlab/rng.hpp"

using sanitlab::Rng;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are independent of parent consumption") {
  Rng a(7);
  Rng child_before = a.derive("shuffle");
  a.next_u64();
  a.next_u64();
  Rng child_after = a.derive("shuffle");
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("different tags give different streams") {
  Rng a(7);
  CHECK(a.derive("init").next_u64() != a.derive("augment").next_u64());
  CHECK(a.derive(std::uint64_t{0}).next_u64() != a.derive(std::uint64_t{1}).next_u64());
}

TEST_CASE("uniform draws stay in range") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    double d = rng.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    int k = rng.uniform_int(-3, 5);
    CHECK(k >= -3);
    CHECK(k <= 5);
    CHECK(rng.next_below(1) == 0);
  }
}

TEST_CASE("normal draws are finite and roughly centered") {
  Rng rng(99);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    float v = rng.normal();
    REQUIRE(std::isfinite(v));
    sum += v;
    sum_sq += static_cast<double>(v) * v;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  Rng(5).shuffle(v);
  Rng(5).shuffle(w);
  CHECK(v == w);
  std::sort(w.begin(), w.end());
  for (int i = 0; i < 50; ++i) CHECK(w[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
  Rng rng(11);
  auto s = rng.sample_without_replacement(100, 30);
  CHECK(s.size() == 30);
  std::set<std::size_t> uniq(s.begin(), s.end());
  CHECK(uniq.size() == 30);
  for (auto i : uniq) CHECK(i < 100);
  CHECK_THROWS(rng.sample_without_replacement(5, 6));
}
