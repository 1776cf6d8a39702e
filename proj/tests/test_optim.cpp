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

#include "sanitlab/optim.hpp"
#include "sanitlab/rng.hpp"

using namespace sanitlab;

namespace {

Tensor scalar_weight(float v) { return Tensor::from({1}, {v}); }

}  // namespace

TEST_CASE("plain gradient step") {
  std::vector<Tensor> w = {scalar_weight(1.0f)};
  std::vector<Tensor> g = {scalar_weight(0.1f)};
  SgdState state;
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1f;
  sgd_step(w, g, state, cfg, 0.1f);
  CHECK(w[0].data()[0] == doctest::Approx(0.99));
}

TEST_CASE("weight decay folds into the gradient") {
  std::vector<Tensor> w = {scalar_weight(1.0f)};
  std::vector<Tensor> g = {scalar_weight(0.1f)};
  SgdState state;
  OptimizerConfig cfg;
  cfg.weight_decay = 0.1f;
  sgd_step(w, g, state, cfg, 0.1f);
  // effective gradient 0.1 + 0.1*1.0 = 0.2
  CHECK(w[0].data()[0] == doctest::Approx(0.98));
}

TEST_CASE("two momentum steps follow the hand recursion") {
  std::vector<Tensor> w = {scalar_weight(1.0f)};
  std::vector<Tensor> g = {scalar_weight(0.1f)};
  SgdState state;
  OptimizerConfig cfg;
  cfg.momentum = 0.9f;
  sgd_step(w, g, state, cfg, 0.1f);
  CHECK(state.velocity[0][0] == doctest::Approx(0.1));
  CHECK(w[0].data()[0] == doctest::Approx(0.99));
  sgd_step(w, g, state, cfg, 0.1f);
  CHECK(state.velocity[0][0] == doctest::Approx(0.19));
  CHECK(w[0].data()[0] == doctest::Approx(0.971));
}

TEST_CASE("nesterov applies the lookahead update") {
  std::vector<Tensor> w = {scalar_weight(1.0f)};
  std::vector<Tensor> g = {scalar_weight(0.1f)};
  SgdState state;
  OptimizerConfig cfg;
  cfg.momentum = 0.9f;
  cfg.nesterov = true;
  sgd_step(w, g, state, cfg, 0.1f);
  // v = 0.1; w -= lr * (g + 0.9*v) = 0.1 * 0.19
  CHECK(w[0].data()[0] == doctest::Approx(1.0 - 0.019));
}

TEST_CASE("momentum-free decay-free step is exactly w - lr*g elementwise") {
  Rng rng(4);
  std::vector<float> wv(257), gv(257);
  for (auto& x : wv) x = rng.normal();
  for (auto& x : gv) x = rng.normal();
  std::vector<Tensor> w = {Tensor::from({257}, wv)};
  std::vector<Tensor> g = {Tensor::from({257}, gv)};
  SgdState state;
  OptimizerConfig cfg;
  const float lr = 0.037f;
  sgd_step(w, g, state, cfg, lr);
  for (std::size_t i = 0; i < wv.size(); ++i) {
    const float expected = wv[i] - lr * gv[i];
    CHECK(w[0].data()[i] == expected);
  }
}

TEST_CASE("misaligned tensors are rejected") {
  std::vector<Tensor> w = {Tensor::zeros({3})};
  std::vector<Tensor> g = {Tensor::zeros({4})};
  SgdState state;
  OptimizerConfig cfg;
  CHECK_THROWS_AS(sgd_step(w, g, state, cfg, 0.1f), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// schedules
// ---------------------------------------------------------------------------

TEST_CASE("piecewise warm branches") {
  auto s = LRSchedule::piecewise_warm(0.0025f, 300);
  CHECK(lr_at(s, 60) == doctest::Approx(0.0025));              // e/t = 0.2
  CHECK(lr_at(s, 285) == doctest::Approx(0.0025 * 0.01));      // e/t = 0.95
  // e/t = 0.575 -> lambda = 1 - (0.325/0.65)*0.99 = 0.505
  CHECK(lr_at(s, 172) / 0.0025 == doctest::Approx(1.0 - ((172.0 / 300 - 0.25) / 0.65) * 0.99));
  auto s40 = LRSchedule::piecewise_warm(1.0f, 40);
  CHECK(lr_at(s40, 23) == doctest::Approx(0.505));             // e/t = 0.575 exactly
}

TEST_CASE("piecewise warm is continuous at the breakpoints and non-increasing") {
  // Branch formulas evaluated at the exact breakpoints.
  const double mid_at_025 = 1.0 - ((0.25 - 0.25) / 0.65) * 0.99;
  const double mid_at_09 = 1.0 - ((0.9 - 0.25) / 0.65) * 0.99;
  CHECK(std::abs(mid_at_025 - 1.0) <= 1e-9);
  CHECK(std::abs(mid_at_09 - 0.01) <= 1e-9);

  auto s = LRSchedule::piecewise_warm(0.0025f, 300);
  float prev = lr_at(s, 0);
  for (int e = 1; e < 300; ++e) {
    float cur = lr_at(s, e);
    CHECK(cur <= prev);
    CHECK(cur > 0.0f);
    CHECK(cur / s.base_lr >= 0.01f - 1e-7f);
    CHECK(cur / s.base_lr <= 1.0f + 1e-7f);
    prev = cur;
  }
}

TEST_CASE("cosine anneal endpoints") {
  auto s = LRSchedule::cosine(0.01f, 1.2e-4f, 200);
  CHECK(lr_at(s, 0) == doctest::Approx(0.01));
  CHECK(lr_at(s, 200) == doctest::Approx(1.2e-4));
  CHECK(lr_at(s, 100) == doctest::Approx(0.5 * (0.01 + 1.2e-4)));
}

TEST_CASE("step decay halves on schedule") {
  auto s = LRSchedule::steps(0.1f, 0.1f, 2, 10);
  CHECK(lr_at(s, 0) == doctest::Approx(0.1));
  CHECK(lr_at(s, 1) == doctest::Approx(0.1));
  CHECK(lr_at(s, 2) == doctest::Approx(0.01));
  CHECK(lr_at(s, 9) == doctest::Approx(0.1 * 1e-4));
}

TEST_CASE("epoch table lookup") {
  auto s = LRSchedule::epochs({{0, 0.02f}, {3, 0.01f}, {6, 0.001f}}, 10);
  CHECK(lr_at(s, 0) == doctest::Approx(0.02));
  CHECK(lr_at(s, 2) == doctest::Approx(0.02));
  CHECK(lr_at(s, 3) == doctest::Approx(0.01));
  CHECK(lr_at(s, 5) == doctest::Approx(0.01));
  CHECK(lr_at(s, 6) == doctest::Approx(0.001));
  CHECK(lr_at(s, 9) == doctest::Approx(0.001));
}

TEST_CASE("epoch out of range is rejected") {
  auto s = LRSchedule::piecewise_warm(0.1f, 10);
  CHECK_THROWS_AS(lr_at(s, 10), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(s, -1), std::invalid_argument);
}
