// Copyright 2026 The F2T2-HiT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>

#include "doctest.h"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/windows.hpp"
#include "test_support.hpp"

using f2t2hit::Shape;
using f2t2hit::Tensor;
using f2t2hit::window_merge;
using f2t2hit::window_partition;

TEST_CASE("partition counts and contents") {
  const Tensor x = testing::rand_tensor({3, 16, 16}, 1);
  const auto grid = window_partition(x, 4);
  CHECK(grid.num_windows() == 16);
  CHECK(grid.windows.shape() == Shape{16, 3, 4, 4});
  // Window (row 1, col 2) starts at (4, 8).
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < 4; ++y)
      for (int64_t xx = 0; xx < 4; ++xx)
        CHECK(grid.windows[((6 * 3 + c) * 4 + y) * 4 + xx] == x.at(c, 4 + y, 8 + xx));

  const auto whole = window_partition(x, 16);
  CHECK(whole.num_windows() == 1);
  CHECK(whole.windows.reshaped({3, 16, 16}) == x);
  CHECK(window_merge(whole) == f2t2hit::add_batch_axis(x));
}

TEST_CASE("merge inverts partition bit-exactly") {
  const Tensor x = testing::rand_tensor({6, 16, 24}, 2);
  CHECK(window_merge(window_partition(x, 8)) == f2t2hit::add_batch_axis(x));
}

TEST_CASE("property: partition/merge roundtrip over random shapes and windows") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int64_t> pick(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t w = pick(rng) * (trial % 2 == 0 ? 1 : 2);
    const Shape shape{pick(rng), pick(rng), w * pick(rng), w * pick(rng)};
    const Tensor x = f2t2hit::random_normal(shape, rng);
    const auto grid = window_partition(x, w);
    CHECK(grid.num_windows() == shape[0] * (shape[2] / w) * (shape[3] / w));
    CHECK(window_merge(grid) == x);
  }
}

TEST_CASE("swapping two distinct windows changes the merge") {
  const Tensor x = testing::rand_tensor({2, 8, 8}, 4);
  auto grid = window_partition(x, 4);
  const int64_t block = 2 * 4 * 4;
  for (int64_t i = 0; i < block; ++i) std::swap(grid.windows[i], grid.windows[block + i]);
  CHECK_FALSE(window_merge(grid) == f2t2hit::add_batch_axis(x));

  Tensor same({1, 8, 8}, 0.25);
  auto twins = window_partition(same, 4);
  for (int64_t i = 0; i < 16; ++i) std::swap(twins.windows[i], twins.windows[16 + i]);
  CHECK(window_merge(twins) == f2t2hit::add_batch_axis(same));
}

TEST_CASE("partition and merge reject inconsistent shapes") {
  CHECK_THROWS_AS(window_partition(Tensor({3, 10, 16}), 4), f2t2hit::ShapeError);
  auto grid = window_partition(Tensor({3, 8, 8}), 4);
  grid.height = 12;
  CHECK_THROWS_AS(window_merge(grid), f2t2hit::ShapeError);
}
