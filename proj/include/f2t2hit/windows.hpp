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

#pragma once

#include <cstdint>

#include "f2t2hit/tensor.hpp"

namespace f2t2hit {

/// Non-overlapping square windows cut from an NxCxHxW map.
///
/// `windows` has shape (N*(H/w)*(W/w)) x C x w x w. Windows are ordered by
/// batch index, then row-major over the window grid.
struct WindowGrid {
  Tensor windows;
  int64_t window = 0;
  int64_t batch = 0;
  int64_t height = 0;
  int64_t width = 0;

  int64_t windows_per_image() const { return (height / window) * (width / window); }
  int64_t num_windows() const { return batch * windows_per_image(); }
};

/// Accepts CxHxW (treated as batch 1) or NxCxHxW. Throws ShapeError unless
/// `window` divides both H and W.
WindowGrid window_partition(const Tensor& x, int64_t window);

/// Exact inverse of window_partition; always returns NxCxHxW.
Tensor window_merge(const WindowGrid& grid);

}  // namespace f2t2hit
