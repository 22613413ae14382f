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

#include "f2t2hit/windows.hpp"

#include <algorithm>

#include "f2t2hit/errors.hpp"

namespace f2t2hit {

WindowGrid window_partition(const Tensor& x, int64_t window) {
  if (x.dim() != 3 && x.dim() != 4) {
    throw ShapeError("window_partition expects CxHxW or NxCxHxW, got " + shape_string(x.shape()));
  }
  const bool batched = x.dim() == 4;
  const int64_t n = batched ? x.size(0) : 1;
  const int64_t c = x.size(-3), h = x.size(-2), w = x.size(-1);
  if (window < 1 || h % window != 0 || w % window != 0) {
    throw ShapeError("window size " + std::to_string(window) + " does not tile " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const int64_t gh = h / window, gw = w / window;
  WindowGrid grid;
  grid.window = window;
  grid.batch = n;
  grid.height = h;
  grid.width = w;
  grid.windows = Tensor({n * gh * gw, c, window, window});
  const double* src = x.data();
  double* dst = grid.windows.data();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t wy = 0; wy < gh; ++wy) {
      for (int64_t wx = 0; wx < gw; ++wx) {
        for (int64_t ch = 0; ch < c; ++ch) {
          const double* plane = src + (b * c + ch) * h * w;
          for (int64_t y = 0; y < window; ++y) {
            const double* row = plane + (wy * window + y) * w + wx * window;
            std::copy(row, row + window, dst);
            dst += window;
          }
        }
      }
    }
  }
  return grid;
}

Tensor window_merge(const WindowGrid& grid) {
  const Tensor& win = grid.windows;
  if (win.dim() != 4 || grid.window < 1 || win.size(2) != grid.window ||
      win.size(3) != grid.window || grid.height % grid.window != 0 ||
      grid.width % grid.window != 0 || win.size(0) != grid.num_windows()) {
    throw ShapeError("window grid " + shape_string(win.shape()) +
                     " inconsistent with origin " + std::to_string(grid.batch) + "x" +
                     std::to_string(grid.height) + "x" + std::to_string(grid.width));
  }
  const int64_t c = win.size(1), h = grid.height, w = grid.width, window = grid.window;
  const int64_t gh = h / window, gw = w / window;
  Tensor out({grid.batch, c, h, w});
  const double* src = win.data();
  double* dst = out.data();
  for (int64_t b = 0; b < grid.batch; ++b) {
    for (int64_t wy = 0; wy < gh; ++wy) {
      for (int64_t wx = 0; wx < gw; ++wx) {
        for (int64_t ch = 0; ch < c; ++ch) {
          double* plane = dst + (b * c + ch) * h * w;
          for (int64_t y = 0; y < window; ++y) {
            std::copy(src, src + window, plane + (wy * window + y) * w + wx * window);
            src += window;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace f2t2hit
