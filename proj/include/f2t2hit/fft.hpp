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

// 2-D discrete Fourier transforms over stacks of planes.
//
// The real transforms use the orthonormal scaling 1/sqrt(H*W) in both
// directions and keep the W/2+1 non-negative frequency columns. The inverse
// real transform reads the half spectrum as
//
//   x[h,w] = s * sum_{k, l<=W/2} c_l * Re(X[k,l] * exp(2*pi*i*(k*h/H + l*w/W)))
//
// with c_l = 1 for the DC column (and the Nyquist column when W is even) and
// 2 otherwise. That makes it exactly linear in (Re X, Im X) even for
// spectra that are not Hermitian-consistent, which the learned frequency
// branch produces.

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace f2t2hit::fft {

/// In-place unnormalized complex 2-D DFT of `planes` contiguous rows x cols
/// planes. Forward uses exp(-i...), inverse exp(+i...).
template <typename T>
void dft2d(std::span<std::complex<T>> data, int64_t planes, int64_t rows, int64_t cols,
           bool inverse);

inline int64_t half_width(int64_t width) { return width / 2 + 1; }

/// Orthonormal real-to-half-spectrum transform. `input` holds `planes`
/// planes of rows x cols; result holds `planes` planes of rows x (cols/2+1).
template <typename T>
std::vector<std::complex<T>> rfft2(std::span<const T> input, int64_t planes, int64_t rows,
                                   int64_t cols);

/// Inverse of rfft2 under the column weighting documented above.
template <typename T>
std::vector<T> irfft2(std::span<const std::complex<T>> spectrum, int64_t planes, int64_t rows,
                      int64_t cols);

/// c_l column weight of the inverse real transform.
inline double column_weight(int64_t l, int64_t cols) {
  if (l == 0) return 1.0;
  if (cols % 2 == 0 && l == cols / 2) return 1.0;
  return 2.0;
}

}  // namespace f2t2hit::fft
