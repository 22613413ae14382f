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

// Differentiable primitives on NxCxHxW feature maps. Each op validates its
// shapes, computes the forward value and records a hand-written backward.

#pragma once

#include <cstdint>
#include <vector>

#include "f2t2hit/autograd.hpp"

namespace f2t2hit::ops {

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& x, double c);
Var scale(const Var& x, double c);
/// gain (a one-element tensor) times x.
Var scale_by(const Var& gain, const Var& x);
Var gelu(const Var& x);
Var sigmoid(const Var& x);

// Reductions.
Var sum(const Var& x);
Var mean(const Var& x);
/// sum(x * weights) for a constant weight tensor of x's shape.
Var weighted_sum(const Var& x, const Tensor& weights);
Var mean_abs_error(const Var& pred, const Tensor& target);

// Convolutions. Biases may be undefined Vars.
/// 1x1 convolution, weight Cout x Cin.
Var pointwise_conv(const Var& x, const Var& weight, const Var& bias);
/// Stride-1 depthwise kxk convolution with zero padding k/2, weight C x k x k (k odd).
Var depthwise_conv(const Var& x, const Var& weight, const Var& bias);
/// Dense convolution, weight Cout x Cin x kh x kw, zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

/// Normalizes every spatial position over channels, then applies the
/// per-channel affine pair.
Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps);

// Channel and spatial rearrangements.
Var slice_channels(const Var& x, int64_t begin, int64_t count);
Var concat_channels(const std::vector<Var>& parts);
/// Mean over non-overlapping tile_h x tile_w tiles.
Var avg_pool(const Var& x, int64_t tile_h, int64_t tile_w);
/// x * s where s (NxCxhxw) is repeated over H/h x W/w tiles.
Var mul_broadcast(const Var& x, const Var& s);
/// N x C*r*r x H x W -> N x C x H*r x W*r.
Var pixel_shuffle(const Var& x, int64_t factor);
Var crop(const Var& x, int64_t top, int64_t left, int64_t height, int64_t width);

// Spectral transforms (orthonormal, see fft.hpp). Real and imaginary parts
// are stacked along channels: out[:, c] = Re, out[:, C + c] = Im.
Var rfft2_stacked(const Var& x);
Var irfft2_stacked(const Var& spectrum, int64_t width);

// Window-local correlation kernels. q, k, v share one NxdxHxW shape; H and
// W must be multiples of `window`.
/// Queries attend to keys/values average-pooled onto a grid x grid lattice
/// inside each window; scale 1/sqrt(d).
Var spatial_self_correlation(const Var& q, const Var& k, const Var& v, int64_t window,
                             int64_t grid);
/// Channel-to-channel attention inside each window; scale 1/window^2.
Var channel_self_correlation(const Var& q, const Var& k, const Var& v, int64_t window);

/// Attention rows of the two kernels above, one (num_windows x rows x cols)
/// tensor per call. Exposed for normalization checks.
Tensor spatial_self_correlation_weights(const Tensor& q, const Tensor& k, int64_t window,
                                        int64_t grid);
Tensor channel_self_correlation_weights(const Tensor& q, const Tensor& k, int64_t window);

// Test hook: when enabled, the GELU backward returns the negated gradient.
// Used to prove that the finite-difference checks catch a broken derivative.
void set_gradient_fault(bool enabled) noexcept;
bool gradient_fault() noexcept;

}  // namespace f2t2hit::ops
