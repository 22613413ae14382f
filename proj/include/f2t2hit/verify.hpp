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

// Independent reference computations. Nothing here calls into the kernels
// it checks except through the public op under test.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "f2t2hit/autograd.hpp"
#include "f2t2hit/tensor.hpp"

namespace f2t2hit::verify {

inline constexpr double kGradCheckThreshold = 1e-3;
inline constexpr double kRelErrorFloor = 1e-8;

struct GradCheckReport {
  std::string op;
  Shape input_shape;
  double max_rel_error = 0.0;
  double elapsed_seconds = 0.0;
  int coordinates = 0;
  // Coordinate with the largest relative error.
  size_t worst_leaf = 0;
  int64_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
  std::string failure;  // set when the op threw
};

struct GradCheckOptions {
  double step = 1e-4;
  int min_coordinates = 64;
  uint64_t seed = 0;
  double threshold = kGradCheckThreshold;
};

using DifferentiableFn = std::function<Var(const std::vector<Var>&)>;

/// Compares backward() against central differences of
/// L = sum(fn(leaves) * R) for a fixed random R. leaves[0] is reported as
/// the input; every leaf must require gradients and is perturbed in place.
/// Coordinates are drawn round-robin over leaves so each one is sampled.
GradCheckReport finite_diff_grad_check(const std::string& op, const DifferentiableFn& fn,
                                       const std::vector<Var>& leaves,
                                       const GradCheckOptions& options = {});

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Direct softmax(q k^T / sqrt(d)) v with explicit loops. q is d x hq x wq,
/// k and v are d x hk x wk; positions are flattened row-major.
Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v);

enum class Precision { kSingle, kDouble };

struct SpectralCheck {
  bool passed = false;
  double max_error = 0.0;
  double bound = 0.0;
};

/// max |irfft2(rfft2(x)) - x| over `trials` random CxHxW draws in [0, 1).
SpectralCheck spectral_roundtrip_check(const Shape& chw, int trials, Precision precision,
                                       uint64_t seed = 0);

/// Roundtrip error of a specific input (double precision).
double spectral_roundtrip_error(const Tensor& chw);

/// 10 log10(1 / MSE) accumulated in long double, no cap.
double psnr_oracle(const Tensor& a, const Tensor& b);

/// SSIM by gathering every 11x11 window explicitly and weighting it with a
/// normalized 2-D Gaussian (sigma 1.5); CxHxW inputs.
double ssim_oracle(const Tensor& a, const Tensor& b);

}  // namespace f2t2hit::verify
