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

#include "f2t2hit/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/fft.hpp"
#include "f2t2hit/ops.hpp"

namespace f2t2hit::verify {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_grad_check(const std::string& op, const DifferentiableFn& fn,
                                       const std::vector<Var>& leaves,
                                       const GradCheckOptions& options) {
  GradCheckReport report;
  report.op = op;
  if (!leaves.empty()) report.input_shape = leaves.front().shape();
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&](GradCheckReport& r) {
    r.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };
  if (leaves.empty()) {
    report.failure = "no leaves to check";
    return finish(report);
  }
  for (const Var& leaf : leaves) {
    if (!leaf.requires_grad()) {
      report.failure = "leaf does not require gradients";
      return finish(report);
    }
  }

  std::mt19937_64 rng(options.seed);
  try {
    for (Var leaf : leaves) leaf.zero_grad();
    Var out = fn(leaves);
    const Tensor projection = random_uniform(out.shape(), rng, -1.0, 1.0);
    backward(ops::weighted_sum(out, projection));
    std::vector<Tensor> analytic;
    for (const Var& leaf : leaves) analytic.push_back(leaf.grad());

    auto objective = [&]() {
      NoGradGuard no_grad;
      const Tensor y = fn(leaves).value();
      double acc = 0.0;
      for (int64_t i = 0; i < y.numel(); ++i) acc += y[i] * projection[i];
      return acc;
    };

    const int count = std::max(options.min_coordinates, 2 * static_cast<int>(leaves.size()));
    for (int k = 0; k < count; ++k) {
      const size_t li = static_cast<size_t>(k) % leaves.size();
      Var leaf = leaves[li];
      Tensor& values = leaf.mutable_value();
      std::uniform_int_distribution<int64_t> pick(0, values.numel() - 1);
      const int64_t idx = pick(rng);
      const double original = values[idx];
      values[idx] = original + options.step;
      const double plus = objective();
      values[idx] = original - options.step;
      const double minus = objective();
      values[idx] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic[li][idx], numeric);
      if (err > report.max_rel_error || report.coordinates == 0) {
        report.max_rel_error = err;
        report.worst_leaf = li;
        report.worst_index = idx;
        report.worst_analytic = analytic[li][idx];
        report.worst_numeric = numeric;
      }
      ++report.coordinates;
    }
    for (Var leaf : leaves) leaf.zero_grad();
  } catch (const std::exception& e) {
    report.failure = op + " raised during gradient check: " + e.what();
    report.passed = false;
    return finish(report);
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < options.threshold;
  return finish(report);
}

Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.dim() != 3 || k.dim() != 3 || v.dim() != 3 || k.shape() != v.shape() ||
      q.size(0) != k.size(0)) {
    throw ShapeError("attention_oracle expects d x h x w maps with matching d");
  }
  const int64_t d = q.size(0);
  const int64_t nq = q.size(1) * q.size(2);
  const int64_t nk = k.size(1) * k.size(2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out(q.shape());
  std::vector<double> logits(static_cast<size_t>(nk));
  for (int64_t i = 0; i < nq; ++i) {
    double largest = -HUGE_VAL;
    for (int64_t j = 0; j < nk; ++j) {
      double dot = 0.0;
      for (int64_t c = 0; c < d; ++c) dot += q[c * nq + i] * k[c * nk + j];
      logits[j] = dot * scale;
      largest = std::max(largest, logits[j]);
    }
    double total = 0.0;
    for (int64_t j = 0; j < nk; ++j) {
      logits[j] = std::exp(logits[j] - largest);
      total += logits[j];
    }
    for (int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int64_t j = 0; j < nk; ++j) acc += logits[j] / total * v[c * nk + j];
      out[c * nq + i] = acc;
    }
  }
  return out;
}

namespace {

template <typename T>
double roundtrip_error(const std::vector<T>& input, int64_t planes, int64_t rows, int64_t cols) {
  const auto spectrum = fft::rfft2<T>(input, planes, rows, cols);
  const auto back = fft::irfft2<T>(spectrum, planes, rows, cols);
  double worst = 0.0;
  for (size_t i = 0; i < input.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(back[i]) - static_cast<double>(input[i])));
  }
  return worst;
}

}  // namespace

SpectralCheck spectral_roundtrip_check(const Shape& chw, int trials, Precision precision,
                                       uint64_t seed) {
  if (chw.size() != 3 || chw[1] < 2 || chw[2] < 2) {
    throw ArgumentError("spectral_roundtrip_check needs a CxHxW shape with H, W >= 2");
  }
  SpectralCheck result;
  result.bound = precision == Precision::kDouble ? 1e-12 : 1e-6;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    const Tensor x = random_uniform(chw, rng, 0.0, 1.0);
    double err = 0.0;
    if (precision == Precision::kDouble) {
      err = roundtrip_error<double>(x.storage(), chw[0], chw[1], chw[2]);
    } else {
      std::vector<float> xf(x.storage().begin(), x.storage().end());
      err = roundtrip_error<float>(xf, chw[0], chw[1], chw[2]);
    }
    result.max_error = std::max(result.max_error, err);
  }
  result.passed = result.max_error < result.bound;
  return result;
}

double spectral_roundtrip_error(const Tensor& chw) {
  if (chw.dim() != 3) throw ArgumentError("spectral_roundtrip_error expects CxHxW");
  return roundtrip_error<double>(chw.storage(), chw.size(0), chw.size(1), chw.size(2));
}

double psnr_oracle(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dim() != 3) throw ShapeError("psnr_oracle expects matching CxHxW");
  long double acc = 0.0L;
  for (int64_t c = 0; c < a.size(0); ++c)
    for (int64_t y = 0; y < a.size(1); ++y)
      for (int64_t x = 0; x < a.size(2); ++x) {
        const long double d = static_cast<long double>(a.at(c, y, x)) - b.at(c, y, x);
        acc += d * d;
      }
  const long double mse = acc / static_cast<long double>(a.numel());
  return static_cast<double>(10.0L * std::log10(1.0L / mse));
}

double ssim_oracle(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dim() != 3) throw ShapeError("ssim_oracle expects matching CxHxW");
  constexpr int k = 11;
  constexpr double sigma = 1.5;
  if (a.size(1) < k || a.size(2) < k) throw ArgumentError("ssim_oracle: image smaller than 11x11");
  double weight[k][k];
  double norm = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double r2 = static_cast<double>((i - k / 2) * (i - k / 2) + (j - k / 2) * (j - k / 2));
      weight[i][j] = std::exp(-r2 / (2.0 * sigma * sigma));
      norm += weight[i][j];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int64_t windows = 0;
  std::vector<double> pa(k * k), pb(k * k);
  for (int64_t c = 0; c < a.size(0); ++c)
    for (int64_t top = 0; top + k <= a.size(1); ++top)
      for (int64_t left = 0; left + k <= a.size(2); ++left) {
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            pa[i * k + j] = a.at(c, top + i, left + j);
            pb[i * k + j] = b.at(c, top + i, left + j);
          }
        double ma = 0.0, mb = 0.0;
        for (int i = 0; i < k * k; ++i) {
          ma += weight[i / k][i % k] / norm * pa[i];
          mb += weight[i / k][i % k] / norm * pb[i];
        }
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (int i = 0; i < k * k; ++i) {
          const double w = weight[i / k][i % k] / norm;
          va += w * (pa[i] - ma) * (pa[i] - ma);
          vb += w * (pb[i] - mb) * (pb[i] - mb);
          cov += w * (pa[i] - ma) * (pb[i] - mb);
        }
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
  return total / static_cast<double>(windows);
}

}  // namespace f2t2hit::verify
