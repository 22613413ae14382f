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
#include <random>
#include <span>
#include <string>
#include <vector>

namespace f2t2hit {

using Shape = std::vector<int64_t>;

std::string shape_string(const Shape& shape);
int64_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. Feature maps use NCHW, images CHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  int dim() const noexcept { return static_cast<int>(shape_.size()); }
  int64_t size(int axis) const;
  int64_t numel() const noexcept { return static_cast<int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](int64_t i) noexcept { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const noexcept { return data_[static_cast<size_t>(i)]; }

  // 3-D (C,H,W) and 4-D (N,C,H,W) element access.
  double& at(int64_t c, int64_t h, int64_t w);
  double at(int64_t c, int64_t h, int64_t w) const;
  double& at(int64_t n, int64_t c, int64_t h, int64_t w);
  double at(int64_t n, int64_t c, int64_t h, int64_t w) const;

  /// Same storage, new shape with identical element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

Tensor random_uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                      double hi = 1.0);
Tensor random_normal(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0);

/// Adds a leading batch axis of size one to a CHW tensor.
Tensor add_batch_axis(const Tensor& chw);
/// Drops a leading batch axis of size one.
Tensor drop_batch_axis(const Tensor& nchw);

}  // namespace f2t2hit
