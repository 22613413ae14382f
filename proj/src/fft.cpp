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

#include "f2t2hit/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <tuple>

#include "f2t2hit/errors.hpp"

namespace f2t2hit::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are built once per geometry with FFTW_ESTIMATE, which keeps the
// chosen algorithm (and therefore the rounding) fixed across runs.
template <typename T>
struct Fftw;

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static Plan plan(int n, int* dims, int howmany, Complex* buf, int sign) {
    return fftw_plan_many_dft(n, dims, howmany, buf, nullptr, 1, dims[0] * dims[1], buf,
                              nullptr, 1, dims[0] * dims[1], sign, FFTW_ESTIMATE);
  }
  static void execute(Plan p, Complex* buf) { fftw_execute_dft(p, buf, buf); }
  static void* alloc(size_t bytes) { return fftw_malloc(bytes); }
  static void release(void* p) { fftw_free(p); }
};

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  using Complex = fftwf_complex;
  static Plan plan(int n, int* dims, int howmany, Complex* buf, int sign) {
    return fftwf_plan_many_dft(n, dims, howmany, buf, nullptr, 1, dims[0] * dims[1], buf,
                               nullptr, 1, dims[0] * dims[1], sign, FFTW_ESTIMATE);
  }
  static void execute(Plan p, Complex* buf) { fftwf_execute_dft(p, buf, buf); }
  static void* alloc(size_t bytes) { return fftwf_malloc(bytes); }
  static void release(void* p) { fftwf_free(p); }
};

template <typename T>
class PlanCache {
 public:
  using Key = std::tuple<int64_t, int64_t, int64_t, bool>;

  typename Fftw<T>::Plan get(int64_t planes, int64_t rows, int64_t cols, bool inverse) {
    std::lock_guard<std::mutex> lock(mutex_);
    const Key key{planes, rows, cols, inverse};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const size_t count = static_cast<size_t>(planes * rows * cols);
    auto* scratch =
        static_cast<typename Fftw<T>::Complex*>(Fftw<T>::alloc(count * sizeof(std::complex<T>)));
    int dims[2] = {static_cast<int>(rows), static_cast<int>(cols)};
    auto plan = Fftw<T>::plan(2, dims, static_cast<int>(planes), scratch,
                              inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    Fftw<T>::release(scratch);
    if (!plan) throw ArgumentError("FFTW could not plan a transform");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<Key, typename Fftw<T>::Plan> plans_;
};

template <typename T>
PlanCache<T>& cache() {
  static PlanCache<T> instance;
  return instance;
}

// Aligned scratch so every execution hits the same codelets as planning.
template <typename T>
class AlignedBuffer {
 public:
  explicit AlignedBuffer(size_t count)
      : ptr_(static_cast<std::complex<T>*>(Fftw<T>::alloc(count * sizeof(std::complex<T>)))),
        count_(count) {}
  ~AlignedBuffer() { Fftw<T>::release(ptr_); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  std::complex<T>* data() { return ptr_; }
  size_t size() const { return count_; }

 private:
  std::complex<T>* ptr_;
  size_t count_;
};

template <typename T>
void run(AlignedBuffer<T>& buf, int64_t planes, int64_t rows, int64_t cols, bool inverse) {
  auto plan = cache<T>().get(planes, rows, cols, inverse);
  Fftw<T>::execute(plan, reinterpret_cast<typename Fftw<T>::Complex*>(buf.data()));
}

void check_dims(int64_t planes, int64_t rows, int64_t cols) {
  if (planes < 1 || rows < 1 || cols < 1) {
    throw ArgumentError("FFT dimensions must be positive");
  }
}

}  // namespace

template <typename T>
void dft2d(std::span<std::complex<T>> data, int64_t planes, int64_t rows, int64_t cols,
           bool inverse) {
  check_dims(planes, rows, cols);
  const size_t n = static_cast<size_t>(planes * rows * cols);
  if (data.size() != n) throw ArgumentError("dft2d buffer size mismatch");
  AlignedBuffer<T> buf(n);
  std::memcpy(buf.data(), data.data(), n * sizeof(std::complex<T>));
  run(buf, planes, rows, cols, inverse);
  std::memcpy(data.data(), buf.data(), n * sizeof(std::complex<T>));
}

template <typename T>
std::vector<std::complex<T>> rfft2(std::span<const T> input, int64_t planes, int64_t rows,
                                   int64_t cols) {
  check_dims(planes, rows, cols);
  const int64_t plane = rows * cols;
  if (static_cast<int64_t>(input.size()) != planes * plane) {
    throw ArgumentError("rfft2 input size mismatch");
  }
  AlignedBuffer<T> buf(static_cast<size_t>(planes * plane));
  for (int64_t i = 0; i < planes * plane; ++i) buf.data()[i] = std::complex<T>(input[i], T(0));
  run(buf, planes, rows, cols, false);
  const int64_t half = half_width(cols);
  const T scale = T(1) / std::sqrt(static_cast<T>(plane));
  std::vector<std::complex<T>> out(static_cast<size_t>(planes * rows * half));
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t r = 0; r < rows; ++r) {
      const std::complex<T>* src = buf.data() + p * plane + r * cols;
      std::complex<T>* dst = out.data() + (p * rows + r) * half;
      for (int64_t l = 0; l < half; ++l) dst[l] = src[l] * scale;
    }
  }
  return out;
}

template <typename T>
std::vector<T> irfft2(std::span<const std::complex<T>> spectrum, int64_t planes, int64_t rows,
                      int64_t cols) {
  check_dims(planes, rows, cols);
  const int64_t plane = rows * cols;
  const int64_t half = half_width(cols);
  if (static_cast<int64_t>(spectrum.size()) != planes * rows * half) {
    throw ArgumentError("irfft2 spectrum size mismatch");
  }
  AlignedBuffer<T> buf(static_cast<size_t>(planes * plane));
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t r = 0; r < rows; ++r) {
      const std::complex<T>* src = spectrum.data() + (p * rows + r) * half;
      std::complex<T>* dst = buf.data() + p * plane + r * cols;
      for (int64_t l = 0; l < cols; ++l) {
        dst[l] = l < half ? src[l] * static_cast<T>(column_weight(l, cols)) : std::complex<T>();
      }
    }
  }
  run(buf, planes, rows, cols, true);
  const T scale = T(1) / std::sqrt(static_cast<T>(plane));
  std::vector<T> out(static_cast<size_t>(planes * plane));
  for (int64_t i = 0; i < planes * plane; ++i) out[i] = buf.data()[i].real() * scale;
  return out;
}

template void dft2d<double>(std::span<std::complex<double>>, int64_t, int64_t, int64_t, bool);
template void dft2d<float>(std::span<std::complex<float>>, int64_t, int64_t, int64_t, bool);
template std::vector<std::complex<double>> rfft2<double>(std::span<const double>, int64_t,
                                                         int64_t, int64_t);
template std::vector<std::complex<float>> rfft2<float>(std::span<const float>, int64_t, int64_t,
                                                       int64_t);
template std::vector<double> irfft2<double>(std::span<const std::complex<double>>, int64_t,
                                            int64_t, int64_t);
template std::vector<float> irfft2<float>(std::span<const std::complex<float>>, int64_t, int64_t,
                                          int64_t);

}  // namespace f2t2hit::fft
