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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/ops.hpp"
#include "f2t2hit/verify.hpp"
#include "test_support.hpp"

namespace ops = f2t2hit::ops;
using f2t2hit::Tensor;
using f2t2hit::Var;
using f2t2hit::verify::finite_diff_grad_check;
using testing::leaf;
using testing::rand_tensor;

namespace {

// Direct zero-padded cross-correlation, NCHW, any stride.
Tensor conv_loops(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int64_t n = x.size(0), ci = x.size(1), h = x.size(2), wd = x.size(3);
  const int64_t co = w.size(0), kh = w.size(2), kw = w.size(3);
  const int64_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor out({n, co, oh, ow});
  for (int64_t s = 0; s < n; ++s)
    for (int64_t o = 0; o < co; ++o)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xx = 0; xx < ow; ++xx) {
          double acc = b[o];
          for (int64_t c = 0; c < ci; ++c)
            for (int64_t dy = 0; dy < kh; ++dy)
              for (int64_t dx = 0; dx < kw; ++dx) {
                const int64_t iy = y * stride + dy - pad, ix = xx * stride + dx - pad;
                if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
                acc += w[((o * ci + c) * kh + dy) * kw + dx] * x.at(s, c, iy, ix);
              }
          out.at(s, o, y, xx) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("pointwise conv is a per-pixel matrix product") {
  const Tensor x = rand_tensor({2, 3, 4, 5}, 1);
  const Tensor w = rand_tensor({4, 3}, 2);
  const Tensor b = rand_tensor({4}, 3);
  const Tensor y = ops::pointwise_conv(Var(x), Var(w), Var(b)).value();
  CHECK(f2t2hit::max_abs_diff(y, conv_loops(x, w.reshaped({4, 3, 1, 1}), b, 1, 0)) < 1e-13);
}

TEST_CASE("depthwise conv matches a per-channel direct loop") {
  const Tensor x = rand_tensor({1, 3, 6, 5}, 4);
  const Tensor w = rand_tensor({3, 5, 5}, 5);
  const Tensor b = rand_tensor({3}, 6);
  const Tensor y = ops::depthwise_conv(Var(x), Var(w), Var(b)).value();
  for (int64_t c = 0; c < 3; ++c) {
    Tensor xc({1, 1, 6, 5});
    for (int64_t i = 0; i < 30; ++i) xc[i] = x[c * 30 + i];
    Tensor wc({1, 1, 5, 5});
    for (int64_t i = 0; i < 25; ++i) wc[i] = w[c * 25 + i];
    const Tensor ref = conv_loops(xc, wc, Tensor({1}, b[c]), 1, 2);
    for (int64_t i = 0; i < 30; ++i) CHECK(std::abs(y[c * 30 + i] - ref[i]) < 1e-13);
  }
}

TEST_CASE("strided conv2d matches a direct loop") {
  const Tensor x = rand_tensor({2, 3, 8, 6}, 7);
  const Tensor w = rand_tensor({5, 3, 2, 2}, 8);
  const Tensor b = rand_tensor({5}, 9);
  CHECK(f2t2hit::max_abs_diff(ops::conv2d(Var(x), Var(w), Var(b), 2, 0).value(),
                              conv_loops(x, w, b, 2, 0)) < 1e-13);
  const Tensor w3 = rand_tensor({4, 3, 3, 3}, 10);
  const Tensor b3 = rand_tensor({4}, 11);
  CHECK(f2t2hit::max_abs_diff(ops::conv2d(Var(x), Var(w3), Var(b3), 1, 1).value(),
                              conv_loops(x, w3, b3, 1, 1)) < 1e-13);
}

TEST_CASE("pixel shuffle follows the sub-pixel channel layout") {
  Tensor x({1, 8, 2, 3});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i);
  const Tensor y = ops::pixel_shuffle(Var(x), 2).value();
  REQUIRE(y.shape() == f2t2hit::Shape{1, 2, 4, 6});
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t yy = 0; yy < 4; ++yy)
      for (int64_t xx = 0; xx < 6; ++xx) {
        const int64_t src_c = c * 4 + (yy % 2) * 2 + (xx % 2);
        CHECK(y.at(0, c, yy, xx) == x.at(0, src_c, yy / 2, xx / 2));
      }
}

TEST_CASE("linear ops pass the gradient check to 1e-8") {
  Var x = leaf(rand_tensor({2, 3, 5, 4}, 12));
  Var w = leaf(rand_tensor({4, 3}, 13));
  Var b = leaf(rand_tensor({4}, 14));
  auto fn = [](const std::vector<Var>& in) { return ops::pointwise_conv(in[0], in[1], in[2]); };
  const auto r = finite_diff_grad_check("pointwise_conv", fn, {x, w, b});
  CHECK(r.coordinates >= 64);
  CHECK_MESSAGE(r.max_rel_error < 1e-8, r.max_rel_error);
}

TEST_CASE("primitive gradients match central differences") {
  using Fn = f2t2hit::verify::DifferentiableFn;
  struct Case {
    const char* name;
    Fn fn;
    std::vector<Var> leaves;
  };
  std::vector<Case> cases;
  cases.push_back({"conv2d_stride2",
                   [](const std::vector<Var>& in) { return ops::conv2d(in[0], in[1], in[2], 2, 0); },
                   {leaf(rand_tensor({1, 2, 6, 6}, 1)), leaf(rand_tensor({3, 2, 2, 2}, 2)),
                    leaf(rand_tensor({3}, 3))}});
  cases.push_back({"conv2d_pad1",
                   [](const std::vector<Var>& in) { return ops::conv2d(in[0], in[1], in[2], 1, 1); },
                   {leaf(rand_tensor({2, 2, 5, 4}, 4)), leaf(rand_tensor({3, 2, 3, 3}, 5)),
                    leaf(rand_tensor({3}, 6))}});
  cases.push_back({"depthwise",
                   [](const std::vector<Var>& in) { return ops::depthwise_conv(in[0], in[1], in[2]); },
                   {leaf(rand_tensor({2, 3, 5, 6}, 7)), leaf(rand_tensor({3, 3, 3}, 8)),
                    leaf(rand_tensor({3}, 9))}});
  cases.push_back({"layer_norm",
                   [](const std::vector<Var>& in) {
                     return ops::layer_norm_channels(in[0], in[1], in[2], 1e-6);
                   },
                   {leaf(rand_tensor({2, 4, 3, 3}, 10)), leaf(rand_tensor({4}, 11)),
                    leaf(rand_tensor({4}, 12))}});
  cases.push_back({"gelu_sigmoid_mul",
                   [](const std::vector<Var>& in) {
                     return ops::mul(ops::gelu(in[0]), ops::sigmoid(in[1]));
                   },
                   {leaf(rand_tensor({1, 2, 3, 3}, 13, -3, 3)),
                    leaf(rand_tensor({1, 2, 3, 3}, 14, -3, 3))}});
  cases.push_back({"div_sub",
                   [](const std::vector<Var>& in) {
                     return ops::div(ops::sub(in[0], in[1]), ops::add_scalar(in[1], 3.0));
                   },
                   {leaf(rand_tensor({1, 2, 3, 3}, 15)), leaf(rand_tensor({1, 2, 3, 3}, 16))}});
  cases.push_back({"pool_broadcast",
                   [](const std::vector<Var>& in) {
                     return ops::mul_broadcast(in[0], ops::avg_pool(in[1], 2, 3));
                   },
                   {leaf(rand_tensor({2, 3, 4, 6}, 17)), leaf(rand_tensor({2, 3, 4, 6}, 18))}});
  cases.push_back({"shuffle_crop_concat",
                   [](const std::vector<Var>& in) {
                     Var s = ops::pixel_shuffle(in[0], 2);
                     Var c = ops::concat_channels({ops::slice_channels(s, 1, 1), s});
                     return ops::crop(c, 1, 2, 3, 3);
                   },
                   {leaf(rand_tensor({1, 8, 3, 3}, 19))}});
  cases.push_back({"scale_by_mean",
                   [](const std::vector<Var>& in) {
                     return ops::scale_by(ops::mean(in[0]), ops::scale_by(in[1], in[0]));
                   },
                   {leaf(rand_tensor({1, 2, 3, 3}, 20)), leaf(rand_tensor({1}, 21))}});
  cases.push_back({"spatial_correlation",
                   [](const std::vector<Var>& in) {
                     return ops::spatial_self_correlation(in[0], in[1], in[2], 8, 4);
                   },
                   {leaf(rand_tensor({2, 3, 8, 16}, 22)), leaf(rand_tensor({2, 3, 8, 16}, 23)),
                    leaf(rand_tensor({2, 3, 8, 16}, 24))}});
  cases.push_back({"channel_correlation",
                   [](const std::vector<Var>& in) {
                     return ops::channel_self_correlation(in[0], in[1], in[2], 4);
                   },
                   {leaf(rand_tensor({2, 3, 8, 4}, 25, -2, 2)),
                    leaf(rand_tensor({2, 3, 8, 4}, 26, -2, 2)), leaf(rand_tensor({2, 3, 8, 4}, 27))}});
  for (const Case& c : cases) {
    for (uint64_t draw = 0; draw < 3; ++draw) {
      f2t2hit::verify::GradCheckOptions opt;
      opt.seed = draw;
      const auto r = finite_diff_grad_check(c.name, c.fn, c.leaves, opt);
      CHECK_MESSAGE(r.passed, c.name, " draw ", draw, " err ", r.max_rel_error, " ", r.failure);
    }
  }
}

TEST_CASE("mean absolute error matches a direct loop") {
  const Tensor a = rand_tensor({2, 3, 4, 4}, 30, 0, 1);
  const Tensor b = rand_tensor({2, 3, 4, 4}, 31, 0, 1);
  double ref = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) ref += std::abs(a[i] - b[i]);
  ref /= static_cast<double>(a.numel());
  CHECK(std::abs(ops::mean_abs_error(Var(a), b).value()[0] - ref) < 1e-12);
  CHECK(ops::mean_abs_error(Var(a), a).value()[0] == 0.0);
}

TEST_CASE("shape errors are raised for mismatched operands") {
  CHECK_THROWS_AS(ops::add(Var(Tensor({1, 2, 3, 3})), Var(Tensor({1, 2, 3, 4}))),
                  f2t2hit::ShapeError);
  CHECK_THROWS_AS(ops::pointwise_conv(Var(Tensor({1, 2, 3, 3})), Var(Tensor({4, 3})),
                                      Var(Tensor({4}))),
                  f2t2hit::ShapeError);
  CHECK_THROWS_AS(ops::layer_norm_channels(Var(Tensor({1, 1, 3, 3})), Var(Tensor({1}, 1.0)),
                                           Var(Tensor({1})), 1e-6),
                  f2t2hit::ConfigError);
  CHECK_THROWS_AS(ops::mean_abs_error(Var(Tensor({1, 2, 3, 3})), Tensor({1, 2, 3, 2})),
                  f2t2hit::ShapeError);
}

TEST_CASE("the gradient fault hook is caught by the checker") {
  Var x = leaf(rand_tensor({1, 2, 4, 4}, 40, -2, 2));
  auto fn = [](const std::vector<Var>& in) { return ops::gelu(in[0]); };
  ops::set_gradient_fault(true);
  const auto broken = finite_diff_grad_check("gelu", fn, {x});
  ops::set_gradient_fault(false);
  CHECK_FALSE(broken.passed);
  CHECK(finite_diff_grad_check("gelu", fn, {x}).passed);
}

TEST_CASE("an op that throws yields a failed report with context") {
  Var x = leaf(rand_tensor({1, 3, 4, 4}, 41));
  auto fn = [](const std::vector<Var>& in) { return ops::slice_channels(in[0], 2, 5); };
  const auto r = finite_diff_grad_check("bad_slice", fn, {x});
  CHECK_FALSE(r.passed);
  CHECK(r.failure.find("bad_slice") != std::string::npos);
}
