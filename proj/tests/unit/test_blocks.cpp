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
#include "f2t2hit/blocks.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/ops.hpp"
#include "f2t2hit/verify.hpp"
#include "test_support.hpp"

using f2t2hit::Shape;
using f2t2hit::Tensor;
using f2t2hit::Var;
using testing::rand_tensor;

namespace {

// ---- loop references -------------------------------------------------------

Tensor pw_loops(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t n = x.size(0), ci = x.size(1), hw = x.size(2) * x.size(3), co = w.size(0);
  Tensor out({n, co, x.size(2), x.size(3)});
  for (int64_t s = 0; s < n; ++s)
    for (int64_t o = 0; o < co; ++o)
      for (int64_t p = 0; p < hw; ++p) {
        double acc = b[o];
        for (int64_t c = 0; c < ci; ++c) acc += w[o * ci + c] * x[(s * ci + c) * hw + p];
        out[(s * co + o) * hw + p] = acc;
      }
  return out;
}

Tensor dw_loops(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t n = x.size(0), c = x.size(1), h = x.size(2), wd = x.size(3), k = w.size(1);
  const int64_t r = k / 2;
  Tensor out(x.shape());
  for (int64_t s = 0; s < n; ++s)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < wd; ++xx) {
          double acc = b[ch];
          for (int64_t dy = -r; dy <= r; ++dy)
            for (int64_t dx = -r; dx <= r; ++dx) {
              const int64_t iy = y + dy, ix = xx + dx;
              if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
              acc += w[(ch * k + dy + r) * k + dx + r] * x.at(s, ch, iy, ix);
            }
          out.at(s, ch, y, xx) = acc;
        }
  return out;
}

double gelu_ref(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

Tensor window_of(const Tensor& t, int64_t c0, int64_t count, int64_t y0, int64_t x0, int64_t w) {
  Tensor out({count, w, w});
  for (int64_t c = 0; c < count; ++c)
    for (int64_t y = 0; y < w; ++y)
      for (int64_t x = 0; x < w; ++x) out.at(c, y, x) = t.at(0, c0 + c, y0 + y, x0 + x);
  return out;
}

// Channel-to-channel attention of one window: softmax_rows(Q K^T / w^2) V.
Tensor channel_attention_loops(const Tensor& q, const Tensor& k, const Tensor& v) {
  const int64_t d = q.size(0), n = q.size(1) * q.size(2);
  Tensor out(q.shape());
  for (int64_t i = 0; i < d; ++i) {
    std::vector<double> row(static_cast<size_t>(d));
    double largest = -1e300;
    for (int64_t j = 0; j < d; ++j) {
      double dot = 0.0;
      for (int64_t p = 0; p < n; ++p) dot += q[i * n + p] * k[j * n + p];
      row[j] = dot / static_cast<double>(n);
      largest = std::max(largest, row[j]);
    }
    double total = 0.0;
    for (double& r : row) total += (r = std::exp(r - largest));
    for (int64_t p = 0; p < n; ++p) {
      double acc = 0.0;
      for (int64_t j = 0; j < d; ++j) acc += row[j] / total * v[j * n + p];
      out[i * n + p] = acc;
    }
  }
  return out;
}

void set_identity(f2t2hit::PointwiseParams& p) {
  Tensor& w = p.weight.mutable_value();
  w.fill(0.0);
  for (int64_t i = 0; i < std::min(w.size(0), w.size(1)); ++i) w[i * w.size(1) + i] = 1.0;
  if (p.bias.defined()) p.bias.mutable_value().fill(0.0);
}

void set_delta(f2t2hit::DepthwiseParams& p, double value = 1.0) {
  Tensor& w = p.weight.mutable_value();
  w.fill(0.0);
  const int64_t k = w.size(1);
  for (int64_t c = 0; c < w.size(0); ++c) w[(c * k + k / 2) * k + k / 2] = value;
  p.bias.mutable_value().fill(0.0);
}

template <typename Params>
void zero_all(Params& p) {
  f2t2hit::visit_params(p, "p", [](const std::string&, Var& v) { v.mutable_value().fill(0.0); });
}

template <typename Params, typename Fn>
void grad_check_block(const char* name, Params& params, const Shape& shape, Fn op) {
  for (uint64_t draw = 0; draw < 3; ++draw) {
    testing::randomize(testing::visitor_of(params), 100 + draw);
    std::vector<Var> leaves{testing::leaf(rand_tensor(shape, 200 + draw))};
    for (Var& v : testing::collect(testing::visitor_of(params))) leaves.push_back(v);
    auto fn = [&](const std::vector<Var>& in) { return op(in[0], params); };
    f2t2hit::verify::GradCheckOptions opt;
    opt.seed = draw;
    const auto r = f2t2hit::verify::finite_diff_grad_check(name, fn, leaves, opt);
    CHECK(r.coordinates >= 64);
    CHECK_MESSAGE(r.passed, name, " draw ", draw, " max rel err ", r.max_rel_error, " ",
                  r.failure);
  }
}

}  // namespace

TEST_CASE("layer_norm_2d normalizes each channel vector") {
  const Tensor x = rand_tensor({1, 4, 3, 3}, 1, -2, 3);
  auto p = f2t2hit::make_layer_norm(4);
  const Tensor y = f2t2hit::layer_norm_2d(Var(x), p).value();
  for (int64_t pos = 0; pos < 9; ++pos) {
    double mean = 0.0, var = 0.0;
    for (int64_t c = 0; c < 4; ++c) mean += y[c * 9 + pos] / 4.0;
    for (int64_t c = 0; c < 4; ++c) var += (y[c * 9 + pos] - mean) * (y[c * 9 + pos] - mean) / 4.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    double xm = 0.0, xv = 0.0;
    for (int64_t c = 0; c < 4; ++c) xm += x[c * 9 + pos] / 4.0;
    for (int64_t c = 0; c < 4; ++c) xv += (x[c * 9 + pos] - xm) * (x[c * 9 + pos] - xm) / 4.0;
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(std::abs(y[c * 9 + pos] - (x[c * 9 + pos] - xm) / std::sqrt(xv + 1e-6)) < 1e-12);
    }
  }
}

TEST_CASE("layer_norm_2d edge cases") {
  auto p = f2t2hit::make_layer_norm(3);
  const Tensor flat({1, 3, 2, 2}, 0.7);
  const Tensor normed = f2t2hit::layer_norm_2d(Var(flat), p).value();
  for (double v : normed.values()) CHECK(std::abs(v) < 1e-6);

  // Channel vectors already standardized: the affine pair is all that remains.
  const double s = std::sqrt(1.5);
  Tensor unit({1, 3, 1, 1}, std::vector<double>{-s, 0.0, s});
  auto affine = f2t2hit::make_layer_norm(3);
  affine.gamma.mutable_value().fill(2.0);
  affine.beta.mutable_value().fill(1.0);
  const Tensor y = f2t2hit::layer_norm_2d(Var(unit), affine).value();
  for (int64_t c = 0; c < 3; ++c) CHECK(y[c] == doctest::Approx(2.0 * unit[c] + 1.0).epsilon(1e-5));

  auto single = f2t2hit::make_layer_norm(1);
  CHECK_THROWS_AS(f2t2hit::layer_norm_2d(Var(Tensor({1, 1, 2, 2})), single), f2t2hit::ConfigError);
}

TEST_CASE("simple_gate multiplies channel halves") {
  CHECK(f2t2hit::simple_gate(Var(Tensor({1, 4, 2, 2}, 1.0))).value() == Tensor({1, 2, 2, 2}, 1.0));
  Tensor half({1, 4, 2, 2}, 3.0);
  for (int64_t i = 8; i < 16; ++i) half[i] = 0.0;
  const Tensor gated = f2t2hit::simple_gate(Var(half)).value();
  for (double v : gated.values()) CHECK(v == 0.0);
  const Tensor x = rand_tensor({2, 6, 2, 2}, 2);
  const Tensor y = f2t2hit::simple_gate(Var(x)).value();
  for (int64_t s = 0; s < 2; ++s)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 4; ++i)
        CHECK(y[(s * 3 + c) * 4 + i] == x[(s * 6 + c) * 4 + i] * x[(s * 6 + c + 3) * 4 + i]);
  CHECK_THROWS_AS(f2t2hit::simple_gate(Var(Tensor({1, 3, 2, 2}))), f2t2hit::ShapeError);
}

TEST_CASE("simplified channel attention") {
  std::mt19937_64 rng(3);
  auto p = f2t2hit::make_pointwise(3, 3, rng);
  CHECK(f2t2hit::simplified_channel_attention(Var(Tensor({1, 3, 4, 4})), p).value() ==
        Tensor({1, 3, 4, 4}));

  set_identity(p);
  Tensor constant({1, 3, 2, 2});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < 4; ++i) constant[c * 4 + i] = 0.5 + c;
  const Tensor sq = f2t2hit::simplified_channel_attention(Var(constant), p).value();
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < 4; ++i) CHECK(sq[c * 4 + i] == doctest::Approx((0.5 + c) * (0.5 + c)));

  testing::randomize(testing::visitor_of(p), 4);
  const Tensor x = rand_tensor({2, 3, 3, 5}, 5);
  const Tensor y = f2t2hit::simplified_channel_attention(Var(x), p).value();
  const Tensor& w = p.weight.value();
  const Tensor& b = p.bias.value();
  for (int64_t s = 0; s < 2; ++s) {
    std::vector<double> pooled(3, 0.0);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 15; ++i) pooled[c] += x[(s * 3 + c) * 15 + i] / 15.0;
    for (int64_t o = 0; o < 3; ++o) {
      double gate = b[o];
      for (int64_t c = 0; c < 3; ++c) gate += w[o * 3 + c] * pooled[c];
      for (int64_t i = 0; i < 15; ++i) {
        CHECK(std::abs(y[(s * 3 + o) * 15 + i] - x[(s * 3 + o) * 15 + i] * gate) < 1e-6);
      }
    }
  }
  auto wrong = f2t2hit::make_pointwise(4, 4, rng);
  CHECK_THROWS_AS(f2t2hit::simplified_channel_attention(Var(x), wrong), f2t2hit::ShapeError);
}

TEST_CASE("composite blocks are the identity at zero residual gains") {
  std::mt19937_64 rng(6);
  const Tensor x = rand_tensor({1, 8, 16, 16}, 7);
  auto naf = f2t2hit::make_naf_block(8, rng);
  CHECK(f2t2hit::naf_block(Var(x), naf).value() == x);
  auto hit = f2t2hit::make_hit_block(8, {4, 8, 16}, rng);
  CHECK(f2t2hit::hit_block(Var(x), hit).value() == x);
  auto f2t2 = f2t2hit::make_f2t2_block(8, rng);
  CHECK(f2t2hit::f2t2_block(Var(x), f2t2).value() == x);
}

TEST_CASE("blocks preserve shape") {
  std::mt19937_64 rng(8);
  auto naf = f2t2hit::make_naf_block(8, rng);
  testing::randomize(testing::visitor_of(naf), 9);
  CHECK(f2t2hit::naf_block(Var(rand_tensor({1, 8, 16, 16}, 1)), naf).shape() ==
        Shape{1, 8, 16, 16});
  auto hit = f2t2hit::make_hit_block(9, {4, 8, 16}, rng);
  testing::randomize(testing::visitor_of(hit), 10);
  CHECK(f2t2hit::hit_block(Var(rand_tensor({1, 9, 32, 32}, 2)), hit).shape() ==
        Shape{1, 9, 32, 32});
  auto f2t2 = f2t2hit::make_f2t2_block(4, rng);
  testing::randomize(testing::visitor_of(f2t2), 11);
  CHECK(f2t2hit::f2t2_block(Var(rand_tensor({1, 4, 16, 16}, 3)), f2t2).shape() ==
        Shape{1, 4, 16, 16});
  auto cffn = f2t2hit::make_channel_ffn(8, rng);
  CHECK(f2t2hit::channel_ffn(Var(rand_tensor({1, 8, 8, 8}, 4)), cffn).shape() == Shape{1, 8, 8, 8});
}

TEST_CASE("zero input with zero biases gives zero output") {
  std::mt19937_64 rng(12);
  const Tensor zeros({1, 6, 16, 16});
  auto cffn = f2t2hit::make_channel_ffn(6, rng);
  auto sffn = f2t2hit::make_spatial_ffn(6, rng);
  auto fft = f2t2hit::make_fft_layer(6, rng);
  auto attn = f2t2hit::make_hit_attention(6, {4, 8, 16}, rng);
  auto clear_bias = [](const std::string& name, Var& v) {
    if (name.size() >= 4 && name.substr(name.size() - 4) == "bias") v.mutable_value().fill(0.0);
  };
  f2t2hit::visit_params(cffn, "c", clear_bias);
  f2t2hit::visit_params(sffn, "s", clear_bias);
  f2t2hit::visit_params(fft, "f", clear_bias);
  f2t2hit::visit_params(attn, "a", clear_bias);
  CHECK(f2t2hit::channel_ffn(Var(zeros), cffn).value() == zeros);
  CHECK(f2t2hit::spatial_ffn(Var(zeros), sffn).value() == zeros);
  CHECK(f2t2hit::fft_layer(Var(zeros), fft).value() == zeros);
  CHECK(f2t2hit::hit_wsa(Var(zeros), attn).value() == zeros);
  const auto qkv = f2t2hit::dual_feature_extraction(Var(zeros), attn.dfe);
  CHECK(qkv.q.value() == zeros);
  CHECK(qkv.k.value() == zeros);
  CHECK(qkv.v.value() == zeros);
}

TEST_CASE("dual feature extraction") {
  std::mt19937_64 rng(13);
  auto p = f2t2hit::make_dfe(4, rng);
  const Tensor x = rand_tensor({1, 4, 8, 8}, 14);

  auto constructed = p;
  constructed = f2t2hit::make_dfe(4, rng);
  set_identity(constructed.query);
  set_identity(constructed.key);
  zero_all(constructed.spatial_value);
  zero_all(constructed.channel_value);
  zero_all(constructed.channel_gate);
  const auto id = f2t2hit::dual_feature_extraction(Var(x), constructed);
  CHECK(id.q.value() == x);
  CHECK(id.k.value() == x);
  CHECK_FALSE(p.key.bias.defined());
  const Tensor v0 = id.v.value();
  for (double v : v0.values()) CHECK(v == 0.0);

  for (int64_t tile : {int64_t{0}, int64_t{4}}) {
    const auto out = f2t2hit::dual_feature_extraction(Var(x), p, tile);
    CHECK(f2t2hit::max_abs_diff(out.q.value(), pw_loops(x, p.query.weight.value(),
                                                        p.query.bias.value())) < 1e-6);
    CHECK(f2t2hit::max_abs_diff(out.k.value(),
                                pw_loops(x, p.key.weight.value(), Tensor({4}))) < 1e-6);
    const Tensor spatial = dw_loops(x, p.spatial_value.weight.value(), p.spatial_value.bias.value());
    const Tensor cv = pw_loops(x, p.channel_value.weight.value(), p.channel_value.bias.value());
    const int64_t t = tile == 0 ? 8 : tile;
    Tensor v_ref(x.shape());
    for (int64_t ty = 0; ty < 8 / t; ++ty)
      for (int64_t tx = 0; tx < 8 / t; ++tx) {
        Tensor pooled({1, 4, 1, 1});
        for (int64_t c = 0; c < 4; ++c)
          for (int64_t y = 0; y < t; ++y)
            for (int64_t xx = 0; xx < t; ++xx)
              pooled[c] += x.at(0, c, ty * t + y, tx * t + xx) / static_cast<double>(t * t);
        const Tensor g = pw_loops(pooled, p.channel_gate.weight.value(), p.channel_gate.bias.value());
        for (int64_t c = 0; c < 4; ++c)
          for (int64_t y = 0; y < t; ++y)
            for (int64_t xx = 0; xx < t; ++xx) {
              const int64_t yy = ty * t + y, xi = tx * t + xx;
              v_ref.at(0, c, yy, xi) = spatial.at(0, c, yy, xi) +
                                       cv.at(0, c, yy, xi) / (1.0 + std::exp(-g[c]));
            }
      }
    CHECK(f2t2hit::max_abs_diff(out.v.value(), v_ref) < 1e-6);
  }
}

TEST_CASE("single-window W-SA matches brute-force attention") {
  std::mt19937_64 rng(15);
  auto p = f2t2hit::make_hit_attention(6, {4}, rng);
  set_identity(p.fuse);
  const Tensor x = rand_tensor({1, 6, 4, 4}, 16);
  const Tensor y = f2t2hit::hit_wsa(Var(x), p).value();
  const auto qkv = f2t2hit::dual_feature_extraction(Var(x), p.dfe, 4);
  const Tensor& q = qkv.q.value();
  const Tensor& k = qkv.k.value();
  const Tensor& v = qkv.v.value();
  const Tensor spatial = f2t2hit::verify::attention_oracle(window_of(q, 0, 3, 0, 0, 4),
                                                           window_of(k, 0, 3, 0, 0, 4),
                                                           window_of(v, 0, 3, 0, 0, 4));
  const Tensor channel = channel_attention_loops(
      window_of(q, 3, 3, 0, 0, 4), window_of(k, 3, 3, 0, 0, 4), window_of(v, 3, 3, 0, 0, 4));
  for (int64_t i = 0; i < 48; ++i) {
    CHECK(std::abs(y[i] - spatial[i]) < 1e-5);
    CHECK(std::abs(y[48 + i] - channel[i]) < 1e-5);
  }
}

TEST_CASE("hierarchical W-SA matches per-window oracles in every group") {
  std::mt19937_64 rng(17);
  auto p = f2t2hit::make_hit_attention(13, {4, 8, 16}, rng);
  set_identity(p.fuse);
  const Tensor x = rand_tensor({1, 13, 16, 32}, 18);
  const Tensor y = f2t2hit::hit_wsa(Var(x), p).value();
  const auto qkv = f2t2hit::dual_feature_extraction(Var(x), p.dfe, 16);
  const auto groups = f2t2hit::hit_group_channels(13, 3);
  CHECK(groups == std::vector<int64_t>{4, 4, 5});
  int64_t offset = 0;
  for (size_t g = 0; g < 3; ++g) {
    const int64_t w = p.windows[g];
    const int64_t s_ch = groups[g] / 2, c_ch = groups[g] - s_ch;
    for (int64_t wy = 0; wy < 16 / w; ++wy)
      for (int64_t wx = 0; wx < 32 / w; ++wx) {
        // Pool keys/values onto the 4x4 lattice by direct averaging.
        const int64_t cell = w / 4;
        auto pooled = [&](const Tensor& t) {
          Tensor out({s_ch, 4, 4});
          for (int64_t c = 0; c < s_ch; ++c)
            for (int64_t gy = 0; gy < 4; ++gy)
              for (int64_t gx = 0; gx < 4; ++gx) {
                double acc = 0.0;
                for (int64_t a = 0; a < cell; ++a)
                  for (int64_t b = 0; b < cell; ++b)
                    acc += t.at(0, offset + c, wy * w + gy * cell + a, wx * w + gx * cell + b);
                out.at(c, gy, gx) = acc / static_cast<double>(cell * cell);
              }
          return out;
        };
        const Tensor sref = f2t2hit::verify::attention_oracle(
            window_of(qkv.q.value(), offset, s_ch, wy * w, wx * w, w), pooled(qkv.k.value()),
            pooled(qkv.v.value()));
        const Tensor cref = channel_attention_loops(
            window_of(qkv.q.value(), offset + s_ch, c_ch, wy * w, wx * w, w),
            window_of(qkv.k.value(), offset + s_ch, c_ch, wy * w, wx * w, w),
            window_of(qkv.v.value(), offset + s_ch, c_ch, wy * w, wx * w, w));
        const Tensor sout = window_of(y, offset, s_ch, wy * w, wx * w, w);
        const Tensor cout = window_of(y, offset + s_ch, c_ch, wy * w, wx * w, w);
        CHECK(f2t2hit::max_abs_diff(sout, sref) < 1e-9);
        CHECK(f2t2hit::max_abs_diff(cout, cref) < 1e-9);
      }
    offset += groups[g];
  }
}

TEST_CASE("every attention row sums to one") {
  const Tensor q = rand_tensor({2, 3, 16, 16}, 19, -3, 3);
  const Tensor k = rand_tensor({2, 3, 16, 16}, 20, -3, 3);
  for (int64_t w : {4, 8, 16}) {
    for (const Tensor& a : {f2t2hit::ops::spatial_self_correlation_weights(q, k, w, 4),
                            f2t2hit::ops::channel_self_correlation_weights(q, k, w)}) {
      const int64_t cols = a.size(2);
      for (int64_t row = 0; row < a.size(0) * a.size(1); ++row) {
        double total = 0.0;
        for (int64_t j = 0; j < cols; ++j) total += a[row * cols + j];
        CHECK(std::abs(total - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("W-SA is local to each largest window") {
  std::mt19937_64 rng(21);
  auto p = f2t2hit::make_hit_attention(6, {4, 8, 16}, rng);
  set_delta(p.dfe.spatial_value, 0.8);
  const Tensor x = rand_tensor({1, 6, 32, 48}, 22);
  for (auto [wy, wx] : {std::pair<int64_t, int64_t>{0, 0}, {1, 1}, {0, 2}}) {
    Tensor masked(x.shape());
    for (int64_t c = 0; c < 6; ++c)
      for (int64_t y = wy * 16; y < wy * 16 + 16; ++y)
        for (int64_t xx = wx * 16; xx < wx * 16 + 16; ++xx) masked.at(0, c, y, xx) = x.at(0, c, y, xx);
    const Tensor full = f2t2hit::hit_wsa(Var(x), p).value();
    const Tensor part = f2t2hit::hit_wsa(Var(masked), p).value();
    CHECK(window_of(full, 0, 6, wy * 16, wx * 16, 16) == window_of(part, 0, 6, wy * 16, wx * 16, 16));
  }
}

TEST_CASE("W-SA rejects bad configurations") {
  std::mt19937_64 rng(23);
  auto p = f2t2hit::make_hit_attention(6, {4, 8, 16}, rng);
  CHECK_THROWS_AS(f2t2hit::hit_wsa(Var(Tensor({1, 6, 24, 16})), p), f2t2hit::ShapeError);
  CHECK_THROWS_AS(f2t2hit::hit_wsa(Var(Tensor({1, 5, 16, 16})), p), f2t2hit::ConfigError);
  CHECK_THROWS_AS(f2t2hit::hit_group_channels(5, 3), f2t2hit::ConfigError);
}

TEST_CASE("spatial FFN with delta kernels reduces to a scaled pointwise path") {
  std::mt19937_64 rng(24);
  auto p = f2t2hit::make_spatial_ffn(4, rng);
  set_delta(p.dw3);
  set_delta(p.dw5);
  set_delta(p.dw7);
  const Tensor x = rand_tensor({1, 4, 6, 6}, 25);
  Tensor hidden = pw_loops(x, p.expand.weight.value(), p.expand.bias.value());
  for (double& v : hidden.values()) v = 3.0 * gelu_ref(v);
  const Tensor ref = pw_loops(hidden, p.project.weight.value(), p.project.bias.value());
  CHECK(f2t2hit::max_abs_diff(f2t2hit::spatial_ffn(Var(x), p).value(), ref) < 1e-12);
}

TEST_CASE("frequency branch is the identity with complex-identity kernels") {
  std::mt19937_64 rng(26);
  for (const Shape& shape : {Shape{1, 3, 16, 16}, Shape{2, 2, 7, 9}}) {
    auto p = f2t2hit::make_fft_layer(shape[1], rng);
    zero_all(p.spatial_dw);
    zero_all(p.spatial_pw);
    set_identity(p.frequency_in);
    set_identity(p.frequency_out);
    set_identity(p.fuse);
    p.frequency_activation = false;
    const Tensor x = rand_tensor(shape, 27);
    CHECK(f2t2hit::max_abs_diff(f2t2hit::fft_layer(Var(x), p).value(), x) < 1e-5);
  }
  auto p = f2t2hit::make_fft_layer(2, rng);
  CHECK_THROWS_AS(f2t2hit::fft_layer(Var(Tensor({1, 2, 1, 8})), p), f2t2hit::ConfigError);
}

TEST_CASE("block gradients match central differences") {
  std::mt19937_64 rng(30);
  auto naf = f2t2hit::make_naf_block(4, rng);
  grad_check_block("naf_block", naf, {1, 4, 8, 8},
                   [](const Var& x, const auto& p) { return f2t2hit::naf_block(x, p); });
  auto cffn = f2t2hit::make_channel_ffn(4, rng);
  grad_check_block("channel_ffn", cffn, {1, 4, 8, 8},
                   [](const Var& x, const auto& p) { return f2t2hit::channel_ffn(x, p); });
  auto sffn = f2t2hit::make_spatial_ffn(4, rng);
  grad_check_block("spatial_ffn", sffn, {1, 4, 8, 8},
                   [](const Var& x, const auto& p) { return f2t2hit::spatial_ffn(x, p); });
  auto fft = f2t2hit::make_fft_layer(2, rng);
  grad_check_block("fft_layer", fft, {1, 2, 8, 8},
                   [](const Var& x, const auto& p) { return f2t2hit::fft_layer(x, p); });
  grad_check_block("fft_layer_odd", fft, {2, 2, 7, 5},
                   [](const Var& x, const auto& p) { return f2t2hit::fft_layer(x, p); });
  auto hit = f2t2hit::make_hit_block(12, {4, 8, 16}, rng);
  grad_check_block("hit_block", hit, {1, 12, 16, 16},
                   [](const Var& x, const auto& p) { return f2t2hit::hit_block(x, p); });
  auto f2t2 = f2t2hit::make_f2t2_block(4, rng);
  grad_check_block("f2t2_block", f2t2, {1, 4, 8, 8},
                   [](const Var& x, const auto& p) { return f2t2hit::f2t2_block(x, p); });
}

TEST_CASE("block outputs are deterministic") {
  std::mt19937_64 a(31), b(31);
  auto p1 = f2t2hit::make_hit_block(6, {4, 8, 16}, a);
  auto p2 = f2t2hit::make_hit_block(6, {4, 8, 16}, b);
  testing::randomize(testing::visitor_of(p1), 5);
  testing::randomize(testing::visitor_of(p2), 5);
  const Tensor x = rand_tensor({1, 6, 16, 16}, 32);
  CHECK(f2t2hit::hit_block(Var(x), p1).value() == f2t2hit::hit_block(Var(x), p2).value());
}
