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

#include "f2t2hit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <numbers>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/fft.hpp"
#include "f2t2hit/windows.hpp"

namespace f2t2hit::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ColVec = Eigen::Map<Eigen::VectorXd>;
using ConstColVec = Eigen::Map<const Eigen::VectorXd>;

std::atomic<bool> g_gradient_fault{false};

const Shape kScalar{1};

void require_4d(const Tensor& t, const char* op) {
  if (t.dim() != 4) {
    throw ShapeError(std::string(op) + ": expected NxCxHxW, got " + shape_string(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_vector(const Var& v, int64_t n, const char* op, const char* what) {
  if (!v.defined()) return;
  if (v.value().dim() != 1 || v.value().size(0) != n) {
    throw ShapeError(std::string(op) + ": " + what + " must have " + std::to_string(n) +
                     " entries, got " + shape_string(v.shape()));
  }
}

Tensor* grad_of(Node& self, size_t i) {
  Node* in = self.inputs[i].get();
  return in && in->requires_grad ? &in->grad_buffer() : nullptr;
}

const Tensor& value_of(Node& self, size_t i) { return self.inputs[i]->value; }

template <typename F>
Var unary(const Var& x, F&& fwd_deriv_pair) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  Tensor deriv(in.shape());
  for (int64_t i = 0; i < in.numel(); ++i) {
    auto [y, d] = fwd_deriv_pair(in[i]);
    out[i] = y;
    deriv[i] = d;
  }
  return record(std::move(out), {x}, [deriv = std::move(deriv)](Node& self) {
    if (Tensor* gx = grad_of(self, 0)) {
      for (int64_t i = 0; i < deriv.numel(); ++i) (*gx)[i] += self.grad[i] * deriv[i];
    }
  });
}

}  // namespace

void set_gradient_fault(bool enabled) noexcept { g_gradient_fault = enabled; }
bool gradient_fault() noexcept { return g_gradient_fault; }

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return record(std::move(out), {a, b}, [](Node& self) {
    for (size_t k = 0; k < 2; ++k) {
      if (Tensor* g = grad_of(self, k)) {
        for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return record(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return record(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = value_of(self, 0);
    const Tensor& bv = value_of(self, 1);
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "div");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] /= b.value()[i];
  return record(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = value_of(self, 0);
    const Tensor& bv = value_of(self, 1);
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] / bv[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var add_scalar(const Var& x, double c) {
  Tensor out = x.value();
  for (double& v : out.values()) v += c;
  return record(std::move(out), {x}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var scale(const Var& x, double c) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= c;
  return record(std::move(out), {x}, [c](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += c * self.grad[i];
    }
  });
}

Var scale_by(const Var& gain, const Var& x) {
  if (gain.numel() != 1) {
    throw ShapeError("scale_by: gain must hold one value, got " + shape_string(gain.shape()));
  }
  const double s = gain.value()[0];
  Tensor out = x.value();
  for (double& v : out.values()) v *= s;
  return record(std::move(out), {gain, x}, [](Node& self) {
    const double s = value_of(self, 0)[0];
    const Tensor& xv = value_of(self, 1);
    if (Tensor* g = grad_of(self, 0)) {
      double acc = 0.0;
      for (int64_t i = 0; i < xv.numel(); ++i) acc += self.grad[i] * xv[i];
      (*g)[0] += acc;
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += s * self.grad[i];
    }
  });
}

Var gelu(const Var& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double sign = gradient_fault() ? -1.0 : 1.0;
  return unary(x, [&](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
    return std::pair{v * cdf, sign * (cdf + v * pdf)};
  });
}

Var sigmoid(const Var& x) {
  return unary(x, [](double v) {
    const double y = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::pair{y, y * (1.0 - y)};
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return record(Tensor(kScalar, acc), {x}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (double& v : g->values()) v += self.grad[0];
    }
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.numel());
  return scale(sum(x), 1.0 / n);
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  require_same(x.value(), weights, "weighted_sum");
  double acc = 0.0;
  for (int64_t i = 0; i < weights.numel(); ++i) acc += x.value()[i] * weights[i];
  return record(Tensor(kScalar, acc), {x}, [weights](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[0] * weights[i];
    }
  });
}

Var mean_abs_error(const Var& pred, const Tensor& target) {
  require_same(pred.value(), target, "mean_abs_error");
  const int64_t n = target.numel();
  if (n == 0) throw ShapeError("mean_abs_error: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pred.value()[i] - target[i]);
  return record(Tensor(kScalar, acc / static_cast<double>(n)), {pred}, [target](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      const Tensor& p = value_of(self, 0);
      const double s = self.grad[0] / static_cast<double>(p.numel());
      for (int64_t i = 0; i < p.numel(); ++i) {
        const double d = p[i] - target[i];
        (*g)[i] += d > 0 ? s : (d < 0 ? -s : 0.0);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolutions

Var pointwise_conv(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& in = x.value();
  require_4d(in, "pointwise_conv");
  const Tensor& w = weight.value();
  if (w.dim() != 2 || w.size(1) != in.size(1)) {
    throw ShapeError("pointwise_conv: weight " + shape_string(w.shape()) + " for input " +
                     shape_string(in.shape()));
  }
  const int64_t n = in.size(0), cin = in.size(1), cout = w.size(0);
  const int64_t p = in.size(2) * in.size(3);
  require_vector(bias, cout, "pointwise_conv", "bias");
  Tensor out({n, cout, in.size(2), in.size(3)});
  ConstMatMap wm(w.data(), cout, cin);
  for (int64_t b = 0; b < n; ++b) {
    MatMap ym(out.data() + b * cout * p, cout, p);
    ym.noalias() = wm * ConstMatMap(in.data() + b * cin * p, cin, p);
    if (bias.defined()) ym.colwise() += ConstColVec(bias.value().data(), cout);
  }
  return record(std::move(out), {x, weight, bias}, [n, cin, cout, p](Node& self) {
    const Tensor& xin = value_of(self, 0);
    const Tensor& wv = value_of(self, 1);
    Tensor* gx = grad_of(self, 0);
    Tensor* gw = grad_of(self, 1);
    Tensor* gb = grad_of(self, 2);
    ConstMatMap wm(wv.data(), cout, cin);
    for (int64_t b = 0; b < n; ++b) {
      ConstMatMap dy(self.grad.data() + b * cout * p, cout, p);
      if (gx) MatMap(gx->data() + b * cin * p, cin, p).noalias() += wm.transpose() * dy;
      if (gw) {
        MatMap(gw->data(), cout, cin).noalias() +=
            dy * ConstMatMap(xin.data() + b * cin * p, cin, p).transpose();
      }
      if (gb) ColVec(gb->data(), cout) += dy.rowwise().sum();
    }
  });
}

Var depthwise_conv(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& in = x.value();
  require_4d(in, "depthwise_conv");
  const Tensor& w = weight.value();
  const int64_t n = in.size(0), c = in.size(1), h = in.size(2), wd = in.size(3);
  if (w.dim() != 3 || w.size(0) != c || w.size(1) != w.size(2) || w.size(1) % 2 == 0) {
    throw ShapeError("depthwise_conv: weight " + shape_string(w.shape()) + " for input " +
                     shape_string(in.shape()));
  }
  require_vector(bias, c, "depthwise_conv", "bias");
  const int64_t k = w.size(1), r = k / 2;
  Tensor out(in.shape());
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* src = in.data() + (b * c + ch) * h * wd;
      double* dst = out.data() + (b * c + ch) * h * wd;
      const double* kern = w.data() + ch * k * k;
      if (bias.defined()) std::fill(dst, dst + h * wd, bias.value()[ch]);
      for (int64_t ky = 0; ky < k; ++ky) {
        const int64_t dy = ky - r;
        const int64_t y0 = std::max<int64_t>(0, -dy), y1 = std::min(h, h - dy);
        for (int64_t kx = 0; kx < k; ++kx) {
          const int64_t dx = kx - r;
          const int64_t x0 = std::max<int64_t>(0, -dx), x1 = std::min(wd, wd - dx);
          const double wv = kern[ky * k + kx];
          for (int64_t y = y0; y < y1; ++y) {
            const double* irow = src + (y + dy) * wd + dx;
            double* orow = dst + y * wd;
            for (int64_t xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
          }
        }
      }
    }
  }
  return record(std::move(out), {x, weight, bias}, [n, c, h, wd, k, r](Node& self) {
    const Tensor& xin = value_of(self, 0);
    const Tensor& wv = value_of(self, 1);
    Tensor* gx = grad_of(self, 0);
    Tensor* gw = grad_of(self, 1);
    Tensor* gb = grad_of(self, 2);
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t ch = 0; ch < c; ++ch) {
        const int64_t off = (b * c + ch) * h * wd;
        const double* dout = self.grad.data() + off;
        const double* src = xin.data() + off;
        const double* kern = wv.data() + ch * k * k;
        if (gb) {
          double acc = 0.0;
          for (int64_t i = 0; i < h * wd; ++i) acc += dout[i];
          (*gb)[ch] += acc;
        }
        for (int64_t ky = 0; ky < k; ++ky) {
          const int64_t dy = ky - r;
          const int64_t y0 = std::max<int64_t>(0, -dy), y1 = std::min(h, h - dy);
          for (int64_t kx = 0; kx < k; ++kx) {
            const int64_t dx = kx - r;
            const int64_t x0 = std::max<int64_t>(0, -dx), x1 = std::min(wd, wd - dx);
            const double wk = kern[ky * k + kx];
            double acc = 0.0;
            for (int64_t y = y0; y < y1; ++y) {
              const double* grow = dout + y * wd;
              const int64_t ioff = (y + dy) * wd + dx;
              if (gx) {
                double* drow = gx->data() + off + ioff;
                for (int64_t xx = x0; xx < x1; ++xx) drow[xx] += wk * grow[xx];
              }
              if (gw) {
                const double* irow = src + ioff;
                for (int64_t xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
              }
            }
            if (gw) (*gw)[ch * k * k + ky * k + kx] += acc;
          }
        }
      }
    }
  });
}

namespace {

struct ConvGeometry {
  int64_t cin, h, w, kh, kw, stride, pad, oh, ow;
  int64_t rows() const { return cin * kh * kw; }
  int64_t cols() const { return oh * ow; }
};

void im2col(const double* src, const ConvGeometry& g, double* cols) {
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((ci * g.kh + ky) * g.kw + kx) * g.cols();
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t iy = oy * g.stride - g.pad + ky;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t ix = ox * g.stride - g.pad + kx;
            const bool inside = iy >= 0 && iy < g.h && ix >= 0 && ix < g.w;
            row[oy * g.ow + ox] = inside ? src[(ci * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* dst) {
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((ci * g.kh + ky) * g.kw + kx) * g.cols();
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[(ci * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  const Tensor& in = x.value();
  require_4d(in, "conv2d");
  const Tensor& w = weight.value();
  if (w.dim() != 4 || w.size(1) != in.size(1)) {
    throw ShapeError("conv2d: weight " + shape_string(w.shape()) + " for input " +
                     shape_string(in.shape()));
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: invalid stride/padding");
  ConvGeometry g{in.size(1), in.size(2), in.size(3), w.size(2), w.size(3), stride, padding, 0, 0};
  g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
  g.ow = (g.w + 2 * padding - g.kw) / stride + 1;
  if (g.oh < 1 || g.ow < 1) throw ShapeError("conv2d: kernel larger than padded input");
  const int64_t n = in.size(0), cout = w.size(0);
  require_vector(bias, cout, "conv2d", "bias");
  Tensor out({n, cout, g.oh, g.ow});
  std::vector<double> cols(static_cast<size_t>(g.rows() * g.cols()));
  ConstMatMap wm(w.data(), cout, g.rows());
  for (int64_t b = 0; b < n; ++b) {
    im2col(in.data() + b * g.cin * g.h * g.w, g, cols.data());
    MatMap ym(out.data() + b * cout * g.cols(), cout, g.cols());
    ym.noalias() = wm * ConstMatMap(cols.data(), g.rows(), g.cols());
    if (bias.defined()) ym.colwise() += ConstColVec(bias.value().data(), cout);
  }
  return record(std::move(out), {x, weight, bias}, [g, n, cout](Node& self) {
    const Tensor& xin = value_of(self, 0);
    const Tensor& wv = value_of(self, 1);
    Tensor* gx = grad_of(self, 0);
    Tensor* gw = grad_of(self, 1);
    Tensor* gb = grad_of(self, 2);
    ConstMatMap wm(wv.data(), cout, g.rows());
    std::vector<double> cols(static_cast<size_t>(g.rows() * g.cols()));
    RowMat dcols;
    for (int64_t b = 0; b < n; ++b) {
      ConstMatMap dy(self.grad.data() + b * cout * g.cols(), cout, g.cols());
      if (gw) {
        im2col(xin.data() + b * g.cin * g.h * g.w, g, cols.data());
        MatMap(gw->data(), cout, g.rows()).noalias() +=
            dy * ConstMatMap(cols.data(), g.rows(), g.cols()).transpose();
      }
      if (gb) ColVec(gb->data(), cout) += dy.rowwise().sum();
      if (gx) {
        dcols.noalias() = wm.transpose() * dy;
        col2im(dcols.data(), g, gx->data() + b * g.cin * g.h * g.w);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization

Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& in = x.value();
  require_4d(in, "layer_norm");
  const int64_t n = in.size(0), c = in.size(1), p = in.size(2) * in.size(3);
  if (c < 2) throw ConfigError("layer_norm: needs at least 2 channels, got 1");
  require_vector(gamma, c, "layer_norm", "gamma");
  require_vector(beta, c, "layer_norm", "beta");
  if (!gamma.defined() || !beta.defined()) throw ConfigError("layer_norm: missing affine pair");
  Tensor xhat(in.shape());
  Tensor rstd({n, p});
  Tensor out(in.shape());
  std::vector<double> mu(static_cast<size_t>(p)), var(static_cast<size_t>(p));
  const double inv_c = 1.0 / static_cast<double>(c);
  for (int64_t b = 0; b < n; ++b) {
    const double* src = in.data() + b * c * p;
    std::fill(mu.begin(), mu.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t i = 0; i < p; ++i) mu[i] += src[ch * p + i];
    }
    for (int64_t i = 0; i < p; ++i) mu[i] *= inv_c;
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t i = 0; i < p; ++i) {
        const double d = src[ch * p + i] - mu[i];
        var[i] += d * d;
      }
    }
    double* rs = rstd.data() + b * p;
    for (int64_t i = 0; i < p; ++i) rs[i] = 1.0 / std::sqrt(var[i] * inv_c + eps);
    for (int64_t ch = 0; ch < c; ++ch) {
      const double gv = gamma.value()[ch], bv = beta.value()[ch];
      double* xh = xhat.data() + (b * c + ch) * p;
      double* dst = out.data() + (b * c + ch) * p;
      for (int64_t i = 0; i < p; ++i) {
        xh[i] = (src[ch * p + i] - mu[i]) * rs[i];
        dst[i] = gv * xh[i] + bv;
      }
    }
  }
  return record(std::move(out), {x, gamma, beta},
                [xhat = std::move(xhat), rstd = std::move(rstd), n, c, p](Node& self) {
                  const Tensor& gv = value_of(self, 1);
                  Tensor* gx = grad_of(self, 0);
                  Tensor* gg = grad_of(self, 1);
                  Tensor* gbeta = grad_of(self, 2);
                  const double inv_c = 1.0 / static_cast<double>(c);
                  std::vector<double> a(static_cast<size_t>(p)), bsum(static_cast<size_t>(p));
                  for (int64_t b = 0; b < n; ++b) {
                    for (int64_t ch = 0; ch < c; ++ch) {
                      const double* dy = self.grad.data() + (b * c + ch) * p;
                      const double* xh = xhat.data() + (b * c + ch) * p;
                      double s1 = 0.0, s2 = 0.0;
                      for (int64_t i = 0; i < p; ++i) {
                        s1 += dy[i] * xh[i];
                        s2 += dy[i];
                      }
                      if (gg) (*gg)[ch] += s1;
                      if (gbeta) (*gbeta)[ch] += s2;
                    }
                    if (!gx) continue;
                    std::fill(a.begin(), a.end(), 0.0);
                    std::fill(bsum.begin(), bsum.end(), 0.0);
                    for (int64_t ch = 0; ch < c; ++ch) {
                      const double* dy = self.grad.data() + (b * c + ch) * p;
                      const double* xh = xhat.data() + (b * c + ch) * p;
                      const double g = gv[ch];
                      for (int64_t i = 0; i < p; ++i) {
                        const double dxh = dy[i] * g;
                        a[i] += dxh;
                        bsum[i] += dxh * xh[i];
                      }
                    }
                    const double* rs = rstd.data() + b * p;
                    for (int64_t ch = 0; ch < c; ++ch) {
                      const double* dy = self.grad.data() + (b * c + ch) * p;
                      const double* xh = xhat.data() + (b * c + ch) * p;
                      double* dx = gx->data() + (b * c + ch) * p;
                      const double g = gv[ch];
                      for (int64_t i = 0; i < p; ++i) {
                        dx[i] += rs[i] * (dy[i] * g - a[i] * inv_c - xh[i] * bsum[i] * inv_c);
                      }
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Rearrangements

Var slice_channels(const Var& x, int64_t begin, int64_t count) {
  const Tensor& in = x.value();
  require_4d(in, "slice_channels");
  const int64_t n = in.size(0), c = in.size(1), p = in.size(2) * in.size(3);
  if (begin < 0 || count < 1 || begin + count > c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", +" +
                     std::to_string(count) + ") outside " + std::to_string(c) + " channels");
  }
  Tensor out({n, count, in.size(2), in.size(3)});
  for (int64_t b = 0; b < n; ++b) {
    const double* src = in.data() + (b * c + begin) * p;
    std::copy(src, src + count * p, out.data() + b * count * p);
  }
  return record(std::move(out), {x}, [n, c, p, begin, count](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t b = 0; b < n; ++b) {
        double* dst = g->data() + (b * c + begin) * p;
        const double* src = self.grad.data() + b * count * p;
        for (int64_t i = 0; i < count * p; ++i) dst[i] += src[i];
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor& first = parts.front().value();
  require_4d(first, "concat_channels");
  const int64_t n = first.size(0), h = first.size(2), w = first.size(3), p = h * w;
  std::vector<int64_t> offsets;
  int64_t total = 0;
  for (const Var& part : parts) {
    const Tensor& t = part.value();
    require_4d(t, "concat_channels");
    if (t.size(0) != n || t.size(2) != h || t.size(3) != w) {
      throw ShapeError("concat_channels: " + shape_string(t.shape()) + " vs " +
                       shape_string(first.shape()));
    }
    offsets.push_back(total);
    total += t.size(1);
  }
  Tensor out({n, total, h, w});
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    const int64_t ck = t.size(1);
    for (int64_t b = 0; b < n; ++b) {
      std::copy(t.data() + b * ck * p, t.data() + (b + 1) * ck * p,
                out.data() + (b * total + offsets[k]) * p);
    }
  }
  return record(std::move(out), parts, [offsets, n, total, p](Node& self) {
    for (size_t k = 0; k < self.inputs.size(); ++k) {
      Tensor* g = grad_of(self, k);
      if (!g) continue;
      const int64_t ck = g->size(1);
      for (int64_t b = 0; b < n; ++b) {
        const double* src = self.grad.data() + (b * total + offsets[k]) * p;
        double* dst = g->data() + b * ck * p;
        for (int64_t i = 0; i < ck * p; ++i) dst[i] += src[i];
      }
    }
  });
}

Var avg_pool(const Var& x, int64_t tile_h, int64_t tile_w) {
  const Tensor& in = x.value();
  require_4d(in, "avg_pool");
  const int64_t n = in.size(0), c = in.size(1), h = in.size(2), w = in.size(3);
  if (tile_h < 1 || tile_w < 1 || h % tile_h != 0 || w % tile_w != 0) {
    throw ShapeError("avg_pool: tile " + std::to_string(tile_h) + "x" + std::to_string(tile_w) +
                     " does not divide " + shape_string(in.shape()));
  }
  const int64_t oh = h / tile_h, ow = w / tile_w;
  const double inv = 1.0 / static_cast<double>(tile_h * tile_w);
  Tensor out({n, c, oh, ow});
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const double* src = in.data() + plane * h * w;
    double* dst = out.data() + plane * oh * ow;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) dst[(y / tile_h) * ow + xx / tile_w] += src[y * w + xx];
    }
    for (int64_t i = 0; i < oh * ow; ++i) dst[i] *= inv;
  }
  return record(std::move(out), {x}, [n, c, h, w, tile_h, tile_w, oh, ow, inv](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (int64_t plane = 0; plane < n * c; ++plane) {
        const double* src = self.grad.data() + plane * oh * ow;
        double* dst = g->data() + plane * h * w;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t xx = 0; xx < w; ++xx) {
            dst[y * w + xx] += inv * src[(y / tile_h) * ow + xx / tile_w];
          }
        }
      }
    }
  });
}

Var mul_broadcast(const Var& x, const Var& s) {
  const Tensor& in = x.value();
  const Tensor& sv = s.value();
  require_4d(in, "mul_broadcast");
  require_4d(sv, "mul_broadcast");
  const int64_t n = in.size(0), c = in.size(1), h = in.size(2), w = in.size(3);
  const int64_t sh = sv.size(2), sw = sv.size(3);
  if (sv.size(0) != n || sv.size(1) != c || h % sh != 0 || w % sw != 0) {
    throw ShapeError("mul_broadcast: " + shape_string(sv.shape()) + " cannot scale " +
                     shape_string(in.shape()));
  }
  const int64_t th = h / sh, tw = w / sw;
  Tensor out(in.shape());
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const double* src = in.data() + plane * h * w;
    const double* sc = sv.data() + plane * sh * sw;
    double* dst = out.data() + plane * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) dst[y * w + xx] = src[y * w + xx] * sc[(y / th) * sw + xx / tw];
    }
  }
  return record(std::move(out), {x, s}, [n, c, h, w, sh, sw, th, tw](Node& self) {
    const Tensor& xin = value_of(self, 0);
    const Tensor& sv = value_of(self, 1);
    Tensor* gx = grad_of(self, 0);
    Tensor* gs = grad_of(self, 1);
    for (int64_t plane = 0; plane < n * c; ++plane) {
      const double* dy = self.grad.data() + plane * h * w;
      const double* src = xin.data() + plane * h * w;
      const double* sc = sv.data() + plane * sh * sw;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t xx = 0; xx < w; ++xx) {
          const int64_t si = (y / th) * sw + xx / tw;
          if (gx) (*gx)[plane * h * w + y * w + xx] += dy[y * w + xx] * sc[si];
          if (gs) (*gs)[plane * sh * sw + si] += dy[y * w + xx] * src[y * w + xx];
        }
      }
    }
  });
}

Var pixel_shuffle(const Var& x, int64_t factor) {
  const Tensor& in = x.value();
  require_4d(in, "pixel_shuffle");
  const int64_t r = factor, r2 = factor * factor;
  if (r < 1 || in.size(1) % r2 != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(in.size(1)) +
                     " channels not divisible by " + std::to_string(r2));
  }
  const int64_t n = in.size(0), c = in.size(1) / r2, h = in.size(2), w = in.size(3);
  Tensor out({n, c, h * r, w * r});
  auto index = [=](int64_t b, int64_t ch, int64_t i, int64_t j, int64_t y, int64_t xx) {
    return std::pair{((b * c * r2 + ch * r2 + i * r + j) * h + y) * w + xx,
                     ((b * c + ch) * h * r + y * r + i) * w * r + xx * r + j};
  };
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < r; ++j)
          for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) {
              auto [src, dst] = index(b, ch, i, j, y, xx);
              out[dst] = in[src];
            }
  return record(std::move(out), {x}, [=](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (int64_t b = 0; b < n; ++b)
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < r; ++j)
            for (int64_t y = 0; y < h; ++y)
              for (int64_t xx = 0; xx < w; ++xx) {
                auto [src, dst] = index(b, ch, i, j, y, xx);
                (*g)[src] += self.grad[dst];
              }
  });
}

Var crop(const Var& x, int64_t top, int64_t left, int64_t height, int64_t width) {
  const Tensor& in = x.value();
  require_4d(in, "crop");
  const int64_t n = in.size(0), c = in.size(1), h = in.size(2), w = in.size(3);
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > h || left + width > w) {
    throw ShapeError("crop window outside " + shape_string(in.shape()));
  }
  Tensor out({n, c, height, width});
  for (int64_t plane = 0; plane < n * c; ++plane) {
    for (int64_t y = 0; y < height; ++y) {
      const double* src = in.data() + plane * h * w + (top + y) * w + left;
      std::copy(src, src + width, out.data() + (plane * height + y) * width);
    }
  }
  return record(std::move(out), {x}, [=](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (int64_t plane = 0; plane < n * c; ++plane) {
      for (int64_t y = 0; y < height; ++y) {
        double* dst = g->data() + plane * h * w + (top + y) * w + left;
        const double* src = self.grad.data() + (plane * height + y) * width;
        for (int64_t xx = 0; xx < width; ++xx) dst[xx] += src[xx];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Spectral transforms

Var rfft2_stacked(const Var& x) {
  const Tensor& in = x.value();
  require_4d(in, "rfft2");
  const int64_t n = in.size(0), c = in.size(1), h = in.size(2), w = in.size(3);
  const int64_t half = fft::half_width(w);
  auto spec = fft::rfft2<double>(in.values(), n * c, h, w);
  Tensor out({n, 2 * c, h, half});
  const int64_t hp = h * half;
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const std::complex<double>* src = spec.data() + (b * c + ch) * hp;
      double* re = out.data() + (b * 2 * c + ch) * hp;
      double* im = out.data() + (b * 2 * c + c + ch) * hp;
      for (int64_t i = 0; i < hp; ++i) {
        re[i] = src[i].real();
        im[i] = src[i].imag();
      }
    }
  }
  return record(std::move(out), {x}, [n, c, h, w, half](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    // Adjoint: s * Re(unnormalized inverse DFT of the zero-extended spectrum).
    const int64_t hp = h * half, plane = h * w;
    std::vector<std::complex<double>> buf(static_cast<size_t>(n * c * plane));
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t ch = 0; ch < c; ++ch) {
        const double* re = self.grad.data() + (b * 2 * c + ch) * hp;
        const double* im = self.grad.data() + (b * 2 * c + c + ch) * hp;
        std::complex<double>* dst = buf.data() + (b * c + ch) * plane;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t l = 0; l < half; ++l) dst[y * w + l] = {re[y * half + l], im[y * half + l]};
        }
      }
    }
    fft::dft2d<double>(buf, n * c, h, w, true);
    const double s = 1.0 / std::sqrt(static_cast<double>(plane));
    for (int64_t i = 0; i < n * c * plane; ++i) (*g)[i] += s * buf[i].real();
  });
}

Var irfft2_stacked(const Var& spectrum, int64_t width) {
  const Tensor& in = spectrum.value();
  require_4d(in, "irfft2");
  const int64_t n = in.size(0), h = in.size(2), half = in.size(3);
  if (in.size(1) % 2 != 0) throw ShapeError("irfft2: stacked spectrum needs an even channel count");
  if (width < 1 || fft::half_width(width) != half) {
    throw ShapeError("irfft2: width " + std::to_string(width) + " inconsistent with " +
                     std::to_string(half) + " spectrum columns");
  }
  const int64_t c = in.size(1) / 2, hp = h * half;
  std::vector<std::complex<double>> spec(static_cast<size_t>(n * c * hp));
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* re = in.data() + (b * 2 * c + ch) * hp;
      const double* im = in.data() + (b * 2 * c + c + ch) * hp;
      std::complex<double>* dst = spec.data() + (b * c + ch) * hp;
      for (int64_t i = 0; i < hp; ++i) dst[i] = {re[i], im[i]};
    }
  }
  Tensor out({n, c, h, width}, fft::irfft2<double>(spec, n * c, h, width));
  return record(std::move(out), {spectrum}, [n, c, h, width, half](Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    // Adjoint: s * c_l * (unnormalized forward DFT of the gradient), half columns.
    const int64_t plane = h * width, hp = h * half;
    std::vector<std::complex<double>> buf(static_cast<size_t>(n * c * plane));
    for (int64_t i = 0; i < n * c * plane; ++i) buf[i] = {self.grad[i], 0.0};
    fft::dft2d<double>(buf, n * c, h, width, false);
    const double s = 1.0 / std::sqrt(static_cast<double>(plane));
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t ch = 0; ch < c; ++ch) {
        const std::complex<double>* src = buf.data() + (b * c + ch) * plane;
        double* re = g->data() + (b * 2 * c + ch) * hp;
        double* im = g->data() + (b * 2 * c + c + ch) * hp;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t l = 0; l < half; ++l) {
            const double k = s * fft::column_weight(l, width);
            re[y * half + l] += k * src[y * width + l].real();
            im[y * half + l] += k * src[y * width + l].imag();
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Window correlation kernels

namespace {

void check_correlation_inputs(const Tensor& q, const Tensor& k, const Tensor& v, int64_t window,
                              const char* op) {
  require_4d(q, op);
  require_same(q, k, op);
  require_same(q, v, op);
  if (window < 1 || q.size(2) % window != 0 || q.size(3) % window != 0) {
    throw ShapeError(std::string(op) + ": window " + std::to_string(window) +
                     " does not tile " + shape_string(q.shape()));
  }
}

// Mean of each p x p block of a window laid out as d rows of w*w positions.
RowMat pool_window(const double* src, int64_t d, int64_t window, int64_t grid) {
  const int64_t p = window / grid, n = window * window;
  const double inv = 1.0 / static_cast<double>(p * p);
  RowMat out = RowMat::Zero(d, grid * grid);
  for (int64_t c = 0; c < d; ++c) {
    for (int64_t y = 0; y < window; ++y) {
      for (int64_t x = 0; x < window; ++x) out(c, (y / p) * grid + x / p) += src[c * n + y * window + x];
    }
  }
  return out * inv;
}

void unpool_window_add(const RowMat& g, int64_t window, int64_t grid, double* dst) {
  const int64_t p = window / grid, n = window * window;
  const double inv = 1.0 / static_cast<double>(p * p);
  for (int64_t c = 0; c < g.rows(); ++c) {
    for (int64_t y = 0; y < window; ++y) {
      for (int64_t x = 0; x < window; ++x) dst[c * n + y * window + x] += inv * g(c, (y / p) * grid + x / p);
    }
  }
}

void softmax_rows(RowMat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = std::exp(m(r, c) - mx);
      total += m(r, c);
    }
    m.row(r) /= total;
  }
}

RowMat softmax_backward(const RowMat& a, const RowMat& da) {
  RowMat ds = da;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double dot = a.row(r).dot(da.row(r));
    ds.row(r).array() = a.row(r).array() * (da.row(r).array() - dot);
  }
  return ds;
}

void check_grid(int64_t window, int64_t grid) {
  if (grid < 1 || window % grid != 0) {
    throw ShapeError("spatial correlation: base grid " + std::to_string(grid) +
                     " does not divide window " + std::to_string(window));
  }
}

}  // namespace

Tensor spatial_self_correlation_weights(const Tensor& q, const Tensor& k, int64_t window,
                                        int64_t grid) {
  check_correlation_inputs(q, k, k, window, "spatial_self_correlation");
  check_grid(window, grid);
  const WindowGrid qg = window_partition(q, window), kg = window_partition(k, window);
  const int64_t d = q.size(1), n = window * window, m = grid * grid;
  const double tau = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out({qg.num_windows(), n, m});
  for (int64_t wi = 0; wi < qg.num_windows(); ++wi) {
    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
    RowMat s = tau * (qm.transpose() * pool_window(kg.windows.data() + wi * d * n, d, window, grid));
    softmax_rows(s);
    std::copy(s.data(), s.data() + n * m, out.data() + wi * n * m);
  }
  return out;
}

Var spatial_self_correlation(const Var& q, const Var& k, const Var& v, int64_t window,
                             int64_t grid) {
  check_correlation_inputs(q.value(), k.value(), v.value(), window, "spatial_self_correlation");
  check_grid(window, grid);
  const WindowGrid qg = window_partition(q.value(), window);
  const WindowGrid kg = window_partition(k.value(), window);
  const WindowGrid vg = window_partition(v.value(), window);
  const int64_t d = q.value().size(1), n = window * window, m = grid * grid;
  const int64_t nw = qg.num_windows();
  const double tau = 1.0 / std::sqrt(static_cast<double>(d));
  WindowGrid og = qg;
  Tensor attn({nw, n, m});
  for (int64_t wi = 0; wi < nw; ++wi) {
    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
    const RowMat kp = pool_window(kg.windows.data() + wi * d * n, d, window, grid);
    const RowMat vp = pool_window(vg.windows.data() + wi * d * n, d, window, grid);
    RowMat a = tau * (qm.transpose() * kp);
    softmax_rows(a);
    MatMap(og.windows.data() + wi * d * n, d, n).noalias() = vp * a.transpose();
    std::copy(a.data(), a.data() + n * m, attn.data() + wi * n * m);
  }
  Tensor out = window_merge(og);
  return record(std::move(out), {q, k, v},
                [attn = std::move(attn), window, grid, d, n, m, nw, tau](Node& self) {
                  Tensor* gq = grad_of(self, 0);
                  Tensor* gk = grad_of(self, 1);
                  Tensor* gv = grad_of(self, 2);
                  const WindowGrid qg = window_partition(value_of(self, 0), window);
                  const WindowGrid kg = window_partition(value_of(self, 1), window);
                  const WindowGrid vg = window_partition(value_of(self, 2), window);
                  const WindowGrid dog = window_partition(self.grad, window);
                  WindowGrid dq = qg, dk = qg, dv = qg;
                  dq.windows.fill(0.0);
                  dk.windows.fill(0.0);
                  dv.windows.fill(0.0);
                  for (int64_t wi = 0; wi < nw; ++wi) {
                    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
                    ConstMatMap dom(dog.windows.data() + wi * d * n, d, n);
                    ConstMatMap a(attn.data() + wi * n * m, n, m);
                    const RowMat kp = pool_window(kg.windows.data() + wi * d * n, d, window, grid);
                    const RowMat vp = pool_window(vg.windows.data() + wi * d * n, d, window, grid);
                    const RowMat dvp = dom * a;
                    const RowMat da = dom.transpose() * vp;
                    const RowMat ds = softmax_backward(a, da);
                    MatMap(dq.windows.data() + wi * d * n, d, n).noalias() =
                        tau * (kp * ds.transpose());
                    const RowMat dkp = tau * (qm * ds);
                    unpool_window_add(dkp, window, grid, dk.windows.data() + wi * d * n);
                    unpool_window_add(dvp, window, grid, dv.windows.data() + wi * d * n);
                  }
                  Tensor* grads[3] = {gq, gk, gv};
                  const WindowGrid* parts[3] = {&dq, &dk, &dv};
                  for (int i = 0; i < 3; ++i) {
                    if (!grads[i]) continue;
                    const Tensor merged = window_merge(*parts[i]);
                    for (int64_t j = 0; j < merged.numel(); ++j) (*grads[i])[j] += merged[j];
                  }
                });
}

Tensor channel_self_correlation_weights(const Tensor& q, const Tensor& k, int64_t window) {
  check_correlation_inputs(q, k, k, window, "channel_self_correlation");
  const WindowGrid qg = window_partition(q, window), kg = window_partition(k, window);
  const int64_t d = q.size(1), n = window * window;
  Tensor out({qg.num_windows(), d, d});
  for (int64_t wi = 0; wi < qg.num_windows(); ++wi) {
    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
    ConstMatMap km(kg.windows.data() + wi * d * n, d, n);
    RowMat a = (qm * km.transpose()) / static_cast<double>(n);
    softmax_rows(a);
    std::copy(a.data(), a.data() + d * d, out.data() + wi * d * d);
  }
  return out;
}

Var channel_self_correlation(const Var& q, const Var& k, const Var& v, int64_t window) {
  check_correlation_inputs(q.value(), k.value(), v.value(), window, "channel_self_correlation");
  const WindowGrid qg = window_partition(q.value(), window);
  const WindowGrid kg = window_partition(k.value(), window);
  const WindowGrid vg = window_partition(v.value(), window);
  const int64_t d = q.value().size(1), n = window * window, nw = qg.num_windows();
  const double inv_n = 1.0 / static_cast<double>(n);
  WindowGrid og = qg;
  Tensor attn({nw, d, d});
  for (int64_t wi = 0; wi < nw; ++wi) {
    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
    ConstMatMap km(kg.windows.data() + wi * d * n, d, n);
    ConstMatMap vm(vg.windows.data() + wi * d * n, d, n);
    RowMat a = inv_n * (qm * km.transpose());
    softmax_rows(a);
    MatMap(og.windows.data() + wi * d * n, d, n).noalias() = a * vm;
    std::copy(a.data(), a.data() + d * d, attn.data() + wi * d * d);
  }
  Tensor out = window_merge(og);
  return record(std::move(out), {q, k, v},
                [attn = std::move(attn), window, d, n, nw, inv_n](Node& self) {
                  const WindowGrid qg = window_partition(value_of(self, 0), window);
                  const WindowGrid kg = window_partition(value_of(self, 1), window);
                  const WindowGrid vg = window_partition(value_of(self, 2), window);
                  const WindowGrid dog = window_partition(self.grad, window);
                  WindowGrid dq = qg, dk = qg, dv = qg;
                  for (int64_t wi = 0; wi < nw; ++wi) {
                    ConstMatMap qm(qg.windows.data() + wi * d * n, d, n);
                    ConstMatMap km(kg.windows.data() + wi * d * n, d, n);
                    ConstMatMap vm(vg.windows.data() + wi * d * n, d, n);
                    ConstMatMap dom(dog.windows.data() + wi * d * n, d, n);
                    ConstMatMap a(attn.data() + wi * d * d, d, d);
                    const RowMat da = dom * vm.transpose();
                    MatMap(dv.windows.data() + wi * d * n, d, n).noalias() = a.transpose() * dom;
                    const RowMat dm = softmax_backward(a, da);
                    MatMap(dq.windows.data() + wi * d * n, d, n).noalias() = inv_n * (dm * km);
                    MatMap(dk.windows.data() + wi * d * n, d, n).noalias() =
                        inv_n * (dm.transpose() * qm);
                  }
                  Tensor* grads[3] = {grad_of(self, 0), grad_of(self, 1), grad_of(self, 2)};
                  const WindowGrid* parts[3] = {&dq, &dk, &dv};
                  for (int i = 0; i < 3; ++i) {
                    if (!grads[i]) continue;
                    const Tensor merged = window_merge(*parts[i]);
                    for (int64_t j = 0; j < merged.numel(); ++j) (*grads[i])[j] += merged[j];
                  }
                });
}

}  // namespace f2t2hit::ops
