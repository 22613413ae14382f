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

#include "f2t2hit/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/ops.hpp"

namespace f2t2hit {
namespace {

Var uniform_param(const Shape& shape, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  return parameter(random_uniform(shape, rng, -bound, bound));
}

Var zero_gain() { return parameter(Tensor({1}, 0.0)); }

void require_nchw(const Var& x, const char* op) {
  if (!x.defined() || x.value().dim() != 4) {
    throw ShapeError(std::string(op) + ": expected NxCxHxW input");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

LayerNormParams make_layer_norm(int64_t channels) {
  return {parameter(Tensor({channels}, 1.0)), parameter(Tensor({channels}, 0.0))};
}

PointwiseParams make_pointwise(int64_t in, int64_t out, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in);
  Var w = uniform_param({out, in}, fan_in, rng);
  Var b = uniform_param({out}, fan_in, rng);
  return {w, b};
}

DepthwiseParams make_depthwise(int64_t channels, int64_t kernel, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(kernel * kernel);
  Var w = uniform_param({channels, kernel, kernel}, fan_in, rng);
  Var b = uniform_param({channels}, fan_in, rng);
  return {w, b};
}

ConvParams make_conv(int64_t in, int64_t out, int64_t kernel, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in * kernel * kernel);
  Var w = uniform_param({out, in, kernel, kernel}, fan_in, rng);
  Var b = uniform_param({out}, fan_in, rng);
  return {w, b};
}

NafBlockParams make_naf_block(int64_t c, std::mt19937_64& rng) {
  NafBlockParams p;
  p.norm1 = make_layer_norm(c);
  p.conv1 = make_pointwise(c, 2 * c, rng);
  p.conv2 = make_depthwise(2 * c, 3, rng);
  p.sca = make_pointwise(c, c, rng);
  p.conv3 = make_pointwise(c, c, rng);
  p.norm2 = make_layer_norm(c);
  p.conv4 = make_pointwise(c, 2 * c, rng);
  p.conv5 = make_pointwise(c, c, rng);
  p.beta = zero_gain();
  p.gamma = zero_gain();
  return p;
}

DfeParams make_dfe(int64_t c, std::mt19937_64& rng) {
  DfeParams p;
  p.query = make_pointwise(c, c, rng);
  // A per-channel key offset shifts every logit of a query row equally and
  // cancels in the softmax, so the key projection carries no bias.
  p.key = {uniform_param({c, c}, static_cast<double>(c), rng), Var()};
  p.spatial_value = make_depthwise(c, 3, rng);
  p.channel_value = make_pointwise(c, c, rng);
  p.channel_gate = make_pointwise(c, c, rng);
  return p;
}

HitAttentionParams make_hit_attention(int64_t c, std::vector<int64_t> windows,
                                      std::mt19937_64& rng) {
  hit_group_channels(c, windows.size());
  HitAttentionParams p;
  p.dfe = make_dfe(c, rng);
  p.fuse = make_pointwise(c, c, rng);
  p.windows = std::move(windows);
  return p;
}

ChannelFfnParams make_channel_ffn(int64_t c, std::mt19937_64& rng) {
  ChannelFfnParams p;
  p.expand = make_pointwise(c, 2 * c, rng);
  p.project = make_pointwise(2 * c, c, rng);
  return p;
}

HitBlockParams make_hit_block(int64_t c, std::vector<int64_t> windows, std::mt19937_64& rng) {
  HitBlockParams p;
  p.norm1 = make_layer_norm(c);
  p.attention = make_hit_attention(c, std::move(windows), rng);
  p.norm2 = make_layer_norm(c);
  p.ffn = make_channel_ffn(c, rng);
  p.gamma_attn = zero_gain();
  p.gamma_ffn = zero_gain();
  return p;
}

SpatialFfnParams make_spatial_ffn(int64_t c, std::mt19937_64& rng) {
  SpatialFfnParams p;
  p.expand = make_pointwise(c, 2 * c, rng);
  p.dw3 = make_depthwise(2 * c, 3, rng);
  p.dw5 = make_depthwise(2 * c, 5, rng);
  p.dw7 = make_depthwise(2 * c, 7, rng);
  p.project = make_pointwise(2 * c, c, rng);
  return p;
}

FftLayerParams make_fft_layer(int64_t c, std::mt19937_64& rng) {
  FftLayerParams p;
  p.spatial_dw = make_depthwise(c, 3, rng);
  p.spatial_pw = make_pointwise(c, c, rng);
  p.frequency_in = make_pointwise(2 * c, 2 * c, rng);
  p.frequency_out = make_pointwise(2 * c, 2 * c, rng);
  p.fuse = make_pointwise(c, c, rng);
  return p;
}

F2t2BlockParams make_f2t2_block(int64_t c, std::mt19937_64& rng) {
  F2t2BlockParams p;
  p.norm1 = make_layer_norm(c);
  p.fft = make_fft_layer(c, rng);
  p.norm2 = make_layer_norm(c);
  p.ffn = make_spatial_ffn(c, rng);
  p.gamma_fft = zero_gain();
  p.gamma_ffn = zero_gain();
  return p;
}

// ---------------------------------------------------------------------------
// Visiting

void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", p.gamma);
  fn(prefix + ".beta", p.beta);
}

void visit_params(PointwiseParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", p.weight);
  if (p.bias.defined()) fn(prefix + ".bias", p.bias);
}

void visit_params(DepthwiseParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", p.weight);
  fn(prefix + ".bias", p.bias);
}

void visit_params(ConvParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", p.weight);
  fn(prefix + ".bias", p.bias);
}

void visit_params(NafBlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.norm1, prefix + ".norm1", fn);
  visit_params(p.conv1, prefix + ".conv1", fn);
  visit_params(p.conv2, prefix + ".conv2", fn);
  visit_params(p.sca, prefix + ".sca", fn);
  visit_params(p.conv3, prefix + ".conv3", fn);
  visit_params(p.norm2, prefix + ".norm2", fn);
  visit_params(p.conv4, prefix + ".conv4", fn);
  visit_params(p.conv5, prefix + ".conv5", fn);
  fn(prefix + ".beta", p.beta);
  fn(prefix + ".gamma", p.gamma);
}

void visit_params(DfeParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.query, prefix + ".query", fn);
  visit_params(p.key, prefix + ".key", fn);
  visit_params(p.spatial_value, prefix + ".spatial_value", fn);
  visit_params(p.channel_value, prefix + ".channel_value", fn);
  visit_params(p.channel_gate, prefix + ".channel_gate", fn);
}

void visit_params(HitAttentionParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.dfe, prefix + ".dfe", fn);
  visit_params(p.fuse, prefix + ".fuse", fn);
}

void visit_params(ChannelFfnParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.expand, prefix + ".expand", fn);
  visit_params(p.project, prefix + ".project", fn);
}

void visit_params(HitBlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.norm1, prefix + ".norm1", fn);
  visit_params(p.attention, prefix + ".attn", fn);
  visit_params(p.norm2, prefix + ".norm2", fn);
  visit_params(p.ffn, prefix + ".ffn", fn);
  fn(prefix + ".gamma_attn", p.gamma_attn);
  fn(prefix + ".gamma_ffn", p.gamma_ffn);
}

void visit_params(SpatialFfnParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.expand, prefix + ".expand", fn);
  visit_params(p.dw3, prefix + ".dw3", fn);
  visit_params(p.dw5, prefix + ".dw5", fn);
  visit_params(p.dw7, prefix + ".dw7", fn);
  visit_params(p.project, prefix + ".project", fn);
}

void visit_params(FftLayerParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.spatial_dw, prefix + ".spatial_dw", fn);
  visit_params(p.spatial_pw, prefix + ".spatial_pw", fn);
  visit_params(p.frequency_in, prefix + ".frequency_in", fn);
  visit_params(p.frequency_out, prefix + ".frequency_out", fn);
  visit_params(p.fuse, prefix + ".fuse", fn);
}

void visit_params(F2t2BlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_params(p.norm1, prefix + ".norm1", fn);
  visit_params(p.fft, prefix + ".fft", fn);
  visit_params(p.norm2, prefix + ".norm2", fn);
  visit_params(p.ffn, prefix + ".ffn", fn);
  fn(prefix + ".gamma_fft", p.gamma_fft);
  fn(prefix + ".gamma_ffn", p.gamma_ffn);
}

// ---------------------------------------------------------------------------
// Operations

Var layer_norm_2d(const Var& x, const LayerNormParams& p) {
  return ops::layer_norm_channels(x, p.gamma, p.beta, kLayerNormEps);
}

Var simple_gate(const Var& x) {
  require_nchw(x, "simple_gate");
  const int64_t c = x.value().size(1);
  if (c % 2 != 0) {
    throw ShapeError("simple_gate: odd channel count " + std::to_string(c));
  }
  return ops::mul(ops::slice_channels(x, 0, c / 2), ops::slice_channels(x, c / 2, c / 2));
}

Var simplified_channel_attention(const Var& x, const PointwiseParams& p) {
  require_nchw(x, "simplified_channel_attention");
  const int64_t c = x.value().size(1);
  const Shape& ws = p.weight.shape();
  if (ws.size() != 2 || ws[0] != c || ws[1] != c) {
    throw ShapeError("simplified_channel_attention: kernel " + shape_string(ws) + " for " +
                     std::to_string(c) + " channels");
  }
  Var pooled = ops::avg_pool(x, x.value().size(2), x.value().size(3));
  return ops::mul_broadcast(x, ops::pointwise_conv(pooled, p.weight, p.bias));
}

Var naf_block(const Var& x, const NafBlockParams& p) {
  require_nchw(x, "naf_block");
  Var y = layer_norm_2d(x, p.norm1);
  y = ops::pointwise_conv(y, p.conv1.weight, p.conv1.bias);
  y = ops::depthwise_conv(y, p.conv2.weight, p.conv2.bias);
  y = simple_gate(y);
  y = simplified_channel_attention(y, p.sca);
  y = ops::pointwise_conv(y, p.conv3.weight, p.conv3.bias);
  Var mid = ops::add(x, ops::scale_by(p.beta, y));

  Var z = layer_norm_2d(mid, p.norm2);
  z = ops::pointwise_conv(z, p.conv4.weight, p.conv4.bias);
  z = simple_gate(z);
  z = ops::pointwise_conv(z, p.conv5.weight, p.conv5.bias);
  return ops::add(mid, ops::scale_by(p.gamma, z));
}

WindowedProjections dual_feature_extraction(const Var& x, const DfeParams& p, int64_t gate_tile) {
  require_nchw(x, "dual_feature_extraction");
  const int64_t h = x.value().size(2), w = x.value().size(3);
  WindowedProjections out;
  out.q = ops::pointwise_conv(x, p.query.weight, p.query.bias);
  out.k = ops::pointwise_conv(x, p.key.weight, p.key.bias);
  Var spatial = ops::depthwise_conv(x, p.spatial_value.weight, p.spatial_value.bias);
  Var pooled = gate_tile > 0 ? ops::avg_pool(x, gate_tile, gate_tile) : ops::avg_pool(x, h, w);
  Var gate = ops::sigmoid(ops::pointwise_conv(pooled, p.channel_gate.weight, p.channel_gate.bias));
  Var channel = ops::mul_broadcast(
      ops::pointwise_conv(x, p.channel_value.weight, p.channel_value.bias), gate);
  out.v = ops::add(spatial, channel);
  return out;
}

std::vector<int64_t> hit_group_channels(int64_t channels, size_t groups) {
  if (groups == 0) throw ConfigError("hit_wsa: empty window hierarchy");
  const int64_t g = static_cast<int64_t>(groups);
  std::vector<int64_t> sizes(groups, channels / g);
  sizes.back() += channels % g;
  for (int64_t s : sizes) {
    if (s < 2) {
      throw ConfigError("hit_wsa: " + std::to_string(channels) + " channels cannot feed " +
                        std::to_string(g) + " window groups of at least 2 channels");
    }
  }
  return sizes;
}

Var hit_wsa(const Var& x, const HitAttentionParams& p) {
  require_nchw(x, "hit_wsa");
  const int64_t c = x.value().size(1), h = x.value().size(2), w = x.value().size(3);
  const auto groups = hit_group_channels(c, p.windows.size());
  int64_t largest = 0;
  for (int64_t win : p.windows) {
    if (win < kCorrelationGrid || win % kCorrelationGrid != 0) {
      throw ConfigError("hit_wsa: window " + std::to_string(win) + " must be a multiple of " +
                        std::to_string(kCorrelationGrid));
    }
    largest = std::max(largest, win);
  }
  for (int64_t win : p.windows) {
    if (h % win != 0 || w % win != 0 || h % largest != 0 || w % largest != 0) {
      throw ShapeError("hit_wsa: " + std::to_string(h) + "x" + std::to_string(w) +
                       " is not divisible by window " + std::to_string(largest));
    }
  }
  const WindowedProjections qkv = dual_feature_extraction(x, p.dfe, largest);
  std::vector<Var> parts;
  int64_t offset = 0;
  for (size_t g = 0; g < groups.size(); ++g) {
    const int64_t win = p.windows[g];
    const int64_t spatial = groups[g] / 2, channel = groups[g] - spatial;
    auto take = [&](const Var& t, int64_t begin, int64_t count) {
      return ops::slice_channels(t, begin, count);
    };
    parts.push_back(ops::spatial_self_correlation(
        take(qkv.q, offset, spatial), take(qkv.k, offset, spatial), take(qkv.v, offset, spatial),
        win, kCorrelationGrid));
    parts.push_back(ops::channel_self_correlation(take(qkv.q, offset + spatial, channel),
                                                  take(qkv.k, offset + spatial, channel),
                                                  take(qkv.v, offset + spatial, channel), win));
    offset += groups[g];
  }
  return ops::pointwise_conv(ops::concat_channels(parts), p.fuse.weight, p.fuse.bias);
}

Var channel_ffn(const Var& x, const ChannelFfnParams& p) {
  require_nchw(x, "channel_ffn");
  Var y = ops::gelu(ops::pointwise_conv(x, p.expand.weight, p.expand.bias));
  return ops::pointwise_conv(y, p.project.weight, p.project.bias);
}

Var spatial_ffn(const Var& x, const SpatialFfnParams& p) {
  require_nchw(x, "spatial_ffn");
  Var y = ops::gelu(ops::pointwise_conv(x, p.expand.weight, p.expand.bias));
  Var multi = ops::add(ops::add(ops::depthwise_conv(y, p.dw3.weight, p.dw3.bias),
                                ops::depthwise_conv(y, p.dw5.weight, p.dw5.bias)),
                       ops::depthwise_conv(y, p.dw7.weight, p.dw7.bias));
  return ops::pointwise_conv(multi, p.project.weight, p.project.bias);
}

Var fft_layer(const Var& x, const FftLayerParams& p) {
  require_nchw(x, "fft_layer");
  const int64_t h = x.value().size(2), w = x.value().size(3);
  if (h < 2 || w < 2) {
    throw ConfigError("fft_layer: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                      " is below 2x2");
  }
  Var spatial = ops::depthwise_conv(x, p.spatial_dw.weight, p.spatial_dw.bias);
  spatial = ops::pointwise_conv(spatial, p.spatial_pw.weight, p.spatial_pw.bias);

  Var freq = ops::rfft2_stacked(x);
  freq = ops::pointwise_conv(freq, p.frequency_in.weight, p.frequency_in.bias);
  if (p.frequency_activation) freq = ops::gelu(freq);
  freq = ops::pointwise_conv(freq, p.frequency_out.weight, p.frequency_out.bias);
  freq = ops::irfft2_stacked(freq, w);

  return ops::pointwise_conv(ops::add(spatial, freq), p.fuse.weight, p.fuse.bias);
}

Var hit_block(const Var& x, const HitBlockParams& p) {
  require_nchw(x, "hit_block");
  Var y = ops::add(x, ops::scale_by(p.gamma_attn, hit_wsa(layer_norm_2d(x, p.norm1), p.attention)));
  return ops::add(y, ops::scale_by(p.gamma_ffn, channel_ffn(layer_norm_2d(y, p.norm2), p.ffn)));
}

Var f2t2_block(const Var& x, const F2t2BlockParams& p) {
  require_nchw(x, "f2t2_block");
  Var y = ops::add(x, ops::scale_by(p.gamma_fft, fft_layer(layer_norm_2d(x, p.norm1), p.fft)));
  return ops::add(y, ops::scale_by(p.gamma_ffn, spatial_ffn(layer_norm_2d(y, p.norm2), p.ffn)));
}

}  // namespace f2t2hit
