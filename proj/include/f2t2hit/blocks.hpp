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

// Building blocks of the restoration network.
//
//   NAF block    LN -> 1x1 (x2) -> 3x3 dw -> gate -> SCA -> 1x1 -> +beta*
//                LN -> 1x1 (x2) -> gate -> 1x1 -> +gamma*
//   HiT block    x + g1 * W-SA(LN(x)), then + g2 * channel FFN(LN(.))
//   F2T2 block   x + g1 * FFT layer(LN(x)), then + g2 * spatial FFN(LN(.))
//
// All residual gains are scalars initialized to zero, so a freshly built
// block is the identity map.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "f2t2hit/autograd.hpp"
#include "f2t2hit/windows.hpp"

namespace f2t2hit {

inline constexpr double kLayerNormEps = 1e-6;
/// Side of the pooled key/value lattice used by spatial self-correlation.
inline constexpr int64_t kCorrelationGrid = 4;

struct LayerNormParams {
  Var gamma, beta;  // C each
};

struct PointwiseParams {
  Var weight;  // Cout x Cin
  Var bias;    // Cout, may be undefined
};

struct DepthwiseParams {
  Var weight;  // C x k x k
  Var bias;    // C
};

struct ConvParams {
  Var weight;  // Cout x Cin x kh x kw
  Var bias;    // Cout
};

struct NafBlockParams {
  LayerNormParams norm1;
  PointwiseParams conv1;  // C -> 2C
  DepthwiseParams conv2;  // 3x3 on 2C
  PointwiseParams sca;    // C -> C on pooled features
  PointwiseParams conv3;  // C -> C
  LayerNormParams norm2;
  PointwiseParams conv4;  // C -> 2C
  PointwiseParams conv5;  // C -> C
  Var beta, gamma;        // residual gains
};

/// Dual feature extraction: Q/K projections plus a value built from a
/// spatial (depthwise) path and a channel (gated projection) path.
struct DfeParams {
  PointwiseParams query;
  PointwiseParams key;  // bias-free
  DepthwiseParams spatial_value;  // 3x3
  PointwiseParams channel_value;
  PointwiseParams channel_gate;  // applied to pooled features, then sigmoid
};

struct HitAttentionParams {
  DfeParams dfe;
  PointwiseParams fuse;
  std::vector<int64_t> windows{4, 8, 16};
};

struct ChannelFfnParams {
  PointwiseParams expand;   // C -> 2C
  PointwiseParams project;  // 2C -> C
};

struct HitBlockParams {
  LayerNormParams norm1;
  HitAttentionParams attention;
  LayerNormParams norm2;
  ChannelFfnParams ffn;
  Var gamma_attn, gamma_ffn;
};

struct SpatialFfnParams {
  PointwiseParams expand;  // C -> 2C
  DepthwiseParams dw3, dw5, dw7;
  PointwiseParams project;  // 2C -> C
};

struct FftLayerParams {
  DepthwiseParams spatial_dw;     // 3x3 on C
  PointwiseParams spatial_pw;     // C -> C
  PointwiseParams frequency_in;   // 2C -> 2C on stacked Re/Im
  PointwiseParams frequency_out;  // 2C -> 2C
  PointwiseParams fuse;           // C -> C
  /// Test hook: skip the GELU between the two spectral projections.
  bool frequency_activation = true;
};

struct F2t2BlockParams {
  LayerNormParams norm1;
  FftLayerParams fft;
  LayerNormParams norm2;
  SpatialFfnParams ffn;
  Var gamma_fft, gamma_ffn;
};

/// Q, K, V of one W-SA call, each NxCxHxW, before window partitioning.
struct WindowedProjections {
  Var q, k, v;
};

// ---------------------------------------------------------------------------
// Parameter construction. Weights and biases are drawn from
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); LayerNorm starts at (1, 0) and residual
// gains at 0.

LayerNormParams make_layer_norm(int64_t channels);
PointwiseParams make_pointwise(int64_t in, int64_t out, std::mt19937_64& rng);
DepthwiseParams make_depthwise(int64_t channels, int64_t kernel, std::mt19937_64& rng);
ConvParams make_conv(int64_t in, int64_t out, int64_t kernel, std::mt19937_64& rng);
NafBlockParams make_naf_block(int64_t channels, std::mt19937_64& rng);
DfeParams make_dfe(int64_t channels, std::mt19937_64& rng);
HitAttentionParams make_hit_attention(int64_t channels, std::vector<int64_t> windows,
                                      std::mt19937_64& rng);
ChannelFfnParams make_channel_ffn(int64_t channels, std::mt19937_64& rng);
HitBlockParams make_hit_block(int64_t channels, std::vector<int64_t> windows,
                              std::mt19937_64& rng);
SpatialFfnParams make_spatial_ffn(int64_t channels, std::mt19937_64& rng);
FftLayerParams make_fft_layer(int64_t channels, std::mt19937_64& rng);
F2t2BlockParams make_f2t2_block(int64_t channels, std::mt19937_64& rng);

using ParamVisitor = std::function<void(const std::string& name, Var& param)>;

// Visits every trainable array under `prefix` in a fixed order.
void visit_params(LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(PointwiseParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(DepthwiseParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(ConvParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(NafBlockParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(DfeParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(HitAttentionParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(ChannelFfnParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(HitBlockParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(SpatialFfnParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(FftLayerParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_params(F2t2BlockParams& p, const std::string& prefix, const ParamVisitor& fn);

// ---------------------------------------------------------------------------
// Block operations. Inputs are NxCxHxW.

Var layer_norm_2d(const Var& x, const LayerNormParams& p);
/// First channel half times second half; odd channel counts are rejected.
Var simple_gate(const Var& x);
/// x * broadcast(conv1x1(global_average_pool(x))).
Var simplified_channel_attention(const Var& x, const PointwiseParams& p);
Var naf_block(const Var& x, const NafBlockParams& p);

/// The channel gate pools over gate_tile x gate_tile tiles (0 pools the
/// whole map). W-SA uses its largest window so the extraction stays
/// window-local.
WindowedProjections dual_feature_extraction(const Var& x, const DfeParams& p,
                                            int64_t gate_tile = 0);

/// Channels are split into one contiguous group per window size (remainder
/// to the last group); each group splits again into a spatial and a channel
/// self-correlation half. Group outputs are concatenated and fused by 1x1.
Var hit_wsa(const Var& x, const HitAttentionParams& p);
Var channel_ffn(const Var& x, const ChannelFfnParams& p);
Var spatial_ffn(const Var& x, const SpatialFfnParams& p);
/// Spatial branch (3x3 dw -> 1x1) plus frequency branch (rFFT -> 1x1 ->
/// GELU -> 1x1 -> irFFT), fused by a final 1x1.
Var fft_layer(const Var& x, const FftLayerParams& p);
Var hit_block(const Var& x, const HitBlockParams& p);
Var f2t2_block(const Var& x, const F2t2BlockParams& p);

/// Channel count of each W-SA group, in window order.
std::vector<int64_t> hit_group_channels(int64_t channels, size_t groups);

}  // namespace f2t2hit
