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

// Single-stage U-shaped reflection removal network.
//
// Level i runs at width base_width * 2^i and resolution 1/2^i. Encoder
// levels 0..L-2 are followed by a stride-2 2x2 convolution; the deepest
// level runs its encoder blocks, the bottleneck blocks and its decoder
// blocks back to back. Decoder levels upsample with 1x1 conv + pixel
// shuffle and add the matching skip, optionally routed through an F2T2
// block. The head output is added to the input image.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "f2t2hit/blocks.hpp"

namespace f2t2hit {

enum class Variant { kNafOnly, kNafHit, kFull };

std::string to_string(Variant v);
/// Accepts "naf_only", "naf_hit", "full"; throws ConfigError otherwise.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  int64_t base_width = 16;
  int num_levels = 3;
  std::vector<int> enc_blocks{1, 1, 1};
  std::vector<int> dec_blocks{1, 1, 1};
  int middle_blocks = 1;
  bool hit_enabled = true;
  std::vector<int> f2t2_skip_levels{0};
  std::vector<int64_t> window_hierarchy{4, 8, 16};

  /// Width 16, three levels, one block per stage.
  static ModelConfig desk();
  /// Width 32, enc [2,2,4,8], middle 12, dec [2,2,2,2].
  static ModelConfig large();

  /// Throws ConfigError on any structural problem.
  void validate() const;
  int64_t width_at(int level) const { return base_width << level; }
  /// Inputs are reflect-padded up to a multiple of this.
  int64_t pad_multiple() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Effective configuration for an ablation row: naf_only drops HiT and F2T2,
/// naf_hit drops F2T2, full keeps both.
ModelConfig apply_variant(ModelConfig cfg, Variant variant);

using StageBlock = std::variant<NafBlockParams, HitBlockParams>;

struct Stage {
  std::vector<StageBlock> blocks;
};

struct Model {
  ModelConfig config;  // effective (variant already applied)
  Variant variant = Variant::kFull;
  uint64_t seed = 0;

  ConvParams stem;
  std::vector<Stage> encoders;
  std::vector<ConvParams> downs;
  Stage middle;
  std::vector<PointwiseParams> ups;
  std::map<int, F2t2BlockParams> skip_blocks;
  std::vector<Stage> decoders;
  ConvParams head;

  void visit(const ParamVisitor& fn);
  /// Hierarchical names in a stable order, e.g. "encoders.0.0.conv1.weight".
  std::vector<std::pair<std::string, Var>> named_parameters();
};

Model build_model(const ModelConfig& cfg, Variant variant, uint64_t seed);

int64_t count_params(Model& model);

enum class Mode { kTraining, kInference };

/// Runs the network on Nx3xHxW. Inputs are reflect-padded to
/// pad_multiple() and the output cropped back. Inference mode clamps the
/// result to [0, 1]; training mode leaves it unclamped.
Var forward(Model& model, const Var& batch, Mode mode);

/// Gradient-free inference on one 3xHxW image (or a batch).
Tensor forward(Model& model, const Tensor& image, Mode mode = Mode::kInference);

/// Reflect padding on the bottom/right edges (mirror without repeating the
/// edge sample; repeated mirroring when the pad exceeds the size).
Tensor reflect_pad(const Tensor& nchw, int64_t pad_bottom, int64_t pad_right);

}  // namespace f2t2hit
