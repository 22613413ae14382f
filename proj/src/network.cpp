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

#include "f2t2hit/network.hpp"

#include <algorithm>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/ops.hpp"

namespace f2t2hit {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kNafOnly:
      return "naf_only";
    case Variant::kNafHit:
      return "naf_hit";
    case Variant::kFull:
      return "full";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "naf_only") return Variant::kNafOnly;
  if (name == "naf_hit") return Variant::kNafHit;
  if (name == "full") return Variant::kFull;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected naf_only, naf_hit or full)");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::large() {
  ModelConfig cfg;
  cfg.base_width = 32;
  cfg.num_levels = 4;
  cfg.enc_blocks = {2, 2, 4, 8};
  cfg.dec_blocks = {2, 2, 2, 2};
  cfg.middle_blocks = 12;
  return cfg;
}

void ModelConfig::validate() const {
  if (num_levels < 1) throw ConfigError("model.num_levels must be at least 1");
  if (num_levels > 8) throw ConfigError("model.num_levels above 8 is not supported");
  if (window_hierarchy.empty()) throw ConfigError("model.window_hierarchy must not be empty");
  for (int64_t w : window_hierarchy) {
    if (w < kCorrelationGrid || w % kCorrelationGrid != 0) {
      throw ConfigError("model.window_hierarchy entries must be positive multiples of " +
                        std::to_string(kCorrelationGrid) + ", got " + std::to_string(w));
    }
  }
  const int64_t min_width = 2 * static_cast<int64_t>(window_hierarchy.size());
  if (base_width < min_width) {
    throw ConfigError("model.base_width must be at least " + std::to_string(min_width) +
                      " (2 channels per window group), got " + std::to_string(base_width));
  }
  if (static_cast<int>(enc_blocks.size()) != num_levels ||
      static_cast<int>(dec_blocks.size()) != num_levels) {
    throw ConfigError("model.enc_blocks and model.dec_blocks need num_levels = " +
                      std::to_string(num_levels) + " entries");
  }
  for (int n : enc_blocks) {
    if (n < 0) throw ConfigError("model.enc_blocks entries must be non-negative");
  }
  for (int n : dec_blocks) {
    if (n < 0) throw ConfigError("model.dec_blocks entries must be non-negative");
  }
  if (middle_blocks < 0) throw ConfigError("model.middle_blocks must be non-negative");
  for (int level : f2t2_skip_levels) {
    if (level < 0 || level >= num_levels - 1) {
      throw ConfigError("model.f2t2_skip_levels entry " + std::to_string(level) +
                        " must lie in [0, " + std::to_string(num_levels - 1) + ")");
    }
  }
  auto sorted = f2t2_skip_levels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("model.f2t2_skip_levels contains duplicates");
  }
}

int64_t ModelConfig::pad_multiple() const {
  const int64_t largest = *std::max_element(window_hierarchy.begin(), window_hierarchy.end());
  return largest << (num_levels - 1);
}

ModelConfig apply_variant(ModelConfig cfg, Variant variant) {
  switch (variant) {
    case Variant::kNafOnly:
      cfg.hit_enabled = false;
      cfg.f2t2_skip_levels.clear();
      break;
    case Variant::kNafHit:
      cfg.hit_enabled = true;
      cfg.f2t2_skip_levels.clear();
      break;
    case Variant::kFull:
      cfg.hit_enabled = true;
      break;
  }
  return cfg;
}

namespace {

Stage make_stage(int count, int64_t width, const ModelConfig& cfg, std::mt19937_64& rng) {
  Stage stage;
  for (int i = 0; i < count; ++i) {
    if (cfg.hit_enabled && i == count - 1) {
      stage.blocks.emplace_back(make_hit_block(width, cfg.window_hierarchy, rng));
    } else {
      stage.blocks.emplace_back(make_naf_block(width, rng));
    }
  }
  return stage;
}

void visit_stage(Stage& stage, const std::string& prefix, const ParamVisitor& fn) {
  for (size_t i = 0; i < stage.blocks.size(); ++i) {
    const std::string name = prefix + "." + std::to_string(i);
    std::visit([&](auto& block) { visit_params(block, name, fn); }, stage.blocks[i]);
  }
}

Var run_stage(const Stage& stage, Var x) {
  for (const StageBlock& block : stage.blocks) {
    if (const auto* naf = std::get_if<NafBlockParams>(&block)) {
      x = naf_block(x, *naf);
    } else {
      x = hit_block(x, std::get<HitBlockParams>(block));
    }
  }
  return x;
}

Var run_unet(const Model& m, const Var& input) {
  const int levels = m.config.num_levels;
  Var x = ops::conv2d(input, m.stem.weight, m.stem.bias, 1, 1);
  std::vector<Var> skips;
  for (int i = 0; i < levels; ++i) {
    x = run_stage(m.encoders[static_cast<size_t>(i)], x);
    if (i < levels - 1) {
      skips.push_back(x);
      const ConvParams& down = m.downs[static_cast<size_t>(i)];
      x = ops::conv2d(x, down.weight, down.bias, 2, 0);
    }
  }
  x = run_stage(m.middle, x);
  for (int i = levels - 1; i >= 0; --i) {
    if (i < levels - 1) {
      const PointwiseParams& up = m.ups[static_cast<size_t>(i)];
      x = ops::pixel_shuffle(ops::pointwise_conv(x, up.weight, up.bias), 2);
      Var skip = skips[static_cast<size_t>(i)];
      if (auto it = m.skip_blocks.find(i); it != m.skip_blocks.end()) {
        skip = f2t2_block(skip, it->second);
      }
      x = ops::add(x, skip);
    }
    x = run_stage(m.decoders[static_cast<size_t>(i)], x);
  }
  x = ops::conv2d(x, m.head.weight, m.head.bias, 1, 1);
  return ops::add(x, input);
}

int64_t mirror_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Model build_model(const ModelConfig& cfg, Variant variant, uint64_t seed) {
  Model m;
  m.config = apply_variant(cfg, variant);
  m.config.validate();
  m.variant = variant;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  const int levels = m.config.num_levels;

  m.stem = make_conv(3, m.config.base_width, 3, rng);
  for (int i = 0; i < levels; ++i) {
    m.encoders.push_back(make_stage(m.config.enc_blocks[static_cast<size_t>(i)],
                                    m.config.width_at(i), m.config, rng));
    if (i < levels - 1) {
      m.downs.push_back(make_conv(m.config.width_at(i), m.config.width_at(i + 1), 2, rng));
    }
  }
  m.middle = make_stage(m.config.middle_blocks, m.config.width_at(levels - 1), m.config, rng);
  for (int i = 0; i < levels - 1; ++i) {
    const int64_t w = m.config.width_at(i + 1);
    m.ups.push_back(make_pointwise(w, 2 * w, rng));
  }
  for (int level : m.config.f2t2_skip_levels) {
    m.skip_blocks.emplace(level, make_f2t2_block(m.config.width_at(level), rng));
  }
  m.decoders.resize(static_cast<size_t>(levels));
  for (int i = levels - 1; i >= 0; --i) {
    m.decoders[static_cast<size_t>(i)] = make_stage(m.config.dec_blocks[static_cast<size_t>(i)],
                                                    m.config.width_at(i), m.config, rng);
  }
  m.head.weight = parameter(Tensor({3, m.config.base_width, 3, 3}, 0.0));
  m.head.bias = parameter(Tensor({3}, 0.0));
  return m;
}

void Model::visit(const ParamVisitor& fn) {
  visit_params(stem, "stem", fn);
  for (size_t i = 0; i < encoders.size(); ++i) {
    visit_stage(encoders[i], "encoders." + std::to_string(i), fn);
    if (i < downs.size()) visit_params(downs[i], "downs." + std::to_string(i), fn);
  }
  visit_stage(middle, "middle", fn);
  for (size_t i = 0; i < ups.size(); ++i) visit_params(ups[i], "ups." + std::to_string(i), fn);
  for (auto& [level, block] : skip_blocks) visit_params(block, "skips." + std::to_string(level), fn);
  for (size_t i = decoders.size(); i-- > 0;) {
    visit_stage(decoders[i], "decoders." + std::to_string(i), fn);
  }
  visit_params(head, "head", fn);
}

std::vector<std::pair<std::string, Var>> Model::named_parameters() {
  std::vector<std::pair<std::string, Var>> out;
  visit([&](const std::string& name, Var& v) { out.emplace_back(name, v); });
  return out;
}

int64_t count_params(Model& model) {
  int64_t total = 0;
  model.visit([&](const std::string&, Var& v) { total += v.numel(); });
  return total;
}

Tensor reflect_pad(const Tensor& x, int64_t pad_bottom, int64_t pad_right) {
  if (x.dim() != 4) throw ShapeError("reflect_pad expects NxCxHxW");
  if (pad_bottom < 0 || pad_right < 0) throw ShapeError("reflect_pad: negative padding");
  const int64_t n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const int64_t oh = h + pad_bottom, ow = w + pad_right;
  Tensor out({n, c, oh, ow});
  for (int64_t plane = 0; plane < n * c; ++plane) {
    for (int64_t y = 0; y < oh; ++y) {
      const double* src = x.data() + plane * h * w + mirror_index(y, h) * w;
      double* dst = out.data() + (plane * oh + y) * ow;
      for (int64_t xx = 0; xx < ow; ++xx) dst[xx] = src[mirror_index(xx, w)];
    }
  }
  return out;
}

Var forward(Model& model, const Var& batch, Mode mode) {
  const Tensor& in = batch.value();
  if (in.dim() != 4 || in.size(1) != 3) {
    throw ShapeError("forward expects Nx3xHxW input, got " + shape_string(in.shape()));
  }
  const int64_t h = in.size(2), w = in.size(3);
  const int64_t multiple = model.config.pad_multiple();
  const int64_t ph = (multiple - h % multiple) % multiple;
  const int64_t pw = (multiple - w % multiple) % multiple;
  Var padded = (ph == 0 && pw == 0) ? batch : Var(reflect_pad(in, ph, pw));
  Var out = run_unet(model, padded);
  if (ph != 0 || pw != 0) out = ops::crop(out, 0, 0, h, w);
  if (mode == Mode::kInference) {
    Tensor clamped = out.value();
    for (double& v : clamped.values()) v = std::clamp(v, 0.0, 1.0);
    return Var(std::move(clamped));
  }
  return out;
}

Tensor forward(Model& model, const Tensor& image, Mode mode) {
  NoGradGuard no_grad;
  if (image.dim() == 3) {
    return drop_batch_axis(forward(model, Var(add_batch_axis(image)), mode).value());
  }
  return forward(model, Var(image), mode).value();
}

}  // namespace f2t2hit
