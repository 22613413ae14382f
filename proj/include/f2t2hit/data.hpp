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

// Reflection triples: synthesis, cropping, augmentation and paired loading.
//
// Images are 3xHxW tensors with values in [0, 1].

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "f2t2hit/tensor.hpp"

namespace f2t2hit {

struct ReflectionTriple {
  Tensor blended;       // I
  Tensor transmission;  // T
  Tensor reflection;    // R
};

struct SynthesisParams {
  double beta = 0.6;   // reflection strength, [0, 1]
  double sigma = 2.0;  // blur std in pixels, [0, 5]
  uint64_t rng_seed = 0;

  void validate() const;
};

/// Separable Gaussian blur with reflect padding and radius ceil(3 sigma).
/// sigma = 0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& chw, double sigma);

/// I = clip(T + beta * blur(R, sigma), 0, 1).
ReflectionTriple synthesize_pair(const Tensor& transmission, const Tensor& reflection,
                                 const SynthesisParams& params);

struct CropOffset {
  int64_t top = 0;
  int64_t left = 0;
};

/// Uniform offset for a size x size crop; zero along axes that are too small.
CropOffset draw_crop_offset(int64_t height, int64_t width, int64_t size, std::mt19937_64& rng);

/// Reflect-pads images smaller than size, then crops all three planes at
/// the same offset.
ReflectionTriple crop_at(const ReflectionTriple& triple, CropOffset offset, int64_t size);
ReflectionTriple random_crop(const ReflectionTriple& triple, int64_t size, std::mt19937_64& rng);

struct AugmentDraw {
  bool flip = false;    // horizontal flip, applied first
  int quarter_turns = 0;  // counter-clockwise, 0..3
};

AugmentDraw draw_augment(std::mt19937_64& rng);
Tensor apply_augment(const Tensor& chw, const AugmentDraw& draw);
ReflectionTriple apply_augment(const ReflectionTriple& triple, const AugmentDraw& draw);
ReflectionTriple augment(const ReflectionTriple& triple, std::mt19937_64& rng);

/// Independent stream for (seed, worker, sample) so the sample sequence
/// does not depend on how work is split.
std::mt19937_64 sample_rng(uint64_t seed, uint64_t worker, uint64_t sample);

/// Smooth gradients, soft-edged shapes and stripes, values in [lo, hi].
Tensor procedural_scene(int64_t height, int64_t width, std::mt19937_64& rng, double lo = 0.0,
                        double hi = 1.0);

struct SyntheticSetOptions {
  int count = 4;
  int64_t size = 64;
  uint64_t seed = 0;
  double beta_min = 0.2, beta_max = 1.0;
  double sigma_min = 0.0, sigma_max = 5.0;
  double transmission_max = 1.0;
  double reflection_max = 1.0;
};

/// Procedural T/R scenes blended with per-sample (beta, sigma) draws.
std::vector<ReflectionTriple> synthetic_triples(const SyntheticSetOptions& options);

struct DatasetSpec {
  std::filesystem::path root;  // contains blended/ and transmission/
  std::string name;            // report label; defaults to the root's name
};

struct EvalPair {
  std::string name;  // file stem
  Tensor blended;
  Tensor transmission;
};

/// Pairs blended/X.* with transmission/X.* by file stem, sorted by name.
/// Throws ValidationError listing every unmatched or ambiguous file.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>> list_eval_pairs(
    const DatasetSpec& spec);

/// Decodes every listed pair; IoError names an undecodable path and
/// ValidationError names a pair whose sizes differ.
std::vector<EvalPair> load_eval_pairs(const DatasetSpec& spec);

/// Image files directly inside dir, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace f2t2hit
