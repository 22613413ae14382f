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

#include "f2t2hit/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/image_io.hpp"

namespace f2t2hit {
namespace {

namespace fs = std::filesystem;

int64_t mirror(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void require_image(const Tensor& t, const char* what) {
  if (t.dim() != 3 || t.size(0) != 3) {
    throw ShapeError(std::string(what) + ": expected 3xHxW, got " + shape_string(t.shape()));
  }
}

std::vector<double> gaussian_taps(double sigma) {
  const int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[static_cast<size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

Tensor crop_plane(const Tensor& chw, int64_t top, int64_t left, int64_t size) {
  const int64_t c = chw.size(0), h = chw.size(1), w = chw.size(2);
  Tensor out({c, size, size});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        out.at(ch, y, x) = chw.at(ch, mirror(top + y, h), mirror(left + x, w));
  return out;
}

double smoothstep_edge(double signed_distance, double softness) {
  return 1.0 / (1.0 + std::exp(signed_distance / softness));
}

}  // namespace

void SynthesisParams::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("synthesis beta must lie in [0, 1], got " + std::to_string(beta));
  }
  if (!(sigma >= 0.0 && sigma <= 5.0)) {
    throw ConfigError("synthesis sigma must lie in [0, 5], got " + std::to_string(sigma));
  }
}

Tensor gaussian_blur(const Tensor& chw, double sigma) {
  if (chw.dim() != 3) throw ShapeError("gaussian_blur expects CxHxW");
  if (sigma < 0.0) throw ArgumentError("gaussian_blur: negative sigma");
  if (sigma == 0.0) return chw;
  const auto taps = gaussian_taps(sigma);
  const int64_t r = static_cast<int64_t>(taps.size() / 2);
  const int64_t c = chw.size(0), h = chw.size(1), w = chw.size(2);
  Tensor rows(chw.shape()), out(chw.shape());
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t k = -r; k <= r; ++k) acc += taps[k + r] * chw.at(ch, y, mirror(x + k, w));
        rows.at(ch, y, x) = acc;
      }
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t k = -r; k <= r; ++k) acc += taps[k + r] * rows.at(ch, mirror(y + k, h), x);
        out.at(ch, y, x) = acc;
      }
  return out;
}

ReflectionTriple synthesize_pair(const Tensor& transmission, const Tensor& reflection,
                                 const SynthesisParams& params) {
  params.validate();
  if (transmission.shape() != reflection.shape()) {
    throw ShapeError("synthesize_pair: T " + shape_string(transmission.shape()) + " vs R " +
                     shape_string(reflection.shape()));
  }
  const Tensor blurred = gaussian_blur(reflection, params.sigma);
  Tensor blended(transmission.shape());
  for (int64_t i = 0; i < blended.numel(); ++i) {
    blended[i] = std::clamp(transmission[i] + params.beta * blurred[i], 0.0, 1.0);
  }
  return {blended, transmission, reflection};
}

CropOffset draw_crop_offset(int64_t height, int64_t width, int64_t size, std::mt19937_64& rng) {
  CropOffset off;
  if (height > size) off.top = std::uniform_int_distribution<int64_t>(0, height - size)(rng);
  if (width > size) off.left = std::uniform_int_distribution<int64_t>(0, width - size)(rng);
  return off;
}

ReflectionTriple crop_at(const ReflectionTriple& triple, CropOffset offset, int64_t size) {
  require_image(triple.blended, "crop");
  if (size <= 0) throw ArgumentError("crop size must be positive");
  const int64_t h = triple.blended.size(1), w = triple.blended.size(2);
  if (h == size && w == size) return triple;
  ReflectionTriple out;
  out.blended = crop_plane(triple.blended, offset.top, offset.left, size);
  out.transmission = crop_plane(triple.transmission, offset.top, offset.left, size);
  if (triple.reflection.numel() > 0) {
    out.reflection = crop_plane(triple.reflection, offset.top, offset.left, size);
  }
  return out;
}

ReflectionTriple random_crop(const ReflectionTriple& triple, int64_t size, std::mt19937_64& rng) {
  require_image(triple.blended, "random_crop");
  const CropOffset off = draw_crop_offset(triple.blended.size(1), triple.blended.size(2), size, rng);
  return crop_at(triple, off, size);
}

AugmentDraw draw_augment(std::mt19937_64& rng) {
  AugmentDraw d;
  d.flip = std::bernoulli_distribution(0.5)(rng);
  d.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
  return d;
}

Tensor apply_augment(const Tensor& chw, const AugmentDraw& draw) {
  if (chw.numel() == 0) return chw;
  if (chw.dim() != 3) throw ShapeError("augment expects CxHxW");
  Tensor cur = chw;
  if (draw.flip) {
    const int64_t c = cur.size(0), h = cur.size(1), w = cur.size(2);
    Tensor f(cur.shape());
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) f.at(ch, y, x) = cur.at(ch, y, w - 1 - x);
    cur = std::move(f);
  }
  for (int t = 0; t < ((draw.quarter_turns % 4) + 4) % 4; ++t) {
    const int64_t c = cur.size(0), h = cur.size(1), w = cur.size(2);
    Tensor r({c, w, h});
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < w; ++y)
        for (int64_t x = 0; x < h; ++x) r.at(ch, y, x) = cur.at(ch, x, w - 1 - y);
    cur = std::move(r);
  }
  return cur;
}

ReflectionTriple apply_augment(const ReflectionTriple& triple, const AugmentDraw& draw) {
  return {apply_augment(triple.blended, draw), apply_augment(triple.transmission, draw),
          apply_augment(triple.reflection, draw)};
}

ReflectionTriple augment(const ReflectionTriple& triple, std::mt19937_64& rng) {
  return apply_augment(triple, draw_augment(rng));
}

std::mt19937_64 sample_rng(uint64_t seed, uint64_t worker, uint64_t sample) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(worker), static_cast<uint32_t>(sample),
                    static_cast<uint32_t>(sample >> 32)};
  return std::mt19937_64(seq);
}

Tensor procedural_scene(int64_t height, int64_t width, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor img({3, height, width});
  double corners[4][3];
  for (auto& corner : corners)
    for (double& v : corner) v = unit(rng);
  for (int64_t y = 0; y < height; ++y) {
    const double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
    for (int64_t x = 0; x < width; ++x) {
      const double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = (1 - fy) * ((1 - fx) * corners[0][c] + fx * corners[1][c]) +
                          fy * ((1 - fx) * corners[2][c] + fx * corners[3][c]);
      }
    }
  }
  const int shapes = 3 + static_cast<int>(unit(rng) * 4);
  for (int s = 0; s < shapes; ++s) {
    const double cy = unit(rng) * height, cx = unit(rng) * width;
    const double ry = (0.1 + 0.3 * unit(rng)) * height, rx = (0.1 + 0.3 * unit(rng)) * width;
    const bool ellipse = unit(rng) < 0.5;
    double color[3];
    for (double& v : color) v = unit(rng);
    for (int64_t y = 0; y < height; ++y)
      for (int64_t x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const double dist = ellipse ? std::sqrt(dy * dy + dx * dx) - 1.0
                                    : std::max(std::abs(dy), std::abs(dx)) - 1.0;
        const double alpha = smoothstep_edge(dist * std::min(ry, rx), 0.75);
        for (int c = 0; c < 3; ++c) {
          img.at(c, y, x) = (1 - alpha) * img.at(c, y, x) + alpha * color[c];
        }
      }
  }
  const double freq = 2.0 * std::acos(-1.0) * (1.0 + 4.0 * unit(rng)) / std::max(height, width);
  const double angle = unit(rng) * std::acos(-1.0);
  const double amp = 0.08 * unit(rng);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) {
      const double wave = amp * std::sin(freq * (x * std::cos(angle) + y * std::sin(angle)));
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x) + wave, 0.0, 1.0);
        img.at(c, y, x) = lo + (hi - lo) * v;
      }
    }
  return img;
}

std::vector<ReflectionTriple> synthetic_triples(const SyntheticSetOptions& options) {
  if (options.count < 0 || options.size < 1) throw ArgumentError("invalid synthetic set size");
  std::vector<ReflectionTriple> out;
  for (int i = 0; i < options.count; ++i) {
    auto rng = sample_rng(options.seed, 0, static_cast<uint64_t>(i));
    const Tensor t = procedural_scene(options.size, options.size, rng, 0.0, options.transmission_max);
    const Tensor r = procedural_scene(options.size, options.size, rng, 0.0, options.reflection_max);
    SynthesisParams p;
    p.beta = std::uniform_real_distribution<double>(options.beta_min, options.beta_max)(rng);
    p.sigma = std::uniform_real_distribution<double>(options.sigma_min, options.sigma_max)(rng);
    p.rng_seed = options.seed;
    out.push_back(synthesize_pair(t, r, p));
  }
  return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() || name[0] == '.') continue;
    if (has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return files;
}

std::vector<std::pair<fs::path, fs::path>> list_eval_pairs(const DatasetSpec& spec) {
  const fs::path blended_dir = spec.root / "blended";
  const fs::path transmission_dir = spec.root / "transmission";
  if (!fs::is_directory(blended_dir) || !fs::is_directory(transmission_dir)) {
    throw IoError("dataset " + spec.root.string() + " needs blended/ and transmission/");
  }
  std::map<std::string, std::vector<fs::path>> blended, transmission;
  for (const auto& p : list_images(blended_dir)) blended[p.stem().string()].push_back(p);
  for (const auto& p : list_images(transmission_dir)) transmission[p.stem().string()].push_back(p);

  std::vector<std::string> problems;
  for (const auto& [stem, files] : blended) {
    auto it = transmission.find(stem);
    if (it == transmission.end()) {
      problems.push_back("no transmission counterpart for " + files.front().string());
    } else if (files.size() > 1 || it->second.size() > 1) {
      problems.push_back("ambiguous pair for stem '" + stem + "'");
    }
  }
  for (const auto& [stem, files] : transmission) {
    if (!blended.count(stem)) {
      problems.push_back("no blended counterpart for " + files.front().string());
    }
  }
  if (!problems.empty()) {
    std::string msg = "dataset " + spec.root.string() + " has unmatched files:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& [stem, files] : blended) pairs.emplace_back(files.front(), transmission[stem].front());
  return pairs;
}

std::vector<EvalPair> load_eval_pairs(const DatasetSpec& spec) {
  std::vector<EvalPair> out;
  for (const auto& [b, t] : list_eval_pairs(spec)) {
    EvalPair pair{b.stem().string(), read_image(b), read_image(t)};
    if (pair.blended.shape() != pair.transmission.shape()) {
      throw ValidationError("pair '" + pair.name + "' has mismatched sizes " +
                            shape_string(pair.blended.shape()) + " vs " +
                            shape_string(pair.transmission.shape()));
    }
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace f2t2hit
