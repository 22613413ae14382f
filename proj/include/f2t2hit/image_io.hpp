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

// 8-bit PNG/JPEG decoding to 3xHxW tensors in [0, 1] and PNG encoding.

#pragma once

#include <filesystem>

#include "f2t2hit/tensor.hpp"

namespace f2t2hit {

/// Decodes PNG or JPEG (detected from the file signature). Grayscale is
/// replicated to three channels and alpha is dropped. Throws IoError naming
/// the path on any failure.
Tensor read_image(const std::filesystem::path& path);

/// Writes a 3xHxW (or 1x3xHxW) tensor as 8-bit RGB PNG. Values are clamped
/// to [0, 1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// round(clamp(v, 0, 1) * 255): the level write_png stores for v.
unsigned char to_8bit(double v);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace f2t2hit
