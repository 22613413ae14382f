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

// Full-reference image quality metrics and dataset reports.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "f2t2hit/data.hpp"
#include "f2t2hit/network.hpp"
#include "f2t2hit/tensor.hpp"

namespace f2t2hit {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int64_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// 10 log10(1 / MSE) with peak 1; identical inputs give kPsnrCap.
double psnr(const Tensor& a, const Tensor& b);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1)
/// over all window positions fully inside the image, per channel, averaged
/// over channels and positions. Accepts CxHxW or 1xCxHxW.
double ssim(const Tensor& a, const Tensor& b);

struct ImageRecord {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::string dataset;
  int64_t count = 0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<ImageRecord> records;
};

/// Sequential arithmetic means in record order.
MetricReport summarize(const std::string& dataset, std::vector<ImageRecord> records);

/// Scores inference-mode outputs against the transmission images.
MetricReport evaluate_pairs(Model& model, const std::vector<EvalPair>& pairs,
                            const std::string& dataset);
MetricReport evaluate_dataset(Model& model, const DatasetSpec& spec);

/// One row per image (name, psnr, ssim) followed by a "mean" summary row.
std::string report_csv(const MetricReport& report);
std::string report_json(const MetricReport& report);
/// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
void write_report(const MetricReport& report, const std::filesystem::path& dir,
                  const std::string& stem = "metrics");

}  // namespace f2t2hit
