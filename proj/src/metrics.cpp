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

#include "f2t2hit/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "f2t2hit/errors.hpp"
#include "json.hpp"

namespace f2t2hit {
namespace {

std::vector<double> ssim_taps() {
  std::vector<double> taps(kSsimWindow);
  double total = 0.0;
  const int64_t r = kSsimWindow / 2;
  for (int64_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i - r);
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const double* plane, int64_t h, int64_t w,
                                 const std::vector<double>& taps) {
  const int64_t k = static_cast<int64_t>(taps.size());
  const int64_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < k; ++i) acc += taps[i] * plane[y * w + x + i];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < k; ++i) acc += taps[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  if (a.numel() == 0) throw ArgumentError("psnr: empty images");
  double mse = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a_in, const Tensor& b_in) {
  if (a_in.shape() != b_in.shape()) {
    throw ShapeError("ssim: " + shape_string(a_in.shape()) + " vs " + shape_string(b_in.shape()));
  }
  const Tensor a = a_in.dim() == 4 ? drop_batch_axis(a_in) : a_in;
  const Tensor b = b_in.dim() == 4 ? drop_batch_axis(b_in) : b_in;
  if (a.dim() != 3) throw ShapeError("ssim expects CxHxW");
  const int64_t c = a.size(0), h = a.size(1), w = a.size(2);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ArgumentError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                        " is smaller than the 11x11 window");
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto taps = ssim_taps();
  const int64_t plane = h * w;
  std::vector<double> aa(plane), bb(plane), ab(plane);
  double total = 0.0;
  int64_t count = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* pa = a.data() + ch * plane;
    const double* pb = b.data() + ch * plane;
    for (int64_t i = 0; i < plane; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, taps);
    const auto mu_b = filter_valid(pb, h, w, taps);
    const auto e_aa = filter_valid(aa.data(), h, w, taps);
    const auto e_bb = filter_valid(bb.data(), h, w, taps);
    const auto e_ab = filter_valid(ab.data(), h, w, taps);
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport summarize(const std::string& dataset, std::vector<ImageRecord> records) {
  MetricReport r;
  r.dataset = dataset;
  r.count = static_cast<int64_t>(records.size());
  for (const auto& rec : records) {
    r.mean_psnr += rec.psnr;
    r.mean_ssim += rec.ssim;
  }
  if (r.count > 0) {
    r.mean_psnr /= static_cast<double>(r.count);
    r.mean_ssim /= static_cast<double>(r.count);
  }
  r.records = std::move(records);
  return r;
}

MetricReport evaluate_pairs(Model& model, const std::vector<EvalPair>& pairs,
                            const std::string& dataset) {
  if (pairs.empty()) throw ArgumentError("evaluate: dataset '" + dataset + "' is empty");
  std::vector<ImageRecord> records;
  for (const EvalPair& p : pairs) {
    const Tensor pred = forward(model, p.blended, Mode::kInference);
    records.push_back({p.name, psnr(pred, p.transmission), ssim(pred, p.transmission)});
  }
  return summarize(dataset, std::move(records));
}

MetricReport evaluate_dataset(Model& model, const DatasetSpec& spec) {
  const std::string name = spec.name.empty() ? spec.root.filename().string() : spec.name;
  const auto pairs = load_eval_pairs(spec);
  if (pairs.empty()) throw ArgumentError("evaluate: dataset " + spec.root.string() + " is empty");
  return evaluate_pairs(model, pairs, name);
}

std::string report_csv(const MetricReport& report) {
  std::string out = "name,psnr,ssim\n";
  for (const auto& r : report.records) {
    out += csv_field(r.name) + "," + fmt(r.psnr) + "," + fmt(r.ssim) + "\n";
  }
  out += "mean," + fmt(report.mean_psnr) + "," + fmt(report.mean_ssim) + "\n";
  return out;
}

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["dataset"] = report.dataset;
  j["count"] = report.count;
  j["mean_psnr"] = report.mean_psnr;
  j["mean_ssim"] = report.mean_ssim;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    j["records"].push_back({{"name", r.name}, {"psnr", r.psnr}, {"ssim", r.ssim}});
  }
  return j.dump(2) + "\n";
}

void write_report(const MetricReport& report, const std::filesystem::path& dir,
                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  for (const auto& [ext, body] : {std::pair<std::string, std::string>{".csv", report_csv(report)},
                                  {".json", report_json(report)}}) {
    const auto path = dir / (stem + ext);
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw IoError("cannot write " + path.string());
  }
}

}  // namespace f2t2hit
