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
#include "f2t2hit/suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "f2t2hit/blocks.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/image_io.hpp"
#include "f2t2hit/metrics.hpp"
#include "f2t2hit/network.hpp"
#include "f2t2hit/ops.hpp"
#include "f2t2hit/training.hpp"
#include "f2t2hit/windows.hpp"
#include "json.hpp"

namespace f2t2hit::verify {
namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Params>
void randomize(Params& p, std::mt19937_64& rng) {
  visit_params(p, "p", [&](const std::string&, Var& v) {
    for (double& x : v.mutable_value().values()) x = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  });
}

template <typename Params, typename Fn>
GradCheckReport check_block(const std::string& name, Params p, const Shape& shape, Fn fn,
                            uint64_t seed) {
  std::mt19937_64 rng(seed);
  randomize(p, rng);
  std::vector<Var> leaves{parameter(random_uniform(shape, rng))};
  visit_params(p, "p", [&](const std::string&, Var& v) { leaves.push_back(v); });
  GradCheckOptions options;
  options.seed = seed;
  return finite_diff_grad_check(
      name, [&](const std::vector<Var>& in) { return fn(in[0], p); }, leaves, options);
}

CheckResult from_report(const GradCheckReport& r, int draw) {
  CheckResult c;
  c.scope = "gradients";
  c.name = r.op + "[draw " + std::to_string(draw) + "]";
  c.passed = r.passed;
  c.value = r.max_rel_error;
  c.bound = kGradCheckThreshold;
  c.seconds = r.elapsed_seconds;
  if (!r.failure.empty()) {
    c.detail = r.failure;
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d coordinates on %s; worst at leaf %zu[%lld]: analytic %.6e numeric %.6e",
                  r.coordinates, shape_string(r.input_shape).c_str(), r.worst_leaf,
                  static_cast<long long>(r.worst_index), r.worst_analytic, r.worst_numeric);
    c.detail = buf;
  }
  return c;
}

CheckResult make(const std::string& scope, const std::string& name, double value, double bound,
                 bool passed, Clock::time_point start, std::string detail = {}) {
  return {scope, name, passed, value, bound, since(start), std::move(detail)};
}

std::vector<CheckResult> gradient_checks(uint64_t seed) {
  std::vector<CheckResult> out;
  const auto reports = block_gradient_checks(3, seed);
  for (size_t i = 0; i < reports.size(); ++i) out.push_back(from_report(reports[i], static_cast<int>(i % 3)));
  return out;
}

std::vector<CheckResult> spectral_checks(uint64_t seed) {
  std::vector<CheckResult> out;
  for (const Shape& shape : {Shape{3, 16, 16}, Shape{3, 17, 13}}) {
    for (Precision p : {Precision::kSingle, Precision::kDouble}) {
      const auto start = Clock::now();
      const SpectralCheck r = spectral_roundtrip_check(shape, 10, p, seed);
      out.push_back(make("spectral",
                         std::string("roundtrip ") + (p == Precision::kSingle ? "single " : "double ") +
                             shape_string(shape),
                         r.max_error, r.bound, r.passed, start));
    }
  }
  const auto start = Clock::now();
  const double err = spectral_roundtrip_error(Tensor({3, 9, 12}, 0.37));
  out.push_back(make("spectral", "constant input roundtrip", err, 1e-13, err < 1e-13, start));
  return out;
}

std::vector<CheckResult> structure_checks(uint64_t seed) {
  std::vector<CheckResult> out;
  {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    bool exact = true;
    for (int64_t w : {4, 8, 16}) {
      const Tensor x = random_normal({2, 5, 2 * w, 3 * w}, rng);
      exact = exact && window_merge(window_partition(x, w)) == x;
    }
    out.push_back(make("structure", "window partition/merge bit-exact", exact ? 0.0 : 1.0, 0.0, exact, start));
  }
  for (const char* v : {"naf_only", "naf_hit", "full"}) {
    out.push_back(identity_at_init_check(v, 64, 64, seed));
    out.push_back(identity_at_init_check(v, 50, 37, seed));
  }
  {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    const Tensor x = random_uniform({1, 3, 64, 64}, rng, 0.0, 1.0);
    const bool same = reflect_pad(x, 0, 0) == x;
    out.push_back(make("structure", "pad/crop no-op on divisible input", same ? 0.0 : 1.0, 0.0, same, start));
  }
  out.push_back(attention_locality_check(seed));
  {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed + 1);
    const Tensor q = random_normal({4, 4, 4}, rng), k = random_normal({4, 4, 4}, rng),
                 v = random_normal({4, 4, 4}, rng);
    const Tensor weights = ops::spatial_self_correlation_weights(add_batch_axis(q), add_batch_axis(k), 4, 4);
    const Tensor direct = attention_oracle(q, k, v);
    // Apply the kernel's attention weights to v and compare with the oracle.
    double worst = 0.0;
    for (int64_t i = 0; i < 16; ++i)
      for (int64_t c = 0; c < 4; ++c) {
        double acc = 0.0;
        for (int64_t j = 0; j < 16; ++j) acc += weights[i * 16 + j] * v[c * 16 + j];
        worst = std::max(worst, std::abs(acc - direct[c * 16 + i]));
      }
    out.push_back(make("structure", "spatial self-correlation matches attention oracle", worst, 1e-5,
                       worst < 1e-5, start));
  }
  return out;
}

std::vector<CheckResult> schedule_checks() {
  std::vector<CheckResult> out;
  const TrainConfig cfg = TrainConfig::large();
  const double pi = std::acos(-1.0);
  const struct {
    int64_t iteration;
    double expected;
  } peaks[] = {{0, 1.0e-4}, {100000, 5.0e-5}, {200000, 2.5e-5}};
  for (const auto& p : peaks) {
    const auto start = Clock::now();
    const double err = std::abs(cosine_restart_lr(p.iteration, cfg) - p.expected);
    out.push_back(make("schedule", "lr at iteration " + std::to_string(p.iteration), err, 1e-12, err < 1e-12, start));
  }
  for (int j = 0; j < 3; ++j) {
    const auto start = Clock::now();
    double worst = 0.0;
    const double peak = cfg.restart_weights[static_cast<size_t>(j)] * cfg.lr0;
    for (int64_t t : {int64_t{0}, int64_t{50000}, int64_t{99999}}) {
      const double expect = cfg.eta_min + (peak - cfg.eta_min) * (1.0 + std::cos(pi * t / 100000.0)) / 2.0;
      worst = std::max(worst, std::abs(cosine_restart_lr(j * 100000 + t, cfg) - expect));
    }
    out.push_back(make("schedule", "closed form at t = 0, T/2, T-1 in period " + std::to_string(j + 1),
                       worst, 1e-12, worst < 1e-12, start));
  }
  const auto start = Clock::now();
  bool rejects = false;
  try {
    cosine_restart_lr(300000, cfg);
  } catch (const ArgumentError&) {
    rejects = true;
  }
  out.push_back(make("schedule", "out-of-range iteration rejected", rejects ? 0.0 : 1.0, 0.0, rejects, start));
  return out;
}

std::vector<CheckResult> metric_checks(uint64_t seed) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(seed);
  {
    const auto start = Clock::now();
    const Tensor a = random_uniform({3, 16, 16}, rng, 0.0, 0.9);
    Tensor b = a;
    for (double& v : b.values()) v += 0.1;
    const double err = std::abs(psnr(a, b) - 20.0);
    out.push_back(make("metrics", "psnr of a 0.1 offset is 20 dB", err, 1e-9, err < 1e-9, start));
  }
  {
    const auto start = Clock::now();
    const Tensor a = random_uniform({3, 20, 20}, rng, 0.0, 1.0), b = random_uniform({3, 20, 20}, rng, 0.0, 1.0);
    const double err = std::abs(psnr(a, b) - psnr_oracle(a, b));
    out.push_back(make("metrics", "psnr matches loop oracle", err, 1e-9, err < 1e-9, start));
  }
  {
    const auto start = Clock::now();
    const Tensor a = random_uniform({3, 32, 32}, rng, 0.0, 1.0);
    Tensor b = a;
    std::normal_distribution<double> noise(0.0, 0.1);
    for (double& v : b.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
    const double err = std::abs(ssim(a, b) - ssim_oracle(a, b));
    out.push_back(make("metrics", "ssim matches sliding-window oracle (32x32)", err, 1e-6, err < 1e-6, start));
    const double asym = std::abs(ssim(a, b) - ssim(b, a));
    out.push_back(make("metrics", "ssim symmetry", asym, 1e-12, asym < 1e-12, start));
  }
  {
    const auto start = Clock::now();
    const auto r = summarize("check", {{"a", 21.5, 0.81}, {"b", 24.25, 0.9}});
    const double err = std::max(std::abs(r.mean_psnr - 22.875), std::abs(r.mean_ssim - 0.855));
    out.push_back(make("metrics", "report means equal hand averages", err, 1e-9, err < 1e-9, start));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& suite_scopes() {
  static const std::vector<std::string> scopes{"gradients", "spectral", "structure", "schedule", "metrics"};
  return scopes;
}

std::vector<GradCheckReport> block_gradient_checks(int draws, uint64_t seed) {
  std::vector<GradCheckReport> out;
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    out.push_back(check_block("naf_block", make_naf_block(4, rng), {1, 4, 8, 8},
                              [](const Var& x, const auto& p) { return naf_block(x, p); }, s));
  }
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + 100 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    out.push_back(check_block("hit_block", make_hit_block(12, {4, 8, 16}, rng), {1, 12, 16, 16},
                              [](const Var& x, const auto& p) { return hit_block(x, p); }, s));
  }
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + 200 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    out.push_back(check_block("f2t2_block", make_f2t2_block(4, rng), {1, 4, 8, 8},
                              [](const Var& x, const auto& p) { return f2t2_block(x, p); }, s));
  }
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + 300 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    // Odd width on the last draw exercises the half-spectrum edge case.
    const Shape shape = d == draws - 1 ? Shape{1, 2, 8, 7} : Shape{1, 2, 8, 8};
    out.push_back(check_block("fft_layer", make_fft_layer(2, rng), shape,
                              [](const Var& x, const auto& p) { return fft_layer(x, p); }, s));
  }
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + 400 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    out.push_back(check_block("spatial_ffn", make_spatial_ffn(4, rng), {1, 4, 8, 8},
                              [](const Var& x, const auto& p) { return spatial_ffn(x, p); }, s));
  }
  for (int d = 0; d < draws; ++d) {
    const uint64_t s = seed * 1000 + 500 + static_cast<uint64_t>(d);
    std::mt19937_64 rng(s);
    out.push_back(check_block("channel_ffn", make_channel_ffn(4, rng), {1, 4, 8, 8},
                              [](const Var& x, const auto& p) { return channel_ffn(x, p); }, s));
  }
  return out;
}

CheckResult attention_locality_check(uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  HitAttentionParams p = make_hit_attention(6, {4, 8, 16}, rng);
  Tensor& kernel = p.dfe.spatial_value.weight.mutable_value();
  kernel.fill(0.0);
  const int64_t k = kernel.size(1);
  for (int64_t c = 0; c < kernel.size(0); ++c) kernel[(c * k + k / 2) * k + k / 2] = 1.0;
  p.dfe.spatial_value.bias.mutable_value().fill(0.0);

  const Tensor x = random_uniform({1, 6, 32, 48}, rng);
  const Tensor full = hit_wsa(Var(x), p).value();
  int64_t mismatches = 0;
  for (int64_t wy = 0; wy < 2; ++wy)
    for (int64_t wx = 0; wx < 3; ++wx) {
      Tensor masked(x.shape());
      for (int64_t c = 0; c < 6; ++c)
        for (int64_t y = wy * 16; y < wy * 16 + 16; ++y)
          for (int64_t xx = wx * 16; xx < wx * 16 + 16; ++xx) masked.at(0, c, y, xx) = x.at(0, c, y, xx);
      const Tensor part = hit_wsa(Var(masked), p).value();
      for (int64_t c = 0; c < 6; ++c)
        for (int64_t y = wy * 16; y < wy * 16 + 16; ++y)
          for (int64_t xx = wx * 16; xx < wx * 16 + 16; ++xx)
            mismatches += full.at(0, c, y, xx) != part.at(0, c, y, xx);
    }
  return make("structure", "hit_wsa window locality (6 windows, bit-exact)", static_cast<double>(mismatches),
              0.0, mismatches == 0, start);
}

CheckResult identity_at_init_check(const std::string& variant, int64_t height, int64_t width,
                                   uint64_t seed) {
  const auto start = Clock::now();
  Model model = build_model(ModelConfig::desk(), parse_variant(variant), seed);
  std::mt19937_64 rng(seed);
  Tensor x({3, height, width});
  for (double& v : x.values()) v = std::uniform_int_distribution<int>(0, 255)(rng) / 255.0;
  const Tensor y = forward(model, x, Mode::kInference);
  int64_t level_mismatch = 0;
  for (int64_t i = 0; i < x.numel(); ++i) level_mismatch += to_8bit(x[i]) != to_8bit(y[i]);
  const double diff = max_abs_diff(x, y);
  CheckResult r = make("structure",
                       "identity at init: " + variant + " " + std::to_string(height) + "x" + std::to_string(width),
                       diff, 0.0, diff == 0.0 && level_mismatch == 0, start);
  r.detail = std::to_string(level_mismatch) + " 8-bit level mismatches";
  return r;
}

std::vector<CheckResult> run_suite(const std::vector<std::string>& scopes, uint64_t seed,
                                   const std::function<void(const CheckResult&)>& on_result) {
  for (const std::string& s : scopes) {
    bool known = false;
    for (const std::string& k : suite_scopes()) known = known || k == s;
    if (!known) throw ArgumentError("unknown verify scope '" + s + "'");
  }
  const std::vector<std::string>& chosen = scopes.empty() ? suite_scopes() : scopes;
  std::vector<CheckResult> all;
  auto emit = [&](std::vector<CheckResult> batch) {
    for (CheckResult& r : batch) {
      if (on_result) on_result(r);
      all.push_back(std::move(r));
    }
  };
  for (const std::string& scope : suite_scopes()) {
    bool wanted = false;
    for (const std::string& s : chosen) wanted = wanted || s == scope;
    if (!wanted) continue;
    if (scope == "gradients") emit(gradient_checks(seed));
    if (scope == "spectral") emit(spectral_checks(seed));
    if (scope == "structure") emit(structure_checks(seed));
    if (scope == "schedule") emit(schedule_checks());
    if (scope == "metrics") emit(metric_checks(seed));
  }
  return all;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    if (!r.passed) return false;
  }
  return !results.empty();
}

std::string suite_report_json(const std::vector<CheckResult>& results) {
  nlohmann::ordered_json j;
  j["passed"] = all_passed(results);
  j["checks"] = nlohmann::ordered_json::array();
  for (const CheckResult& r : results) {
    j["checks"].push_back({{"scope", r.scope},
                           {"name", r.name},
                           {"passed", r.passed},
                           {"value", r.value},
                           {"bound", r.bound},
                           {"seconds", r.seconds},
                           {"detail", r.detail}});
  }
  return j.dump(2) + "\n";
}

}  // namespace f2t2hit::verify
