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

#include "f2t2hit/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "f2t2hit/errors.hpp"
#include "f2t2hit/metrics.hpp"
#include "f2t2hit/ops.hpp"

namespace f2t2hit {
namespace {

constexpr uint64_t kTrainStream = 1;

Tensor stack_batch(const std::vector<ReflectionTriple>& batch, bool blended) {
  const Tensor& first = blended ? batch.front().blended : batch.front().transmission;
  Shape shape{static_cast<int64_t>(batch.size())};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const int64_t each = first.numel();
  for (size_t i = 0; i < batch.size(); ++i) {
    const Tensor& t = blended ? batch[i].blended : batch[i].transmission;
    if (t.shape() != first.shape()) throw ShapeError("batch images differ in shape");
    std::copy(t.values().begin(), t.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(i * each));
  }
  return out;
}

// Differentiable SSIM of pred against a fixed target, same window as the
// metric; positions are restricted to the valid region.
Var ssim_term(const Var& pred, const Tensor& target) {
  const int64_t c = pred.value().size(1), h = pred.value().size(2), w = pred.value().size(3);
  const int64_t k = kSsimWindow, r = k / 2;
  if (h < k || w < k) throw ArgumentError("ssim loss needs images of at least 11x11");
  std::vector<double> taps(k);
  double total = 0.0;
  for (int64_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(i - r);
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  Tensor kernel({c, k, k});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < k; ++y)
      for (int64_t x = 0; x < k; ++x) kernel[(ch * k + y) * k + x] = taps[y] * taps[x] / (total * total);
  const Var weight(kernel), bias(Tensor({c}, 0.0));
  auto blur = [&](const Var& v) {
    return ops::crop(ops::depthwise_conv(v, weight, bias), r, r, h - 2 * r, w - 2 * r);
  };
  const Var b(target);
  const Var mu_a = blur(pred), mu_b = blur(b);
  const Var e_aa = blur(ops::mul(pred, pred)), e_bb = blur(ops::mul(b, b));
  const Var e_ab = blur(ops::mul(pred, b));
  const Var mu_ab = ops::mul(mu_a, mu_b);
  const Var mu_aa = ops::mul(mu_a, mu_a), mu_bb = ops::mul(mu_b, mu_b);
  const double c1 = 1e-4, c2 = 9e-4;
  const Var num = ops::mul(ops::add_scalar(ops::scale(mu_ab, 2.0), c1),
                           ops::add_scalar(ops::scale(ops::sub(e_ab, mu_ab), 2.0), c2));
  const Var den = ops::mul(ops::add_scalar(ops::add(mu_aa, mu_bb), c1),
                           ops::add_scalar(ops::add(ops::sub(e_aa, mu_aa), ops::sub(e_bb, mu_bb)), c2));
  return ops::mean(ops::div(num, den));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::large() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.lr0 = 2e-3;
  c.total_iters = 2000;
  c.periods = even_periods(c.total_iters, c.restart_weights.size());
  c.patch = 64;
  c.checkpoint_every = 500;
  c.augment = false;
  return c;
}

void TrainConfig::validate() const {
  if (periods.size() != restart_weights.size()) {
    throw ConfigError("train.periods and train.restart_weights must have the same length");
  }
  if (periods.empty()) throw ConfigError("train.periods must not be empty");
  int64_t sum = 0;
  for (int64_t p : periods) {
    if (p < 0) throw ConfigError("train.periods entries must be non-negative");
    sum += p;
  }
  if (total_iters < 0) throw ConfigError("train.total_iters must be non-negative");
  if (sum != total_iters) {
    throw ConfigError("train.periods sum to " + std::to_string(sum) + " but train.total_iters is " +
                      std::to_string(total_iters));
  }
  for (double w : restart_weights) {
    if (!(w >= 0.0)) throw ConfigError("train.restart_weights must be non-negative");
  }
  if (!(lr0 >= 0.0)) throw ConfigError("train.lr0 must be non-negative");
  if (!(eta_min >= 0.0)) throw ConfigError("train.eta_min must be non-negative");
  if (batch_per_device < 1) throw ConfigError("train.batch_per_device must be at least 1");
  if (patch < 1) throw ConfigError("train.patch must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
  if (!(ssim_loss_weight >= 0.0)) throw ConfigError("train.ssim_loss_weight must be non-negative");
}

std::vector<int64_t> even_periods(int64_t total, size_t count) {
  if (count == 0) throw ConfigError("cannot split iterations into zero periods");
  const int64_t n = static_cast<int64_t>(count);
  std::vector<int64_t> out(count, total / n);
  out.back() += total % n;
  return out;
}

double cosine_restart_lr(int64_t iteration, const TrainConfig& cfg) {
  if (iteration < 0 || iteration >= cfg.total_iters) {
    throw ArgumentError("iteration " + std::to_string(iteration) + " outside [0, " +
                        std::to_string(cfg.total_iters) + ")");
  }
  int64_t start = 0;
  for (size_t j = 0; j < cfg.periods.size(); ++j) {
    const int64_t len = cfg.periods[j];
    if (iteration < start + len) {
      const double t = static_cast<double>(iteration - start);
      const double peak = cfg.restart_weights[j] * cfg.lr0;
      const double pi = std::acos(-1.0);
      return cfg.eta_min + (peak - cfg.eta_min) * (1.0 + std::cos(pi * t / static_cast<double>(len))) / 2.0;
    }
    start += len;
  }
  throw ArgumentError("iteration " + std::to_string(iteration) + " is beyond the schedule periods");
}

double mean_absolute_error(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("loss: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  double acc = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred[i] - target[i]);
  return pred.numel() > 0 ? acc / static_cast<double>(pred.numel()) : 0.0;
}

Var reconstruction_loss(const Var& pred, const Tensor& target, double ssim_weight) {
  Var loss = ops::mean_abs_error(pred, target);
  if (ssim_weight > 0.0) {
    const Var one_minus = ops::add_scalar(ops::scale(ssim_term(pred, target), -1.0), 1.0);
    loss = ops::add(loss, ops::scale(one_minus, ssim_weight));
  }
  return loss;
}

TrainState init_state(const ModelConfig& model, Variant variant, const TrainConfig& cfg) {
  cfg.validate();
  TrainState s{build_model(model, variant, cfg.seed), cfg, {}, 0, 0.0, 0.0};
  for (auto& [name, p] : s.model.named_parameters()) {
    s.adam.m.emplace_back(p.shape(), 0.0);
    s.adam.v.emplace_back(p.shape(), 0.0);
  }
  return s;
}

std::vector<ReflectionTriple> sample_batch(const std::vector<ReflectionTriple>& data,
                                           const TrainConfig& cfg, int64_t iteration) {
  if (data.empty()) throw ArgumentError("training data is empty");
  auto rng = sample_rng(cfg.seed, kTrainStream, static_cast<uint64_t>(iteration));
  std::vector<ReflectionTriple> batch;
  for (int b = 0; b < cfg.batch_per_device; ++b) {
    const auto idx = std::uniform_int_distribution<size_t>(0, data.size() - 1)(rng);
    ReflectionTriple t = random_crop(data[idx], cfg.patch, rng);
    if (cfg.augment) t = augment(t, rng);
    batch.push_back(std::move(t));
  }
  return batch;
}

StepResult train_step(TrainState& state, const std::vector<ReflectionTriple>& batch,
                      std::optional<double> lr_override) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  const TrainConfig& cfg = state.config;
  StepResult result;
  result.lr = lr_override ? *lr_override : cosine_restart_lr(state.iteration, cfg);

  auto params = state.model.named_parameters();
  for (auto& [name, p] : params) p.zero_grad();
  const Tensor input = stack_batch(batch, true);
  const Tensor target = stack_batch(batch, false);
  Var pred = forward(state.model, Var(input), Mode::kTraining);
  Var loss = reconstruction_loss(pred, target, cfg.ssim_loss_weight);
  result.loss = loss.value()[0];
  if (!std::isfinite(result.loss)) {
    std::string offender = "unknown";
    const int64_t each = pred.value().numel() / static_cast<int64_t>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      for (int64_t j = 0; j < each; ++j) {
        if (!std::isfinite(pred.value()[static_cast<int64_t>(i) * each + j])) {
          offender = std::to_string(i);
          break;
        }
      }
      if (offender != "unknown") break;
    }
    throw TrainingError("non-finite loss at iteration " + std::to_string(state.iteration) +
                        " (batch index " + offender + ")");
  }
  backward(loss);

  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    const Tensor g = p.grad();
    for (double v : g.values()) sq += v * v;
  }
  result.grad_norm = std::sqrt(sq);
  const double clip = (cfg.grad_clip > 0.0 && result.grad_norm > cfg.grad_clip)
                          ? cfg.grad_clip / result.grad_norm
                          : 1.0;

  const double t = static_cast<double>(state.iteration + 1);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Var& p = params[i].second;
    if (!p.has_grad()) continue;
    const Tensor g = p.grad();
    Tensor& m = state.adam.m[i];
    Tensor& v = state.adam.v[i];
    Tensor& w = p.mutable_value();
    for (int64_t k = 0; k < w.numel(); ++k) {
      const double gk = g[k] * clip;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      w[k] -= result.lr * (m[k] / bias1) / (std::sqrt(v[k] / bias2) + cfg.adam_eps);
    }
    p.zero_grad();
  }
  state.smoothed_loss =
      state.iteration == 0 ? result.loss : 0.9 * state.smoothed_loss + 0.1 * result.loss;
  state.last_loss = result.loss;
  ++state.iteration;
  return result;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "iteration,lr,loss\n";
  for (const auto& r : rows) out += std::to_string(r.iteration) + "," + fmt(r.lr) + "," + fmt(r.loss) + "\n";
  return out;
}

std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CurveRow> rows;
  std::string line;
  std::getline(in, line);
  if (line != "iteration,lr,loss") throw ValidationError("unexpected loss curve header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CurveRow r;
    char comma1 = 0, comma2 = 0;
    std::string lr, loss;
    ss >> r.iteration >> comma1;
    std::getline(ss, lr, ',');
    std::getline(ss, loss);
    if (comma1 != ',') throw ValidationError("malformed loss curve row: " + line);
    (void)comma2;
    r.lr = std::stod(lr);
    r.loss = std::stod(loss);
    rows.push_back(r);
  }
  return rows;
}

FitResult fit(TrainState state, const std::vector<ReflectionTriple>& data,
              const FitOptions& options) {
  state.config.validate();
  FitResult result;
  const bool files = !options.output_dir.empty();
  const auto curve_path = options.output_dir / "loss_curve.csv";
  if (files) {
    std::filesystem::create_directories(options.output_dir);
    if (state.iteration > 0 && std::filesystem::exists(curve_path)) {
      for (const CurveRow& r : read_curve_csv(curve_path)) {
        if (r.iteration < state.iteration) result.curve.push_back(r);
      }
    }
  }
  auto flush_curve = [&]() {
    if (!files) return;
    std::ofstream out(curve_path, std::ios::binary | std::ios::trunc);
    out << curve_csv(result.curve);
    if (!out) throw IoError("cannot write " + curve_path.string());
  };
  const TrainConfig& cfg = state.config;
  if (state.iteration < cfg.total_iters && data.empty()) {
    throw ArgumentError("fit: no training data");
  }
  while (state.iteration < cfg.total_iters) {
    if (options.stop_after && state.iteration >= *options.stop_after) break;
    const int64_t it = state.iteration;
    const StepResult step = train_step(state, sample_batch(data, cfg, it));
    const CurveRow row{it, step.lr, step.loss};
    result.curve.push_back(row);
    if (options.on_step) options.on_step(row);
    if (files && cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%08lld.f2ck", static_cast<long long>(state.iteration));
      const auto path = options.output_dir / name;
      save_checkpoint(path, state);
      result.checkpoints.push_back(path);
      flush_curve();
    }
  }
  flush_curve();
  result.state = std::move(state);
  return result;
}

FitResult fit(const ModelConfig& model, Variant variant, const TrainConfig& cfg,
              const std::vector<ReflectionTriple>& data, const FitOptions& options) {
  return fit(init_state(model, variant, cfg), data, options);
}

}  // namespace f2t2hit
