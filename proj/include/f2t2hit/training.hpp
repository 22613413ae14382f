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

// Optimization: loss, cosine-restart schedule, Adam, the training loop and
// its checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "f2t2hit/data.hpp"
#include "f2t2hit/network.hpp"

namespace f2t2hit {

struct TrainConfig {
  double lr0 = 1e-4;
  std::vector<int64_t> periods{100000, 100000, 100000};
  std::vector<double> restart_weights{1.0, 0.5, 0.25};
  double eta_min = 1e-7;
  int64_t total_iters = 300000;
  int batch_per_device = 1;
  int64_t patch = 512;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global-norm bound; <= 0 disables clipping
  uint64_t seed = 0;
  int64_t checkpoint_every = 10000;  // 0 disables periodic checkpoints
  bool augment = true;
  double ssim_loss_weight = 0.0;

  /// The full-length protocol: 3 x 100k iterations, 512 patches.
  static TrainConfig large();
  /// Short overfitting run on 64x64 crops used for the desk experiment.
  static TrainConfig desk();

  /// Throws ConfigError when periods do not sum to total_iters or any field
  /// is out of range.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// total split into `count` nearly equal parts, remainder on the last.
std::vector<int64_t> even_periods(int64_t total, size_t count);

/// eta_min + (w_j lr0 - eta_min)(1 + cos(pi t / T_j)) / 2 inside period j.
/// Throws ArgumentError unless 0 <= iteration < total_iters.
double cosine_restart_lr(int64_t iteration, const TrainConfig& cfg);

/// Mean absolute error plus an optional ssim_weight * (1 - SSIM) term.
Var reconstruction_loss(const Var& pred, const Tensor& target, double ssim_weight = 0.0);
/// Mean absolute error of two images (ShapeError when shapes differ).
double mean_absolute_error(const Tensor& pred, const Tensor& target);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

struct TrainState {
  Model model;
  TrainConfig config;
  AdamState adam;
  int64_t iteration = 0;  // completed steps
  double last_loss = 0.0;
  double smoothed_loss = 0.0;  // exponential average, factor 0.9
};

TrainState init_state(const ModelConfig& model, Variant variant, const TrainConfig& cfg);

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

/// One Adam step on the batch. The learning rate is
/// cosine_restart_lr(state.iteration) unless overridden. Throws
/// TrainingError naming the offending sample on a non-finite loss.
StepResult train_step(TrainState& state, const std::vector<ReflectionTriple>& batch,
                      std::optional<double> lr_override = std::nullopt);

/// The batch used at a given iteration: samples, crops and augmentation
/// drawn from a stream keyed by (seed, iteration).
std::vector<ReflectionTriple> sample_batch(const std::vector<ReflectionTriple>& data,
                                           const TrainConfig& cfg, int64_t iteration);

struct CurveRow {
  int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct FitOptions {
  /// Receives loss_curve.csv and ckpt_<iteration>.f2ck files; empty keeps
  /// everything in memory.
  std::filesystem::path output_dir;
  /// Stop early after this many completed iterations (simulates an
  /// interrupted run).
  std::optional<int64_t> stop_after;
  std::function<void(const CurveRow&)> on_step;
};

struct FitResult {
  TrainState state;
  std::vector<CurveRow> curve;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs from state.iteration up to config.total_iters. When output_dir has
/// a loss curve from an earlier run, rows before the start are kept.
FitResult fit(TrainState state, const std::vector<ReflectionTriple>& data,
              const FitOptions& options = {});
FitResult fit(const ModelConfig& model, Variant variant, const TrainConfig& cfg,
              const std::vector<ReflectionTriple>& data, const FitOptions& options = {});

std::string curve_csv(const std::vector<CurveRow>& rows);
std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints: an 8-byte little-endian header length, a JSON header indexing
// raw float64 tensors (params/, adam_m/, adam_v/) plus a __metadata__ record,
// then the tensor bytes.

inline constexpr int kCheckpointSchemaVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
/// Rebuilds the model from the stored config and restores every array.
TrainState load_checkpoint(const std::filesystem::path& path);
/// Loads only the parameters into an existing model. Throws CheckpointError
/// naming the first missing, extra or mis-shaped key.
void load_parameters(const std::filesystem::path& path, Model& model);

}  // namespace f2t2hit
