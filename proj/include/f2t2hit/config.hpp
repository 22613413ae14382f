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

// Run configuration files: JSON with model/train/data/variant sections,
// strict key checking and dotted-path overrides.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "f2t2hit/data.hpp"
#include "f2t2hit/network.hpp"
#include "f2t2hit/training.hpp"
#include "json.hpp"

namespace f2t2hit {

using Json = nlohmann::json;

struct SynthesisRange {
  double beta_min = 0.2;
  double beta_max = 1.0;
  double sigma_min = 0.0;
  double sigma_max = 5.0;
  uint64_t seed = 0;

  friend bool operator==(const SynthesisRange&, const SynthesisRange&) = default;
};

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "pairs"
  std::string root;                  // pairs: directory with blended/ and transmission/
  int synthetic_count = 4;
  int64_t synthetic_size = 64;
  double transmission_max = 1.0;
  double reflection_max = 1.0;
  SynthesisRange synthesis;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct RunConfig {
  std::string preset = "desk";  // "desk" or "large"
  Variant variant = Variant::kFull;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  /// Throws ConfigError for unknown names.
  static RunConfig from_preset(const std::string& name);
  void validate() const;
};

Json to_json(const ModelConfig& cfg);
Json to_json(const TrainConfig& cfg);
Json to_json(const DataConfig& cfg);
Json to_json(const RunConfig& cfg);

/// Strict readers: every key must be known and correctly typed.
ModelConfig model_config_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);

/// Builds the effective configuration:
///   preset defaults <- config file <- dotted overrides <- seed override.
/// If total_iters is set anywhere but periods is not, periods become an even
/// split of total_iters. Throws ConfigError (with a line number for JSON
/// syntax errors).
RunConfig resolve_run_config(const std::optional<std::string>& file_text,
                             const std::vector<std::pair<std::string, std::string>>& overrides,
                             std::optional<uint64_t> seed_override = std::nullopt);

/// 1-based line of a byte offset in text.
int64_t line_of_offset(const std::string& text, size_t offset);

SyntheticSetOptions synthetic_options(const DataConfig& data);

}  // namespace f2t2hit
