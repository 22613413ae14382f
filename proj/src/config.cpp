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

#include "f2t2hit/config.hpp"

#include <algorithm>
#include <cmath>

#include "f2t2hit/errors.hpp"

namespace f2t2hit {
namespace {

// Verifies `user` only uses keys present in `schema` with compatible types.
void check_keys(const Json& schema, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    const Json& ref = schema[it.key()];
    const Json& val = it.value();
    if (ref.is_object()) {
      check_keys(ref, val, key);
    } else if (ref.is_boolean() && !val.is_boolean()) {
      throw ConfigError("'" + key + "' must be a boolean");
    } else if (ref.is_string() && !val.is_string()) {
      throw ConfigError("'" + key + "' must be a string");
    } else if (ref.is_array() && !val.is_array()) {
      throw ConfigError("'" + key + "' must be an array");
    } else if (ref.is_number()) {
      if (!val.is_number()) throw ConfigError("'" + key + "' must be a number");
      if ((ref.is_number_integer()) && val.is_number_float()) {
        const double d = val.get<double>();
        if (d != std::floor(d)) throw ConfigError("'" + key + "' must be an integer");
      }
      if (ref.is_number_unsigned() && val.is_number_integer() && !val.is_number_unsigned() &&
          val.get<int64_t>() < 0) {
        throw ConfigError("'" + key + "' must be non-negative");
      }
    }
  }
}

void merge_into(Json& base, const Json& user) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (it.value().is_object() && base[it.key()].is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

template <typename T>
T read(const Json& j, const char* key, const std::string& section) {
  try {
    const Json& v = j.at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (v.is_number_float()) return static_cast<T>(v.get<double>());
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid '" + section + "." + key + "': " + e.what());
  }
}

bool contains_path(const Json& j, const std::vector<std::string>& path) {
  const Json* cur = &j;
  for (const auto& p : path) {
    if (!cur->is_object() || !cur->contains(p)) return false;
    cur = &(*cur)[p];
  }
  return true;
}

Json parse_override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return Json(text);
  }
}

}  // namespace

int64_t line_of_offset(const std::string& text, size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
}

Json to_json(const ModelConfig& c) {
  return Json{{"base_width", c.base_width},
              {"num_levels", c.num_levels},
              {"enc_blocks", c.enc_blocks},
              {"dec_blocks", c.dec_blocks},
              {"middle_blocks", c.middle_blocks},
              {"hit_enabled", c.hit_enabled},
              {"f2t2_skip_levels", c.f2t2_skip_levels},
              {"window_hierarchy", c.window_hierarchy}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"lr0", c.lr0},
              {"periods", c.periods},
              {"restart_weights", c.restart_weights},
              {"eta_min", c.eta_min},
              {"total_iters", c.total_iters},
              {"batch_per_device", c.batch_per_device},
              {"patch", c.patch},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"grad_clip", c.grad_clip},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"augment", c.augment},
              {"ssim_loss_weight", c.ssim_loss_weight}};
}

Json to_json(const DataConfig& c) {
  return Json{{"source", c.source},
              {"root", c.root},
              {"synthetic_count", c.synthetic_count},
              {"synthetic_size", c.synthetic_size},
              {"transmission_max", c.transmission_max},
              {"reflection_max", c.reflection_max},
              {"synthesis",
               {{"beta_min", c.synthesis.beta_min},
                {"beta_max", c.synthesis.beta_max},
                {"sigma_min", c.synthesis.sigma_min},
                {"sigma_max", c.synthesis.sigma_max},
                {"seed", c.synthesis.seed}}}};
}

Json to_json(const RunConfig& c) {
  return Json{{"preset", c.preset},
              {"variant", to_string(c.variant)},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"data", to_json(c.data)}};
}

ModelConfig model_config_from_json(const Json& j) {
  check_keys(to_json(ModelConfig{}), j, "model");
  ModelConfig c;
  const std::string s = "model";
  if (j.contains("base_width")) c.base_width = read<int64_t>(j, "base_width", s);
  if (j.contains("num_levels")) c.num_levels = read<int>(j, "num_levels", s);
  if (j.contains("enc_blocks")) c.enc_blocks = read<std::vector<int>>(j, "enc_blocks", s);
  if (j.contains("dec_blocks")) c.dec_blocks = read<std::vector<int>>(j, "dec_blocks", s);
  if (j.contains("middle_blocks")) c.middle_blocks = read<int>(j, "middle_blocks", s);
  if (j.contains("hit_enabled")) c.hit_enabled = read<bool>(j, "hit_enabled", s);
  if (j.contains("f2t2_skip_levels")) {
    c.f2t2_skip_levels = read<std::vector<int>>(j, "f2t2_skip_levels", s);
  }
  if (j.contains("window_hierarchy")) {
    c.window_hierarchy = read<std::vector<int64_t>>(j, "window_hierarchy", s);
  }
  return c;
}

TrainConfig train_config_from_json(const Json& j) {
  check_keys(to_json(TrainConfig{}), j, "train");
  TrainConfig c;
  const std::string s = "train";
  if (j.contains("lr0")) c.lr0 = read<double>(j, "lr0", s);
  if (j.contains("periods")) c.periods = read<std::vector<int64_t>>(j, "periods", s);
  if (j.contains("restart_weights")) {
    c.restart_weights = read<std::vector<double>>(j, "restart_weights", s);
  }
  if (j.contains("eta_min")) c.eta_min = read<double>(j, "eta_min", s);
  if (j.contains("total_iters")) c.total_iters = read<int64_t>(j, "total_iters", s);
  if (j.contains("batch_per_device")) c.batch_per_device = read<int>(j, "batch_per_device", s);
  if (j.contains("patch")) c.patch = read<int64_t>(j, "patch", s);
  if (j.contains("beta1")) c.beta1 = read<double>(j, "beta1", s);
  if (j.contains("beta2")) c.beta2 = read<double>(j, "beta2", s);
  if (j.contains("adam_eps")) c.adam_eps = read<double>(j, "adam_eps", s);
  if (j.contains("grad_clip")) c.grad_clip = read<double>(j, "grad_clip", s);
  if (j.contains("seed")) c.seed = read<uint64_t>(j, "seed", s);
  if (j.contains("checkpoint_every")) c.checkpoint_every = read<int64_t>(j, "checkpoint_every", s);
  if (j.contains("augment")) c.augment = read<bool>(j, "augment", s);
  if (j.contains("ssim_loss_weight")) c.ssim_loss_weight = read<double>(j, "ssim_loss_weight", s);
  return c;
}

namespace {

DataConfig data_config_from_json(const Json& j) {
  check_keys(to_json(DataConfig{}), j, "data");
  DataConfig c;
  const std::string s = "data";
  if (j.contains("source")) c.source = read<std::string>(j, "source", s);
  if (j.contains("root")) c.root = read<std::string>(j, "root", s);
  if (j.contains("synthetic_count")) c.synthetic_count = read<int>(j, "synthetic_count", s);
  if (j.contains("synthetic_size")) c.synthetic_size = read<int64_t>(j, "synthetic_size", s);
  if (j.contains("transmission_max")) c.transmission_max = read<double>(j, "transmission_max", s);
  if (j.contains("reflection_max")) c.reflection_max = read<double>(j, "reflection_max", s);
  if (j.contains("synthesis")) {
    const Json& y = j["synthesis"];
    const std::string ss = "data.synthesis";
    if (y.contains("beta_min")) c.synthesis.beta_min = read<double>(y, "beta_min", ss);
    if (y.contains("beta_max")) c.synthesis.beta_max = read<double>(y, "beta_max", ss);
    if (y.contains("sigma_min")) c.synthesis.sigma_min = read<double>(y, "sigma_min", ss);
    if (y.contains("sigma_max")) c.synthesis.sigma_max = read<double>(y, "sigma_max", ss);
    if (y.contains("seed")) c.synthesis.seed = read<uint64_t>(y, "seed", ss);
  }
  return c;
}

}  // namespace

RunConfig RunConfig::from_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") {
    c.model = ModelConfig::desk();
    c.train = TrainConfig::desk();
  } else if (name == "large") {
    c.model = ModelConfig::large();
    c.train = TrainConfig::large();
    c.data.synthetic_size = 512;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk or large)");
  }
  return c;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data.source != "synthetic" && data.source != "pairs") {
    throw ConfigError("data.source must be 'synthetic' or 'pairs', got '" + data.source + "'");
  }
  if (data.source == "pairs" && data.root.empty()) {
    throw ConfigError("data.root is required when data.source is 'pairs'");
  }
  if (data.synthetic_count < 1) throw ConfigError("data.synthetic_count must be positive");
  if (data.synthetic_size < 2) throw ConfigError("data.synthetic_size must be at least 2");
  for (double v : {data.transmission_max, data.reflection_max}) {
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError("data.*_max values must lie in (0, 1]");
  }
  const auto& s = data.synthesis;
  if (!(0.0 <= s.beta_min && s.beta_min <= s.beta_max && s.beta_max <= 1.0)) {
    throw ConfigError("data.synthesis beta range must satisfy 0 <= beta_min <= beta_max <= 1");
  }
  if (!(0.0 <= s.sigma_min && s.sigma_min <= s.sigma_max && s.sigma_max <= 5.0)) {
    throw ConfigError("data.synthesis sigma range must satisfy 0 <= sigma_min <= sigma_max <= 5");
  }
}

RunConfig resolve_run_config(const std::optional<std::string>& file_text,
                             const std::vector<std::pair<std::string, std::string>>& overrides,
                             std::optional<uint64_t> seed_override) {
  Json user = Json::object();
  if (file_text) {
    try {
      user = Json::parse(*file_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("malformed JSON at line " +
                        std::to_string(line_of_offset(*file_text, e.byte > 0 ? e.byte - 1 : 0)) +
                        ": " + e.what());
    }
    if (!user.is_object()) throw ConfigError("configuration root must be a JSON object");
  }
  for (const auto& [key, text] : overrides) {
    if (key.empty() || key.front() == '.' || key.back() == '.') {
      throw ConfigError("malformed override key '" + key + "'");
    }
    Json* cur = &user;
    size_t start = 0;
    while (true) {
      const size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (dot == std::string::npos) {
        (*cur)[part] = parse_override_value(text);
        break;
      }
      if (!cur->contains(part)) (*cur)[part] = Json::object();
      cur = &(*cur)[part];
      if (!cur->is_object()) throw ConfigError("override '" + key + "' descends into a value");
      start = dot + 1;
    }
  }

  std::string preset = "desk";
  if (user.contains("preset")) {
    if (!user["preset"].is_string()) throw ConfigError("'preset' must be a string");
    preset = user["preset"].get<std::string>();
  }
  RunConfig base = RunConfig::from_preset(preset);
  Json effective = to_json(base);
  check_keys(effective, user, "");
  merge_into(effective, user);

  RunConfig out;
  out.preset = preset;
  out.variant = parse_variant(effective["variant"].get<std::string>());
  out.model = model_config_from_json(effective["model"]);
  out.train = train_config_from_json(effective["train"]);
  out.data = data_config_from_json(effective["data"]);
  if (contains_path(user, {"train", "total_iters"}) && !contains_path(user, {"train", "periods"})) {
    out.train.periods = even_periods(out.train.total_iters, out.train.restart_weights.size());
  }
  if (seed_override) out.train.seed = *seed_override;
  out.validate();
  return out;
}

SyntheticSetOptions synthetic_options(const DataConfig& data) {
  SyntheticSetOptions o;
  o.count = data.synthetic_count;
  o.size = data.synthetic_size;
  o.seed = data.synthesis.seed;
  o.beta_min = data.synthesis.beta_min;
  o.beta_max = data.synthesis.beta_max;
  o.sigma_min = data.synthesis.sigma_min;
  o.sigma_max = data.synthesis.sigma_max;
  o.transmission_max = data.transmission_max;
  o.reflection_max = data.reflection_max;
  return o;
}

}  // namespace f2t2hit
