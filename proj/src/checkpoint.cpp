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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "f2t2hit/config.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/training.hpp"

namespace f2t2hit {
namespace {

namespace fs = std::filesystem;

constexpr const char* kFormat = "f2t2hit-checkpoint";
constexpr uint64_t kMaxHeader = uint64_t{1} << 30;

const std::set<std::string>& metadata_keys() {
  static const std::set<std::string> keys{"format",    "schema_version", "config",
                                          "variant",   "seed",           "iteration",
                                          "rng",       "last_loss",      "smoothed_loss"};
  return keys;
}

struct Archive {
  Json metadata;
  std::map<std::string, Tensor> tensors;
};

Json loss_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_archive(const fs::path& path, const Json& metadata,
                   std::vector<std::pair<std::string, const Tensor*>> tensors) {
  // Payload order follows the (sorted) key order of the JSON index.
  std::sort(tensors.begin(), tensors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Json header = Json::object();
  header["__metadata__"] = metadata;
  uint64_t offset = 0;
  for (const auto& [key, t] : tensors) {
    const uint64_t bytes = static_cast<uint64_t>(t->numel()) * sizeof(double);
    header[key] = {{"dtype", "F64"}, {"shape", t->shape()}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  const std::string text = header.dump();
  const uint64_t len = text.size();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    unsigned char le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(len >> (8 * i));
    out.write(reinterpret_cast<const char*>(le), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [key, t] : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->numel() * sizeof(double)));
    }
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Archive read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 8) throw CheckpointError("checkpoint " + path.string() + " is truncated");
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  if (len > kMaxHeader || 8 + len > bytes.size()) {
    throw CheckpointError("checkpoint " + path.string() + " has a corrupt header length");
  }
  Json header;
  try {
    header = Json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " header is not JSON: " + e.what());
  }
  if (!header.is_object() || !header.contains("__metadata__")) {
    throw CheckpointError("checkpoint " + path.string() + " has no __metadata__ record");
  }
  Archive a;
  a.metadata = header["__metadata__"];
  const uint64_t data_start = 8 + len;
  const uint64_t data_size = bytes.size() - data_start;
  for (auto it = header.begin(); it != header.end(); ++it) {
    if (it.key() == "__metadata__") continue;
    try {
      const Json& e = it.value();
      if (e.at("dtype") != "F64") throw CheckpointError("tensor '" + it.key() + "' is not F64");
      const Shape shape = e.at("shape").get<Shape>();
      const auto offsets = e.at("data_offsets").get<std::vector<uint64_t>>();
      const uint64_t numel = static_cast<uint64_t>(shape_numel(shape));
      if (offsets.size() != 2 || offsets[1] < offsets[0] || offsets[1] > data_size ||
          offsets[1] - offsets[0] != numel * sizeof(double)) {
        throw CheckpointError("tensor '" + it.key() + "' has inconsistent offsets");
      }
      Tensor t(shape);
      std::memcpy(t.data(), bytes.data() + data_start + offsets[0], numel * sizeof(double));
      a.tensors.emplace(it.key(), std::move(t));
    } catch (const nlohmann::json::exception& ex) {
      throw CheckpointError("tensor '" + it.key() + "' has a malformed index entry: " + ex.what());
    }
  }
  return a;
}

void check_metadata(const Json& meta, const fs::path& path) {
  if (!meta.is_object()) throw CheckpointError("checkpoint metadata is not an object");
  for (auto it = meta.begin(); it != meta.end(); ++it) {
    if (!metadata_keys().count(it.key())) {
      throw CheckpointError("checkpoint " + path.string() + " has unexpected metadata key '" +
                            it.key() + "'");
    }
  }
  for (const auto& key : metadata_keys()) {
    if (!meta.contains(key)) {
      throw CheckpointError("checkpoint " + path.string() + " is missing metadata key '" + key + "'");
    }
  }
  if (meta["format"] != kFormat) throw CheckpointError("not an f2t2hit checkpoint: " + path.string());
  if (!meta["schema_version"].is_number_integer() ||
      meta["schema_version"].get<int>() != kCheckpointSchemaVersion) {
    throw CheckpointError("checkpoint " + path.string() + " has schema version " +
                          meta["schema_version"].dump() + ", expected " +
                          std::to_string(kCheckpointSchemaVersion));
  }
}

// Copies prefix+name arrays into targets, enforcing an exact key match.
void restore(const Archive& a, const std::string& prefix,
             const std::vector<std::pair<std::string, Tensor*>>& targets, const fs::path& path) {
  std::set<std::string> expected;
  for (const auto& [name, t] : targets) {
    const std::string key = prefix + name;
    expected.insert(key);
    auto it = a.tensors.find(key);
    if (it == a.tensors.end()) {
      throw CheckpointError("checkpoint " + path.string() + " is missing '" + key + "'");
    }
    if (it->second.shape() != t->shape()) {
      throw CheckpointError("checkpoint " + path.string() + ": '" + key + "' has shape " +
                            shape_string(it->second.shape()) + ", model expects " +
                            shape_string(t->shape()));
    }
    *t = it->second;
  }
  for (const auto& [key, _] : a.tensors) {
    if (key.rfind(prefix, 0) == 0 && !expected.count(key)) {
      throw CheckpointError("checkpoint " + path.string() + " has unexpected key '" + key + "'");
    }
  }
}

std::vector<std::pair<std::string, Tensor*>> param_targets(Model& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  model.visit([&](const std::string& name, Var& v) { out.emplace_back(name, &v.mutable_value()); });
  return out;
}

void reject_foreign_prefixes(const Archive& a, const fs::path& path) {
  for (const auto& [key, _] : a.tensors) {
    if (key.rfind("params/", 0) != 0 && key.rfind("adam_m/", 0) != 0 &&
        key.rfind("adam_v/", 0) != 0) {
      throw CheckpointError("checkpoint " + path.string() + " has unexpected key '" + key + "'");
    }
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const TrainState& state) {
  Model& model = const_cast<Model&>(state.model);
  const auto named = model.named_parameters();
  if (state.adam.m.size() != named.size() || state.adam.v.size() != named.size()) {
    throw CheckpointError("optimizer state does not match the model parameters");
  }
  Json meta{{"format", kFormat},
            {"schema_version", kCheckpointSchemaVersion},
            {"config", {{"model", to_json(state.model.config)}, {"train", to_json(state.config)}}},
            {"variant", to_string(state.model.variant)},
            {"seed", state.config.seed},
            {"iteration", state.iteration},
            {"rng", {{"scheme", "seed_seq(seed, stream, iteration)"},
                     {"seed", state.config.seed},
                     {"stream", 1},
                     {"next_iteration", state.iteration}}},
            {"last_loss", loss_json(state.last_loss)},
            {"smoothed_loss", loss_json(state.smoothed_loss)}};
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (size_t i = 0; i < named.size(); ++i) {
    tensors.emplace_back("params/" + named[i].first, &named[i].second.value());
    tensors.emplace_back("adam_m/" + named[i].first, &state.adam.m[i]);
    tensors.emplace_back("adam_v/" + named[i].first, &state.adam.v[i]);
  }
  write_archive(path, meta, tensors);
}

TrainState load_checkpoint(const fs::path& path) {
  const Archive a = read_archive(path);
  check_metadata(a.metadata, path);
  reject_foreign_prefixes(a, path);
  const Json& meta = a.metadata;
  TrainState s;
  try {
    const ModelConfig model_cfg = model_config_from_json(meta.at("config").at("model"));
    s.config = train_config_from_json(meta.at("config").at("train"));
    const Variant variant = parse_variant(meta.at("variant").get<std::string>());
    s = init_state(model_cfg, variant, s.config);
    s.model.config = model_cfg;  // already variant-applied when saved
    s.iteration = meta.at("iteration").get<int64_t>();
    s.last_loss = meta["last_loss"].is_number() ? meta["last_loss"].get<double>()
                                                : std::numeric_limits<double>::quiet_NaN();
    s.smoothed_loss = meta["smoothed_loss"].is_number() ? meta["smoothed_loss"].get<double>()
                                                        : std::numeric_limits<double>::quiet_NaN();
  } catch (const ConfigError& e) {
    throw CheckpointError("checkpoint " + path.string() + " has an invalid config: " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " has malformed metadata: " + e.what());
  }
  const auto params = param_targets(s.model);
  restore(a, "params/", params, path);
  std::vector<std::pair<std::string, Tensor*>> m, v;
  for (size_t i = 0; i < params.size(); ++i) {
    m.emplace_back(params[i].first, &s.adam.m[i]);
    v.emplace_back(params[i].first, &s.adam.v[i]);
  }
  restore(a, "adam_m/", m, path);
  restore(a, "adam_v/", v, path);
  return s;
}

void load_parameters(const fs::path& path, Model& model) {
  const Archive a = read_archive(path);
  check_metadata(a.metadata, path);
  reject_foreign_prefixes(a, path);
  restore(a, "params/", param_targets(model), path);
}

}  // namespace f2t2hit
