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
#include "f2t2hit/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "f2t2hit/config.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/image_io.hpp"
#include "f2t2hit/metrics.hpp"
#include "f2t2hit/ops.hpp"
#include "f2t2hit/suite.hpp"
#include "f2t2hit/training.hpp"

namespace f2t2hit::cli {
namespace {

namespace fs = std::filesystem;

// Raised for bad arguments and unusable input paths; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void echo(std::ostream& out, const Json& effective) {
  out << "effective configuration:\n" << effective.dump(2) << "\n";
  out.flush();
}

void require_file(const std::string& what, const fs::path& p) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

void require_dir(const std::string& what, const fs::path& p) {
  if (!fs::is_directory(p)) throw UsageError(what + " is not a directory: " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

std::vector<ReflectionTriple> training_data(const DataConfig& data) {
  if (data.source == "synthetic") return synthetic_triples(synthetic_options(data));
  std::vector<ReflectionTriple> out;
  for (EvalPair& p : load_eval_pairs(DatasetSpec{data.root, ""})) {
    out.push_back({std::move(p.blended), std::move(p.transmission), Tensor{}});
  }
  return out;
}

// Mirror-extends or crops a reflection image to the transmission's size.
Tensor match_size(const Tensor& img, int64_t h, int64_t w) {
  if (img.size(1) == h && img.size(2) == w) return img;
  auto fold = [](int64_t i, int64_t n) {
    if (n == 1) return int64_t{0};
    const int64_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  Tensor out({3, h, w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, fold(y, img.size(1)), fold(x, img.size(2)));
  return out;
}

struct TrainArgs {
  std::string config;
  std::string output = "f2t2hit_run";
  std::string resume;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& extras, std::ostream& out) {
  std::optional<std::string> text;
  if (!a.config.empty()) {
    require_file("config file", a.config);
    text = read_text(a.config);
  }
  RunConfig cfg = resolve_run_config(text, parse_overrides(extras), seed_from_env());
  std::optional<TrainState> resumed;
  if (!a.resume.empty()) {
    require_file("checkpoint", a.resume);
    resumed = load_checkpoint(a.resume);
    // The checkpoint's model, schedule and variant are authoritative.
    cfg.model = resumed->model.config;
    cfg.train = resumed->config;
    cfg.variant = resumed->model.variant;
  }
  const Json effective = to_json(cfg);
  echo(out, effective);
  const fs::path dir = a.output;
  fs::create_directories(dir);
  write_text(dir / "effective_config.json", effective.dump(2) + "\n");

  const auto data = training_data(cfg.data);
  out << "training " << to_string(cfg.variant) << " on " << data.size() << " samples for "
      << cfg.train.total_iters << " iterations\n";
  FitOptions options;
  options.output_dir = dir;
  const int64_t every = std::max<int64_t>(1, cfg.train.total_iters / 20);
  options.on_step = [&](const CurveRow& r) {
    if ((r.iteration + 1) % every == 0 || r.iteration + 1 == cfg.train.total_iters) {
      out << "iter " << r.iteration + 1 << "/" << cfg.train.total_iters << " lr " << r.lr << " loss "
          << r.loss << "\n";
      out.flush();
    }
  };
  FitResult result = resumed ? fit(std::move(*resumed), data, options)
                             : fit(cfg.model, cfg.variant, cfg.train, data, options);
  save_checkpoint(dir / "final.f2ck", result.state);
  out << "wrote " << (dir / "final.f2ck").string() << " and " << (dir / "loss_curve.csv").string()
      << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  bool identity = false;
  std::string data;
  std::string name;
  std::string output = "f2t2hit_eval";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.identity == !a.checkpoint.empty()) {
    throw UsageError("eval needs exactly one of --checkpoint or --identity");
  }
  require_dir("dataset", a.data);
  require_dir("dataset blended/", fs::path(a.data) / "blended");
  require_dir("dataset transmission/", fs::path(a.data) / "transmission");
  Model model;
  if (a.identity) {
    model = build_model(ModelConfig::desk(), Variant::kFull, 0);
  } else {
    require_file("checkpoint", a.checkpoint);
    model = load_checkpoint(a.checkpoint).model;
  }
  Json effective;
  effective["checkpoint"] = a.identity ? Json("identity") : Json(a.checkpoint);
  effective["variant"] = to_string(model.variant);
  effective["model"] = to_json(model.config);
  effective["data"] = {{"root", a.data}, {"name", a.name}};
  effective["output"] = a.output;
  echo(out, effective);
  const MetricReport report = evaluate_dataset(model, DatasetSpec{a.data, a.name});
  write_report(report, a.output);
  char line[160];
  std::snprintf(line, sizeof line, "%s: %lld pairs, mean PSNR %.4f dB, mean SSIM %.4f\n",
                report.dataset.c_str(), static_cast<long long>(report.count), report.mean_psnr,
                report.mean_ssim);
  out << line << "wrote " << (fs::path(a.output) / "metrics.csv").string() << " and "
      << (fs::path(a.output) / "metrics.json").string() << "\n";
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  require_file("checkpoint", a.checkpoint);
  if (!fs::exists(a.input)) throw UsageError("input not found: " + a.input);
  const std::vector<fs::path> inputs =
      fs::is_directory(a.input) ? list_images(a.input) : std::vector<fs::path>{a.input};
  if (inputs.empty()) throw UsageError("no images in " + a.input);
  Model model = load_checkpoint(a.checkpoint).model;
  Json effective;
  effective["checkpoint"] = a.checkpoint;
  effective["variant"] = to_string(model.variant);
  effective["model"] = to_json(model.config);
  effective["input"] = a.input;
  effective["output"] = a.output;
  echo(out, effective);
  fs::create_directories(a.output);
  int written = 0;
  for (const fs::path& p : inputs) {
    Tensor img;
    try {
      img = read_image(p);
    } catch (const IoError& e) {
      err << "warning: skipping " << p.string() << ": " << e.what() << "\n";
      continue;
    }
    const fs::path dst = fs::path(a.output) / (p.stem().string() + "_dereflected.png");
    write_png(dst, forward(model, img, Mode::kInference));
    out << p.string() << " -> " << dst.string() << "\n";
    ++written;
  }
  out << written << " of " << inputs.size() << " images written\n";
  return written > 0 ? kExitOk : kExitFailure;
}

struct SynthArgs {
  std::string transmission;
  std::string reflection;
  std::string output;
  std::optional<double> beta;
  std::optional<double> sigma;
  uint64_t seed = 0;
};

int cmd_synthesize(SynthArgs a, std::ostream& out) {
  require_dir("transmission", a.transmission);
  require_dir("reflection", a.reflection);
  const auto ts = list_images(a.transmission);
  const auto rs = list_images(a.reflection);
  if (ts.empty() || rs.empty()) throw UsageError("synthesize needs non-empty transmission and reflection dirs");
  if (const auto env = seed_from_env()) a.seed = *env;
  SynthesisParams check;
  if (a.beta) check.beta = *a.beta;
  if (a.sigma) check.sigma = *a.sigma;
  check.validate();
  const size_t n = std::min(ts.size(), rs.size());
  Json effective;
  effective["transmission"] = a.transmission;
  effective["reflection"] = a.reflection;
  effective["output"] = a.output;
  effective["beta"] = a.beta ? Json(*a.beta) : Json("uniform [0.2, 1]");
  effective["sigma"] = a.sigma ? Json(*a.sigma) : Json("uniform [0, 5]");
  effective["seed"] = a.seed;
  effective["pairs"] = n;
  echo(out, effective);

  const fs::path root = a.output;
  for (const char* sub : {"blended", "transmission", "reflection"}) fs::create_directories(root / sub);
  nlohmann::ordered_json manifest;
  manifest["seed"] = a.seed;
  manifest["count"] = n;
  manifest["pairs"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < n; ++i) {
    auto rng = sample_rng(a.seed, 2, i);
    SynthesisParams p;
    p.beta = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    p.sigma = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    if (a.beta) p.beta = *a.beta;
    if (a.sigma) p.sigma = *a.sigma;
    p.rng_seed = a.seed;
    const Tensor t = read_image(ts[i]);
    const Tensor r = match_size(read_image(rs[i]), t.size(1), t.size(2));
    const ReflectionTriple tri = synthesize_pair(t, r, p);
    const std::string name = ts[i].stem().string() + ".png";
    write_png(root / "blended" / name, tri.blended);
    write_png(root / "transmission" / name, tri.transmission);
    write_png(root / "reflection" / name, tri.reflection);
    manifest["pairs"].push_back({{"name", name},
                                 {"transmission_source", ts[i].filename().string()},
                                 {"reflection_source", rs[i].filename().string()},
                                 {"beta", p.beta},
                                 {"sigma", p.sigma},
                                 {"seed", a.seed},
                                 {"index", i}});
  }
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  out << n << " triples written to " << root.string() << "\n";
  return kExitOk;
}

struct VerifyArgs {
  std::vector<std::string> scopes;
  std::string report;
  bool inject_fault = false;
  uint64_t seed = 0;
};

int cmd_verify(VerifyArgs a, std::ostream& out) {
  if (const auto env = seed_from_env()) a.seed = *env;
  std::vector<std::string> scopes;
  for (const std::string& s : a.scopes) {
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      const auto& known = verify::suite_scopes();
      if (std::find(known.begin(), known.end(), part) == known.end()) {
        throw UsageError("unknown scope '" + part + "'");
      }
      scopes.push_back(part);
    }
  }
  Json effective;
  effective["scopes"] = scopes.empty() ? verify::suite_scopes() : scopes;
  effective["seed"] = a.seed;
  effective["inject_gradient_fault"] = a.inject_fault;
  effective["report"] = a.report;
  echo(out, effective);

  ops::set_gradient_fault(a.inject_fault);
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(scopes, a.seed, [&](const verify::CheckResult& r) {
      char line[320];
      std::snprintf(line, sizeof line, "%s  %-10s %-58s value %.3e bound %.1e (%.2fs)", r.passed ? "PASS" : "FAIL",
                    r.scope.c_str(), r.name.c_str(), r.value, r.bound, r.seconds);
      out << line;
      if (!r.passed && !r.detail.empty()) out << "  " << r.detail;
      out << "\n";
      out.flush();
    });
  } catch (...) {
    ops::set_gradient_fault(false);
    throw;
  }
  ops::set_gradient_fault(false);
  const bool ok = verify::all_passed(results);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  out << (ok ? "all " + std::to_string(results.size()) + " checks passed\n"
             : std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed\n");
  if (!a.report.empty()) {
    const fs::path p = a.report;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(p, verify::suite_report_json(results));
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2) {
      throw ConfigError("unexpected argument '" + tok + "' (overrides look like --train.total_iters 10)");
    }
    const std::string body = tok.substr(2);
    const size_t eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override '" + tok + "' is missing a value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

std::optional<uint64_t> seed_from_env() {
  const char* raw = std::getenv("F2T2HIT_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text = raw;
  if (text.find_first_not_of("0123456789") != std::string::npos || text.size() > 19) {
    throw ConfigError("F2T2HIT_SEED must be a non-negative integer, got '" + text + "'");
  }
  return std::stoull(text);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image reflection removal: training, evaluation, inference and self-checks."};
  app.name("f2t2hit");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model; extra --section.key value pairs override the config");
  train_cmd->add_option("--config", train.config, "JSON run configuration");
  train_cmd->add_option("--output", train.output, "Run directory")->capture_default_str();
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->allow_extras();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a paired dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file");
  eval_cmd->add_flag("--identity", eval.identity, "Evaluate the untrained identity model (input as prediction)");
  eval_cmd->add_option("--data", eval.data, "Directory with blended/ and transmission/")->required();
  eval_cmd->add_option("--name", eval.name, "Dataset label in the report");
  eval_cmd->add_option("--output", eval.output, "Report directory")->capture_default_str();

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Remove reflections from an image or a directory of images");
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("--input", infer.input, "Image file or directory")->required();
  infer_cmd->add_option("--output", infer.output, "Output directory")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synthesize", "Blend transmission and reflection images into triples");
  synth_cmd->add_option("--transmission", synth.transmission, "Transmission image directory")->required();
  synth_cmd->add_option("--reflection", synth.reflection, "Reflection image directory")->required();
  synth_cmd->add_option("--output", synth.output, "Output root")->required();
  synth_cmd->add_option("--beta", synth.beta, "Reflection strength (default: uniform in [0.2, 1])");
  synth_cmd->add_option("--sigma", synth.sigma, "Blur std in pixels (default: uniform in [0, 5])");
  synth_cmd->add_option("--seed", synth.seed, "Seed for per-pair draws")->capture_default_str();

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Run the self-check suite");
  verify_cmd->add_option("--scope", verify_args.scopes,
                         "gradients, spectral, structure, schedule, metrics (repeatable or comma-separated)");
  verify_cmd->add_option("--report", verify_args.report, "Write a JSON report here");
  verify_cmd->add_flag("--inject-gradient-fault", verify_args.inject_fault,
                       "Negate one analytic derivative to show the gradient checks catch it");
  verify_cmd->add_option("--seed", verify_args.seed, "Seed for random draws")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (train_cmd->parsed()) return cmd_train(train, train_cmd->remaining(), out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (infer_cmd->parsed()) return cmd_infer(infer, out, err);
    if (synth_cmd->parsed()) return cmd_synthesize(synth, out);
    if (verify_cmd->parsed()) return cmd_verify(verify_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "dataset error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << "error: no command given\n";
  return kExitUsage;
}

}  // namespace f2t2hit::cli
