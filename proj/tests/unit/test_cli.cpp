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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "f2t2hit/cli.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/image_io.hpp"
#include "f2t2hit/metrics.hpp"
#include "f2t2hit/training.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using f2t2hit::Tensor;
using testing::rand_tensor;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = f2t2hit::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("f2t2hit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Image with values on the 8-bit grid so PNG storage is lossless.
Tensor grid_image(int64_t h, int64_t w, uint64_t seed) {
  Tensor t = rand_tensor({3, h, w}, seed, 0.0, 1.0);
  for (double& v : t.values()) v = f2t2hit::to_8bit(v) / 255.0;
  return t;
}

// blended/ and transmission/ with `n` pairs named p0.png, p1.png, ...
fs::path make_pairs(const std::string& name, int n) {
  const fs::path root = fresh_dir(name);
  fs::create_directories(root / "blended");
  fs::create_directories(root / "transmission");
  for (int i = 0; i < n; ++i) {
    const std::string file = "p" + std::to_string(i) + ".png";
    const Tensor t = grid_image(20, 24, 10 + i);
    Tensor b = t;
    const Tensor r = grid_image(20, 24, 50 + i);
    for (int64_t k = 0; k < b.numel(); ++k) b[k] = std::min(1.0, 0.7 * t[k] + 0.3 * r[k]);
    f2t2hit::write_png(root / "blended" / file, b);
    f2t2hit::write_png(root / "transmission" / file, t);
  }
  return root;
}

// A checkpoint of the untrained desk model, which is the identity map.
fs::path identity_checkpoint(const fs::path& dir) {
  const auto state = f2t2hit::init_state(f2t2hit::ModelConfig::desk(), f2t2hit::Variant::kFull,
                                         f2t2hit::TrainConfig::desk());
  const fs::path p = dir / "identity.f2ck";
  f2t2hit::save_checkpoint(p, state);
  return p;
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { setenv(name, value, 1); }
  ~ScopedEnv() { unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST_CASE("override parsing") {
  using P = std::vector<std::pair<std::string, std::string>>;
  CHECK(f2t2hit::cli::parse_overrides({"--train.lr0", "0.5", "--model.width=8"}) ==
        P{{"train.lr0", "0.5"}, {"model.width", "8"}});
  CHECK_THROWS_AS(f2t2hit::cli::parse_overrides({"stray"}), f2t2hit::ConfigError);
  CHECK_THROWS_AS(f2t2hit::cli::parse_overrides({"--train.lr0"}), f2t2hit::ConfigError);
}

TEST_CASE("no command and help") {
  CHECK(run({}).code == f2t2hit::cli::kExitUsage);
  const Outcome help = run({"--help"});
  CHECK(help.code == f2t2hit::cli::kExitOk);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(run({"bogus"}).code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("train with a desk config writes a checkpoint and the curve") {
  const fs::path dir = fresh_dir("train");
  write_text(dir / "desk.json", R"({"preset": "desk", "train": {"total_iters": 10}})");
  const Outcome o = run({"train", "--config", (dir / "desk.json").string(), "--output",
                         (dir / "run").string()});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("effective configuration") != std::string::npos);
  CHECK(fs::is_regular_file(dir / "run" / "final.f2ck"));
  CHECK(fs::is_regular_file(dir / "run" / "effective_config.json"));
  // Header plus one row per iteration.
  CHECK(count_lines(slurp(dir / "run" / "loss_curve.csv")) == 11);
  const auto state = f2t2hit::load_checkpoint(dir / "run" / "final.f2ck");
  CHECK(state.iteration == 10);
  CHECK(state.model.variant == f2t2hit::Variant::kFull);
}

TEST_CASE("train overrides on the command line") {
  const fs::path dir = fresh_dir("train_override");
  const Outcome o = run({"train", "--output", (dir / "run").string(), "--train.total_iters", "10",
                         "--train.checkpoint_every=5"});
  REQUIRE(o.code == 0);
  CHECK(count_lines(slurp(dir / "run" / "loss_curve.csv")) == 11);
  CHECK(fs::is_regular_file(dir / "run" / "ckpt_00000005.f2ck"));
  CHECK(fs::is_regular_file(dir / "run" / "ckpt_00000010.f2ck"));
  const auto cfg = nlohmann::json::parse(slurp(dir / "run" / "effective_config.json"));
  CHECK(cfg["train"]["total_iters"] == 10);
  CHECK(cfg["train"]["checkpoint_every"] == 5);
}

TEST_CASE("train resume continues to the end") {
  const fs::path dir = fresh_dir("train_resume");
  REQUIRE(run({"train", "--output", (dir / "a").string(), "--train.total_iters", "10",
               "--train.checkpoint_every", "5"})
              .code == 0);
  fs::create_directories(dir / "b");
  fs::copy_file(dir / "a" / "ckpt_00000005.f2ck", dir / "b" / "ckpt_00000005.f2ck");
  // Curve rows before the resume point are kept from the earlier run.
  const std::string full = slurp(dir / "a" / "loss_curve.csv");
  std::istringstream lines(full);
  std::string head, line;
  for (int i = 0; i < 6 && std::getline(lines, line); ++i) head += line + "\n";
  write_text(dir / "b" / "loss_curve.csv", head);
  const Outcome o = run({"train", "--output", (dir / "b").string(), "--resume",
                         (dir / "b" / "ckpt_00000005.f2ck").string()});
  REQUIRE(o.code == 0);
  CHECK(slurp(dir / "b" / "final.f2ck") == slurp(dir / "a" / "final.f2ck"));
  CHECK(slurp(dir / "b" / "loss_curve.csv") == full);
}

TEST_CASE("train rejects malformed configs with exit code 2") {
  const fs::path dir = fresh_dir("train_bad");
  write_text(dir / "bad.json", "{\n  \"train\": {\n    \"lr0\": 1e-4,\n    \"total_iters\": ,\n  }\n}\n");
  const Outcome o = run({"train", "--config", (dir / "bad.json").string(), "--output",
                         (dir / "run").string()});
  CHECK(o.code == f2t2hit::cli::kExitUsage);
  CHECK(o.err.find("line 4") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "run" / "final.f2ck"));

  CHECK(run({"train", "--output", (dir / "run").string(), "--train.bogus", "1"}).code ==
        f2t2hit::cli::kExitUsage);
  CHECK(run({"train", "--config", (dir / "missing.json").string()}).code == f2t2hit::cli::kExitUsage);
  CHECK(run({"train", "--output", (dir / "run").string(), "--resume",
             (dir / "missing.f2ck").string()})
            .code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("eval of the identity checkpoint scores the blended input") {
  const fs::path data = make_pairs("eval_data", 3);
  const fs::path dir = fresh_dir("eval");
  const fs::path ckpt = identity_checkpoint(dir);
  const Outcome o = run({"eval", "--checkpoint", ckpt.string(), "--data", data.string(), "--name",
                         "toy", "--output", (dir / "report").string()});
  REQUIRE(o.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "report" / "metrics.json"));
  CHECK(report["dataset"] == "toy");
  CHECK(report["count"] == 3);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const std::string file = "p" + std::to_string(i) + ".png";
    const Tensor b = f2t2hit::read_image(data / "blended" / file);
    const Tensor t = f2t2hit::read_image(data / "transmission" / file);
    const double p = f2t2hit::psnr(b, t), s = f2t2hit::ssim(b, t);
    CHECK(report["records"][i]["psnr"].get<double>() == doctest::Approx(p).epsilon(1e-12));
    CHECK(report["records"][i]["ssim"].get<double>() == doctest::Approx(s).epsilon(1e-12));
    psnr_sum += p;
    ssim_sum += s;
  }
  CHECK(report["mean_psnr"].get<double>() == doctest::Approx(psnr_sum / 3).epsilon(1e-12));
  CHECK(report["mean_ssim"].get<double>() == doctest::Approx(ssim_sum / 3).epsilon(1e-12));

  // The CSV summary row carries the same means.
  const std::string csv = slurp(dir / "report" / "metrics.csv");
  const size_t at = csv.rfind("mean,");
  REQUIRE(at != std::string::npos);
  std::istringstream row(csv.substr(at + 5));
  std::string ps, ss;
  std::getline(row, ps, ',');
  std::getline(row, ss);
  CHECK(std::stod(ps) == report["mean_psnr"].get<double>());
  CHECK(std::stod(ss) == report["mean_ssim"].get<double>());

  // --identity gives the same report without a checkpoint.
  REQUIRE(run({"eval", "--identity", "--data", data.string(), "--name", "toy", "--output",
               (dir / "identity").string()})
              .code == 0);
  CHECK(slurp(dir / "identity" / "metrics.json") == slurp(dir / "report" / "metrics.json"));
}

TEST_CASE("eval usage errors") {
  const fs::path data = make_pairs("eval_err_data", 1);
  const fs::path dir = fresh_dir("eval_err");
  CHECK(run({"eval", "--checkpoint", (dir / "missing.f2ck").string(), "--data", data.string(),
             "--output", dir.string()})
            .code == f2t2hit::cli::kExitUsage);
  CHECK(run({"eval", "--data", data.string()}).code == f2t2hit::cli::kExitUsage);
  CHECK(run({"eval", "--identity", "--data", (dir / "nope").string()}).code ==
        f2t2hit::cli::kExitUsage);
  write_text(dir / "junk.f2ck", "not a checkpoint");
  CHECK(run({"eval", "--checkpoint", (dir / "junk.f2ck").string(), "--data", data.string(),
             "--output", dir.string()})
            .code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("infer on a single image keeps its size and the identity is pixel exact") {
  const fs::path dir = fresh_dir("infer_one");
  const fs::path ckpt = identity_checkpoint(dir);
  const Tensor img = grid_image(37, 50, 3);
  f2t2hit::write_png(dir / "photo.png", img);
  const Outcome o = run({"infer", "--checkpoint", ckpt.string(), "--input",
                         (dir / "photo.png").string(), "--output", (dir / "out").string()});
  REQUIRE(o.code == 0);
  const Tensor back = f2t2hit::read_image(dir / "out" / "photo_dereflected.png");
  CHECK(back.shape() == img.shape());
  CHECK(back == img);
}

TEST_CASE("infer skips undecodable files with a warning") {
  const fs::path dir = fresh_dir("infer_dir");
  const fs::path ckpt = identity_checkpoint(dir);
  fs::create_directories(dir / "in");
  f2t2hit::write_png(dir / "in" / "a.png", grid_image(16, 16, 1));
  f2t2hit::write_png(dir / "in" / "b.png", grid_image(16, 20, 2));
  write_text(dir / "in" / "c.png", "corrupt");
  const Outcome o = run({"infer", "--checkpoint", ckpt.string(), "--input",
                         (dir / "in").string(), "--output", (dir / "out").string()});
  CHECK(o.code == 0);
  CHECK(o.err.find("warning") != std::string::npos);
  CHECK(o.err.find("c.png") != std::string::npos);
  CHECK(fs::is_regular_file(dir / "out" / "a_dereflected.png"));
  CHECK(fs::is_regular_file(dir / "out" / "b_dereflected.png"));
  CHECK_FALSE(fs::exists(dir / "out" / "c_dereflected.png"));

  // Every file failing is a runtime failure.
  fs::create_directories(dir / "bad");
  write_text(dir / "bad" / "x.png", "corrupt");
  CHECK(run({"infer", "--checkpoint", ckpt.string(), "--input", (dir / "bad").string(), "--output",
             (dir / "out2").string()})
            .code == f2t2hit::cli::kExitFailure);
  CHECK(run({"infer", "--checkpoint", (dir / "none.f2ck").string(), "--input",
             (dir / "in").string(), "--output", (dir / "out3").string()})
            .code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("synthesize blends pairs reproducibly") {
  const fs::path dir = fresh_dir("synth");
  fs::create_directories(dir / "t");
  fs::create_directories(dir / "r");
  for (int i = 0; i < 3; ++i) f2t2hit::write_png(dir / "t" / ("t" + std::to_string(i) + ".png"), grid_image(18, 22, 70 + i));
  for (int i = 0; i < 2; ++i) f2t2hit::write_png(dir / "r" / ("r" + std::to_string(i) + ".png"), grid_image(11, 30, 90 + i));

  // Without reflection the blend is the transmission, byte for byte.
  REQUIRE(run({"synthesize", "--transmission", (dir / "t").string(), "--reflection",
               (dir / "r").string(), "--output", (dir / "zero").string(), "--beta", "0"})
              .code == 0);
  for (const char* n : {"t0.png", "t1.png"}) {
    CHECK(slurp(dir / "zero" / "blended" / n) == slurp(dir / "zero" / "transmission" / n));
  }

  const std::vector<std::string> args{"synthesize", "--transmission", (dir / "t").string(),
                                      "--reflection", (dir / "r").string(), "--seed", "4"};
  auto with_out = [&](const std::string& out) {
    auto a = args;
    a.push_back("--output");
    a.push_back((dir / out).string());
    return a;
  };
  REQUIRE(run(with_out("a")).code == 0);
  REQUIRE(run(with_out("b")).code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["count"] == 2);
  CHECK(manifest["pairs"].size() == 2);
  for (const auto& p : manifest["pairs"]) {
    CHECK(p["beta"].get<double>() >= 0.2);
    CHECK(p["beta"].get<double>() <= 1.0);
    CHECK(p["sigma"].get<double>() >= 0.0);
    CHECK(p["sigma"].get<double>() <= 5.0);
  }
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  for (const char* sub : {"blended", "transmission", "reflection"}) {
    for (const char* n : {"t0.png", "t1.png"}) {
      CHECK(slurp(dir / "a" / sub / n) == slurp(dir / "b" / sub / n));
    }
    CHECK_FALSE(fs::exists(dir / "a" / sub / "t2.png"));
  }
  // Reflections are fitted to the transmission size.
  CHECK(f2t2hit::read_image(dir / "a" / "reflection" / "t0.png").shape() == f2t2hit::Shape{3, 18, 22});

  CHECK(run({"synthesize", "--transmission", (dir / "t").string(), "--reflection",
             (dir / "r").string(), "--output", (dir / "c").string(), "--beta", "1.5"})
            .code == f2t2hit::cli::kExitUsage);
  CHECK(run({"synthesize", "--transmission", (dir / "none").string(), "--reflection",
             (dir / "r").string(), "--output", (dir / "c").string()})
            .code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("verify passes, filters scopes and detects an injected fault") {
  const fs::path dir = fresh_dir("verify");
  const Outcome all = run({"verify", "--report", (dir / "report.json").string()});
  CHECK(all.code == 0);
  CHECK(all.out.find("FAIL") == std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report.dump().find("gradients") != std::string::npos);

  const Outcome sched = run({"verify", "--scope", "schedule"});
  CHECK(sched.code == 0);
  CHECK(sched.out.find("PASS  schedule") != std::string::npos);
  CHECK(sched.out.find("gradients") == std::string::npos);
  CHECK(sched.out.find("metrics") == std::string::npos);

  const Outcome two = run({"verify", "--scope", "schedule,metrics"});
  CHECK(two.code == 0);
  CHECK(two.out.find("PASS  metrics") != std::string::npos);

  const Outcome fault = run({"verify", "--scope", "gradients", "--inject-gradient-fault"});
  CHECK(fault.code == f2t2hit::cli::kExitFailure);
  CHECK(fault.out.find("FAIL  gradients") != std::string::npos);

  CHECK(run({"verify", "--scope", "nonsense"}).code == f2t2hit::cli::kExitUsage);
}

TEST_CASE("F2T2HIT_SEED overrides the configured seed") {
  const fs::path dir = fresh_dir("seed_env");
  {
    ScopedEnv env("F2T2HIT_SEED", "7");
    REQUIRE(run({"train", "--output", (dir / "run").string(), "--train.total_iters", "2",
                 "--train.seed", "3"})
                .code == 0);
    const Outcome v = run({"verify", "--scope", "schedule"});
    CHECK(v.code == 0);
    CHECK(v.out.find("\"seed\": 7") != std::string::npos);
  }
  const auto cfg = nlohmann::json::parse(slurp(dir / "run" / "effective_config.json"));
  CHECK(cfg["train"]["seed"] == 7);
  ScopedEnv bad("F2T2HIT_SEED", "abc");
  CHECK(run({"verify", "--scope", "schedule"}).code == f2t2hit::cli::kExitUsage);
}
