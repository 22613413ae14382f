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
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "f2t2hit/cli.hpp"
#include "f2t2hit/config.hpp"
#include "f2t2hit/errors.hpp"
#include "f2t2hit/image_io.hpp"
#include "f2t2hit/metrics.hpp"
#include "f2t2hit/suite.hpp"
#include "f2t2hit/training.hpp"
#include "f2t2hit/verify.hpp"

namespace py = pybind11;
using namespace f2t2hit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const MetricReport& r) {
  py::list records;
  for (const auto& rec : r.records) {
    py::dict d;
    d["name"] = rec.name;
    d["psnr"] = rec.psnr;
    d["ssim"] = rec.ssim;
    records.append(d);
  }
  py::dict d;
  d["dataset"] = r.dataset;
  d["count"] = r.count;
  d["mean_psnr"] = r.mean_psnr;
  d["mean_ssim"] = r.mean_ssim;
  d["records"] = records;
  return d;
}

TrainConfig schedule_config(double lr0, std::vector<int64_t> periods, std::vector<double> weights,
                            double eta_min) {
  TrainConfig c;
  c.lr0 = lr0;
  c.total_iters = 0;
  for (int64_t p : periods) c.total_iters += p;
  c.periods = std::move(periods);
  c.restart_weights = std::move(weights);
  c.eta_min = eta_min;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reflection removal network core (C++).";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& variant, const std::string& preset, uint64_t seed) {
             const ModelConfig cfg = RunConfig::from_preset(preset).model;
             return build_model(cfg, parse_variant(variant), seed);
           }),
           py::arg("variant") = "full", py::arg("preset") = "desk", py::arg("seed") = 0)
      .def_property_readonly("variant", [](const Model& mo) { return to_string(mo.variant); })
      .def_property_readonly("config", [](const Model& mo) { return to_json(mo.config).dump(); })
      .def_property_readonly("pad_multiple", [](const Model& mo) { return mo.config.pad_multiple(); })
      .def("param_count", [](Model& mo) { return count_params(mo); })
      .def("parameter_names",
           [](Model& mo) {
             std::vector<std::string> names;
             for (auto& [n, v] : mo.named_parameters()) names.push_back(n);
             return names;
           })
      .def(
          "forward",
          [](Model& mo, const Array& image, bool clamp) {
            const Tensor in = to_tensor(image);
            Tensor out;
            {
              py::gil_scoped_release release;
              out = forward(mo, in, clamp ? Mode::kInference : Mode::kTraining);
            }
            return to_array(out);
          },
          py::arg("image"), py::arg("clamp") = true,
          "Runs a 3xHxW or Nx3xHxW image; clamp=True gives inference-mode output in [0, 1].");

  m.def("load_model", [](const std::filesystem::path& p) { return load_checkpoint(p).model; },
        py::arg("path"), "Model stored in a training checkpoint.");

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_tensor(a), to_tensor(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_tensor(a), to_tensor(b)); });
  m.def("gaussian_blur", [](const Array& img, double sigma) { return to_array(gaussian_blur(to_tensor(img), sigma)); },
        py::arg("image"), py::arg("sigma"));
  m.def(
      "synthesize_pair",
      [](const Array& t, const Array& r, double beta, double sigma, uint64_t seed) {
        const auto tri = synthesize_pair(to_tensor(t), to_tensor(r), SynthesisParams{beta, sigma, seed});
        return py::make_tuple(to_array(tri.blended), to_array(tri.transmission), to_array(tri.reflection));
      },
      py::arg("transmission"), py::arg("reflection"), py::arg("beta") = 0.6, py::arg("sigma") = 2.0,
      py::arg("seed") = 0, "Returns (blended, transmission, reflection).");
  m.def(
      "cosine_restart_lr",
      [](int64_t iteration, double lr0, std::vector<int64_t> periods, std::vector<double> weights, double eta_min) {
        return cosine_restart_lr(iteration, schedule_config(lr0, std::move(periods), std::move(weights), eta_min));
      },
      py::arg("iteration"), py::arg("lr0") = 1e-4,
      py::arg("periods") = std::vector<int64_t>{100000, 100000, 100000},
      py::arg("restart_weights") = std::vector<double>{1.0, 0.5, 0.25}, py::arg("eta_min") = 1e-7);
  m.def(
      "spectral_roundtrip_check",
      [](const std::vector<int64_t>& shape, int trials, bool single) {
        const auto r = verify::spectral_roundtrip_check(shape, trials,
                                                         single ? verify::Precision::kSingle : verify::Precision::kDouble);
        py::dict d;
        d["passed"] = r.passed;
        d["max_error"] = r.max_error;
        d["bound"] = r.bound;
        return d;
      },
      py::arg("shape"), py::arg("trials") = 10, py::arg("single") = false);
  m.def("read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); });
  m.def("write_png", [](const std::filesystem::path& p, const Array& img) { write_png(p, to_tensor(img)); });
  m.def(
      "evaluate_dataset",
      [](Model& model, const std::filesystem::path& root, const std::string& name) {
        return report_dict(evaluate_dataset(model, DatasetSpec{root, name}));
      },
      py::arg("model"), py::arg("root"), py::arg("name") = "");
  m.def(
      "synthetic_triples",
      [](int count, int64_t size, uint64_t seed) {
        SyntheticSetOptions o;
        o.count = count;
        o.size = size;
        o.seed = seed;
        py::list out;
        for (const auto& t : synthetic_triples(o)) {
          out.append(py::make_tuple(to_array(t.blended), to_array(t.transmission), to_array(t.reflection)));
        }
        return out;
      },
      py::arg("count") = 4, py::arg("size") = 64, py::arg("seed") = 0);
  m.def(
      "verify",
      [](const std::vector<std::string>& scopes, uint64_t seed) {
        std::vector<verify::CheckResult> results;
        {
          py::gil_scoped_release release;
          results = verify::run_suite(scopes, seed);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["scope"] = r.scope;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["value"] = r.value;
          d["bound"] = r.bound;
          out.append(d);
        }
        return out;
      },
      py::arg("scopes") = std::vector<std::string>{}, py::arg("seed") = 0);
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs an f2t2hit command; returns (exit_code, stdout, stderr).");
}
