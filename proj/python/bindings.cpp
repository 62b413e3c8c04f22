// Copyright 2026 The fkinterp Authors
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

// Python module fkinterp._core. Frames cross the boundary as 2-D float64
// NumPy arrays (height x width).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "fkinterp/checkpoint.hpp"
#include "fkinterp/codec_sim.hpp"
#include "fkinterp/error.hpp"
#include "fkinterp/interp_net.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/trainer.hpp"
#include "fkinterp/transform_quant.hpp"
#include "fkinterp/verify.hpp"

namespace py = pybind11;
using namespace fkinterp;

namespace {

using Plane = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Plane& p) {
  if (p.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(p.ndim()) + " dimensions");
  const auto h = static_cast<std::size_t>(p.shape(0)), w = static_cast<std::size_t>(p.shape(1));
  Array a({1, h, w});
  std::copy(p.data(), p.data() + h * w, a.storage().begin());
  return a;
}

Plane to_numpy(const Array& a) {
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  Plane out = c == 1 ? Plane({h, w}) : Plane({c, h, w});
  std::copy(a.storage().begin(), a.storage().end(), out.mutable_data());
  return out;
}

BdCurve to_curve(const std::vector<std::pair<double, double>>& pts) {
  BdCurve c;
  for (const auto& [rate, psnr] : pts) c.push_back({rate, psnr});
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Quality-aware factorized-kernel frame interpolation and codec simulation";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

  py::class_<NetConfig>(m, "NetConfig")
      .def(py::init<>())
      .def_static("defaults", &NetConfig::defaults)
      .def_static("toy", &NetConfig::toy)
      .def_static("tiny", &NetConfig::tiny)
      .def_static("from_json", &NetConfig::from_json)
      .def("to_json", &NetConfig::to_json)
      .def("validate", &NetConfig::validate)
      .def_readwrite("depth", &NetConfig::depth)
      .def_readwrite("widths", &NetConfig::widths)
      .def_readwrite("kernel_lengths", &NetConfig::kernel_lengths)
      .def_readwrite("rank", &NetConfig::rank)
      .def_readwrite("head_width", &NetConfig::head_width)
      .def_readwrite("head_depth", &NetConfig::head_depth)
      .def("__eq__", [](const NetConfig& a, const NetConfig& b) { return a == b; })
      .def("__repr__", [](const NetConfig& c) { return "NetConfig(" + c.to_json() + ")"; });

  py::class_<InterpNet>(m, "InterpNet")
      .def(py::init<NetConfig, std::uint64_t>(), py::arg("config"), py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            Checkpoint ck = load_checkpoint(path);
            return InterpNet(ck.config, std::move(ck.weights));
          },
          py::arg("path"))
      .def(
          "save",
          [](const InterpNet& net, const std::filesystem::path& path) {
            save_checkpoint(Checkpoint{net.config(), net.parameters(), 0, std::nullopt}, path);
          },
          py::arg("path"))
      .def_property_readonly("config", &InterpNet::config)
      .def_property_readonly("parameter_count", [](const InterpNet& n) { return n.parameters().scalar_count(); })
      .def(
          "interpolate",
          [](const InterpNet& net, const Plane& left, const Plane& right, int qp_left, int qp_right) {
            Interpolation r;
            {
              const Array l = to_array(left), rr = to_array(right);
              py::gil_scoped_release release;
              r = net.interpolate(l, rr, qp_left, qp_right);
            }
            py::dict out;
            out["frame"] = to_numpy(r.pyramid.full);
            out["half"] = to_numpy(r.pyramid.half);
            out["quarter"] = to_numpy(r.pyramid.quarter);
            out["weights"] = to_numpy(r.weights);
            out["contributions"] = to_numpy(r.contributions);
            return out;
          },
          py::arg("left"), py::arg("right"), py::arg("qp_left"), py::arg("qp_right"),
          "Returns a dict with the synthesized frame, coarser outputs and per-reference weighting maps.");

  m.def("l1_loss", [](const Plane& p, const Plane& t) { return l1_loss(to_array(p), to_array(t)); });
  m.def("satd_loss", [](const Plane& p, const Plane& t) { return satd_loss(to_array(p), to_array(t)); });
  m.def("quant_step", &quant_step, py::arg("qp"));
  m.def("degrade", [](const Plane& f, int qp) { return to_numpy(degrade_compress_proxy(to_array(f), qp)); },
        py::arg("frame"), py::arg("qp"), "Block-transform quantization proxy for a coded reference.");
  m.def(
      "synthesize_clip",
      [](std::uint64_t seed, const std::string& kind, std::size_t size) {
        const Clip c = synthesize_clip(seed, parse_motion_kind(kind), size);
        return py::make_tuple(to_numpy(c.left), to_numpy(c.mid), to_numpy(c.right));
      },
      py::arg("seed"), py::arg("kind") = "rotate", py::arg("size") = 64,
      "Procedural (left, middle, right) frames with random motion of the given kind.");
  m.def(
      "bd_rate",
      [](const std::vector<std::pair<double, double>>& anchor, const std::vector<std::pair<double, double>>& test) {
        return bd_rate(to_curve(anchor), to_curve(test));
      },
      py::arg("anchor"), py::arg("test"), "BD-rate in percent from lists of (rate, psnr) points.");
  m.def(
      "simulate",
      [](const std::vector<Plane>& frames, const std::vector<int>& qps, const InterpNet* model) {
        std::vector<Array> fs;
        for (const Plane& p : frames) fs.push_back(to_array(p));
        SequenceConfig cfg;
        cfg.qps = qps;
        cfg.with_pc = model != nullptr;
        SequenceRun run;
        {
          py::gil_scoped_release release;
          run = model ? run_sequence(fs, cfg, make_pc_generator(*model)) : run_sequence(fs, cfg);
        }
        py::list out;
        for (const RdPoint& p : run.points) {
          py::dict d;
          d["qp"] = p.qp;
          d["rate"] = p.rate;
          d["psnr"] = p.psnr;
          d["pc_ratio"] = p.pc_ratio();
          d["mean_cu_size"] = p.mean_cu_size();
          d["cu_histogram"] = p.cu_histogram;
          out.append(d);
        }
        return out;
      },
      py::arg("frames"), py::arg("qps") = std::vector<int>{27, 32, 37, 42}, py::arg("model") = nullptr,
      "Codec simulation; passing a model enables PC pictures.");
  m.def(
      "verify",
      [](std::uint64_t seed, bool skip_rank2) {
        py::list out;
        for (const CheckResult& r : run_invariant_checks({seed, skip_rank2})) {
          py::dict d;
          d["name"] = r.name;
          d["measured"] = r.measured;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1, py::arg("skip_rank2") = false);
}
