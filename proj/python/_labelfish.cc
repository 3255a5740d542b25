/*
 * Copyright 2026 The labelfish Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings for the simulator, attack and harness.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "labelfish/attack.h"
#include "labelfish/config.h"
#include "labelfish/data.h"
#include "labelfish/defenses.h"
#include "labelfish/error.h"
#include "labelfish/experiment.h"
#include "labelfish/io.h"
#include "labelfish/metrics.h"
#include "labelfish/nn.h"
#include "labelfish/secure_agg.h"
#include "labelfish/verify.h"

namespace py = pybind11;
using namespace labelfish;

namespace {

py::array_t<double> ToArray(const Tensor& t) {
  py::array_t<double> out(t.shape());
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor FromArray(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::tuple DatasetTuple(const Dataset& d) {
  return py::make_tuple(ToArray(d.samples),
                        py::array_t<int>(d.labels.size(), d.labels.data()),
                        d.num_classes);
}

py::bytes ToBytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> FromBytes(const py::bytes& b) {
  const std::string s = b;
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

// Flat vector as a one-tensor gradient set.
GradientSet FlatSet(const std::vector<double>& v) {
  return GradientSet({{Tensor({v.size()}, v)}});
}

py::dict RowDict(const TrialRow& r) {
  py::dict d;
  d["axis"] = r.axis;
  d["value"] = r.value;
  d["trial"] = r.trial;
  d["seed"] = r.seed;
  d["status"] = r.status;
  d["stage"] = r.stage;
  d["error"] = r.error;
  d["clients"] = r.clients;
  std::vector<std::vector<int>> truth, predicted;
  for (const auto& c : r.true_counts) truth.push_back(c.counts);
  for (const auto& a : r.attack) predicted.push_back(a.counts.counts);
  d["true_counts"] = truth;
  d["predicted_counts"] = predicted;
  d["lnacc_all"] = r.lnacc_all;
  d["lnacc_target"] = r.lnacc_target;
  d["nomp"] = r.nomp;
  d["ratio"] = r.ratio;
  d["cossim"] = r.cossim;
  d["bias_err_max"] = r.bias_err_max;
  d["int_dev_max"] = r.int_dev_max;
  d["rcond"] = r.rcond;
  return d;
}

}  // namespace

PYBIND11_MODULE(_labelfish, m) {
  m.doc() = "FedSGD secure-aggregation simulator with label inference";
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  // Data.
  m.def(
      "parse_mnist_idx",
      [](const py::bytes& images, const py::bytes& labels) {
        return DatasetTuple(
            ParseMnistIdx(FromBytes(images), FromBytes(labels)));
      },
      py::arg("images"), py::arg("labels"),
      "IDX bytes to (samples [N, 1, rows, cols], labels, num_classes).");
  m.def(
      "load_mnist_idx",
      [](const std::string& images, const std::string& labels) {
        return DatasetTuple(LoadMnistIdx(images, labels));
      },
      py::arg("images_path"), py::arg("labels_path"));
  m.def(
      "generate_synthetic",
      [](std::size_t classes, Shape shape, std::size_t count, double blob_std,
         std::uint64_t seed) {
        return DatasetTuple(GenerateSynthetic(
            {classes, std::move(shape), count, blob_std, seed}));
      },
      py::arg("num_classes"), py::arg("sample_shape"), py::arg("count"),
      py::arg("blob_std") = 1.0, py::arg("seed") = 7);

  // Models.
  py::class_<Model>(m, "Model")
      .def_property_readonly("input_shape", &Model::input_shape)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def(
          "logits",
          [](const Model& model,
             const py::array_t<double,
                               py::array::c_style | py::array::forcecast>& x) {
            const Matrix logits = Forward(model, FromArray(x)).logits();
            py::array_t<double> out({logits.rows(), logits.cols()});
            std::copy(logits.data().begin(), logits.data().end(),
                      out.mutable_data());
            return out;
          },
          py::arg("inputs"), "Head output [B, n] for a batch.")
      .def("serialize",
           [](const Model& model) { return ToBytes(SerializeModel(model)); })
      .def("__eq__", [](const Model& a, const Model& b) { return a == b; });
  m.def("make_fcn3", &MakeFcn3, py::arg("input_dim"), py::arg("hidden1"),
        py::arg("hidden2"), py::arg("num_classes"), py::arg("seed"));
  m.def("make_cnn_bn", &MakeCnnBn, py::arg("input_shape"), py::arg("channels"),
        py::arg("kernel"), py::arg("hidden"), py::arg("num_classes"),
        py::arg("seed"));
  m.def("parse_model",
        [](const py::bytes& b) { return ParseModel(FromBytes(b)); });

  // Secure aggregation.
  m.def("quantize", &Quantize, py::arg("value"), py::arg("scale_bits"));
  m.def("dequantize", &Dequantize, py::arg("residue"), py::arg("scale_bits"));
  m.def(
      "net_mask",
      [](std::vector<ClientId> participants, std::uint64_t round_seed,
         ClientId client, std::size_t length) {
        return MaskPlan(std::move(participants), round_seed)
            .NetMask(client, length);
      },
      py::arg("participants"), py::arg("round_seed"), py::arg("client_id"),
      py::arg("length"));
  m.def(
      "encode_update",
      [](const std::vector<double>& values, std::vector<ClientId> participants,
         std::uint64_t round_seed, ClientId client, bool masked,
         int scale_bits) {
        const MaskPlan plan(std::move(participants), round_seed);
        const SecureAggConfig config{masked ? SaMode::kMasked : SaMode::kIdeal,
                                     scale_bits};
        return ToBytes(SerializeMaskedUpdate(
            Encode(FlatSet(values), plan, client, config)));
      },
      py::arg("values"), py::arg("participants"), py::arg("round_seed"),
      py::arg("client_id"), py::arg("masked") = true,
      py::arg("scale_bits") = kDefaultScaleBits,
      "Wire bytes of one client's update of a flat gradient vector.");
  m.def(
      "aggregate_updates",
      [](const std::vector<py::bytes>& wires,
         std::vector<ClientId> participants, std::uint64_t round_seed) {
        const MaskPlan plan(std::move(participants), round_seed);
        std::vector<MaskedUpdate> updates;
        for (const auto& w : wires) {
          updates.push_back(ParseMaskedUpdate(FromBytes(w)));
        }
        const std::size_t length =
            updates.empty() ? 0 : updates[0].payload.size();
        const auto layout = FlatSet(std::vector<double>(length)).Layout();
        return AggregateDecode(updates, plan, layout).Flatten();
      },
      py::arg("updates"), py::arg("participants"), py::arg("round_seed"),
      "Decoded sum of flat updates produced by encode_update.");

  // Defenses.
  m.def(
      "apply_compression",
      [](const std::vector<double>& values, double theta) {
        return ApplyCompression(FlatSet(values), theta).Flatten();
      },
      py::arg("values"), py::arg("theta"));

  // Attack and metrics.
  m.def(
      "infer_labels",
      [](const std::vector<double>& bias_grad,
         const std::vector<double>& logits, std::size_t batch_size,
         bool repair) {
        const InferredCounts c =
            InferLabels(bias_grad, logits, batch_size, repair);
        return py::make_tuple(c.counts.counts, c.real_counts, c.sum_mismatch);
      },
      py::arg("bias_grad"), py::arg("logits"), py::arg("batch_size"),
      py::arg("repair") = false,
      "(counts, real_counts, sum_mismatch) for one client.");
  m.def(
      "single_sample_label",
      [](const std::vector<double>& g) { return SingleSampleLabel(g); },
      py::arg("bias_grad"));
  m.def(
      "lnacc",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        return LnAcc({pred}, {truth});
      },
      py::arg("pred"), py::arg("truth"));

  // Harness.
  py::class_<Report>(m, "Report")
      .def_property_readonly("rows",
                             [](const Report& r) {
                               py::list rows;
                               for (const auto& row : r.rows)
                                 rows.append(RowDict(row));
                               return rows;
                             })
      .def("csv", &ReportToCsv)
      .def("json", &ReportToJson)
      .def("write", [](const Report& r, const std::string& path) {
        WriteReport(r, path);
      });
  m.def(
      "normalize_config",
      [](const std::string& yaml) { return ConfigToYaml(ParseConfig(yaml)); },
      py::arg("yaml"), "Full config with defaults filled in.");
  m.def(
      "run_experiment",
      [](const std::string& yaml) {
        const ExperimentConfig config = ParseConfig(yaml);
        py::gil_scoped_release release;
        return RunExperiment(config);
      },
      py::arg("config_yaml"));
  m.def(
      "run_sweep",
      [](const std::string& yaml, const std::string& axis,
         const std::vector<std::string>& values) {
        const ExperimentConfig config = ParseConfig(yaml);
        py::gil_scoped_release release;
        return RunSweep(config, axis, values);
      },
      py::arg("config_yaml"), py::arg("axis"), py::arg("values"));
  m.def(
      "verify",
      [](int criterion, bool quick) {
        CriterionResult r;
        {
          py::gil_scoped_release release;
          r = VerifyCriterion(criterion, quick);
        }
        py::dict d;
        d["id"] = r.id;
        d["title"] = r.title;
        d["status"] = std::string(CheckStatusName(r.status));
        d["summary"] = r.summary;
        d["notes"] = r.notes;
        return d;
      },
      py::arg("criterion"), py::arg("quick") = true);
}
