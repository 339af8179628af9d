// Copyright 2026 The lfgrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <random>

#include "lfgrec/baselines.hpp"
#include "lfgrec/evaluation.hpp"
#include "lfgrec/generator.hpp"
#include "lfgrec/linalg.hpp"
#include "lfgrec/model_io.hpp"
#include "lfgrec/service.hpp"

namespace py = pybind11;
using namespace lfgrec;

namespace {

struct PyModel {
  AnyModel model;

  bool is_lfg() const { return std::holds_alternative<LfgModel>(model); }
  std::string kind() const {
    if (is_lfg()) return "lfg";
    return std::get<BaselineModel>(model).flavor == BaselineFlavor::kBiased ? "biassvd" : "svd";
  }
  int num_items() const {
    return std::visit([](const auto& m) { return m.num_items(); }, model);
  }
  std::vector<std::int64_t> item_ids() const {
    return std::visit([](const auto& m) { return m.item_ids; }, model);
  }
};

ExperimentConfig MakeConfig(int folds, std::uint64_t seed, int k, double mask_p, int epochs,
                            int batch_size, double lr, double l2, int baseline_epochs,
                            double baseline_lr, double baseline_reg,
                            const std::vector<std::string>& models) {
  ExperimentConfig c;
  c.folds = folds;
  c.seed = seed;
  c.lfg.k = k;
  c.lfg.mask_p = mask_p;
  c.lfg_train.epochs = epochs;
  c.lfg_train.batch_size = batch_size;
  c.lfg_train.adam.lr = lr;
  c.lfg_train.l2 = l2;
  c.baseline.k = k;
  c.baseline.epochs = baseline_epochs;
  c.baseline.lr = baseline_lr;
  c.baseline.reg = baseline_reg;
  if (!models.empty()) c.models = models;
  return c;
}

std::vector<ScoredItem> Recommend(const PyModel& m,
                                  const std::vector<std::pair<std::int64_t, double>>& ratings,
                                  double age, const std::string& gender,
                                  const std::string& occupation, int top_n) {
  RecommendRequest request{ratings, age, gender, occupation, top_n};
  if (const auto* lfg = std::get_if<LfgModel>(&m.model)) {
    return ModelSnapshot(*lfg, "").Recommend(request);
  }
  const auto& base = std::get<BaselineModel>(m.model);
  std::vector<std::uint8_t> rated(base.num_items(), 0);
  for (const auto& [native, rating] : ratings) {
    bool found = false;
    for (int i = 0; i < base.num_items(); ++i) {
      if ((base.item_ids.empty() ? i : base.item_ids[i]) == native) {
        rated[i] = 1;
        found = true;
        break;
      }
    }
    if (!found) throw RangeError("unknown item " + std::to_string(native));
    if (!(rating >= 1.0 && rating <= 5.0)) throw RangeError("rating not in [1, 5]");
  }
  RowVector scores(base.num_items());
  for (int i = 0; i < base.num_items(); ++i) scores[i] = PredictCold(base, i);
  return RankItems(scores, rated, top_n, base.item_ids);
}

}  // namespace

PYBIND11_MODULE(_lfgrec, m) {
  m.doc() = "Latent factor generator recommender (C++ core)";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<RangeError>(m, "RangeError", error.ptr());
  py::register_exception<UnknownCategoryError>(m, "UnknownCategoryError", error.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
  auto format = py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<VersionError>(m, "VersionError", format.ptr());
  py::register_exception<ChecksumError>(m, "ChecksumError", format.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_property_readonly("num_users", [](const Dataset& d) { return d.ratings.num_users(); })
      .def_property_readonly("num_items", [](const Dataset& d) { return d.ratings.num_items(); })
      .def_property_readonly("num_ratings", [](const Dataset& d) { return d.ratings.size(); })
      .def_property_readonly("mean_rating", [](const Dataset& d) { return d.ratings.Mean(); })
      .def_property_readonly("features", [](const Dataset& d) { return d.features.rows; })
      .def_property_readonly("item_ids", [](const Dataset& d) { return d.ids.item_ids(); })
      .def_property_readonly("user_ids", [](const Dataset& d) { return d.ids.user_ids(); })
      .def("__repr__", [](const Dataset& d) {
        return "<Dataset " + d.name + ": " + std::to_string(d.ratings.num_users()) + " users, " +
               std::to_string(d.ratings.num_items()) + " items, " +
               std::to_string(d.ratings.size()) + " ratings>";
      });

  m.def(
      "load_dataset",
      [](const std::string& kind, const std::filesystem::path& data_dir) {
        py::gil_scoped_release release;
        return LoadDataset(ParseDatasetKind(kind), data_dir);
      },
      py::arg("kind"), py::arg("data_dir"), "Load ml100k or ml1m from a directory.");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", &PyModel::kind)
      .def_property_readonly("num_items", &PyModel::num_items)
      .def_property_readonly("item_ids", &PyModel::item_ids)
      .def("save", [](const PyModel& self, const std::filesystem::path& p) { SaveModel(self.model, p); },
           py::arg("path"))
      .def("to_bytes",
           [](const PyModel& self) {
             const auto bytes = std::visit([](const auto& x) { return SerializeModel(x); }, self.model);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def(
          "scores",
          [](const PyModel& self, const std::vector<std::pair<int, double>>& history, double age,
             const std::string& gender, const std::string& occupation) {
            const auto* lfg = std::get_if<LfgModel>(&self.model);
            if (!lfg) throw Error("scores() needs a generator model");
            std::vector<HistoryItem> items;
            for (const auto& [i, r] : history) items.push_back({i, r});
            return InferUser(*lfg, items, age, gender, occupation);
          },
          py::arg("history"), py::arg("age"), py::arg("gender"), py::arg("occupation"),
          "Predicted ratings for every item index from one generator pass.\n"
          "`history` holds (item index, rating) pairs.")
      .def(
          "recommend",
          [](const PyModel& self, const std::vector<std::pair<std::int64_t, double>>& ratings,
             double age, const std::string& gender, const std::string& occupation, int top_n) {
            std::vector<std::pair<std::int64_t, double>> out;
            for (const ScoredItem& s : Recommend(self, ratings, age, gender, occupation, top_n)) {
              out.emplace_back(s.item, s.score);
            }
            return out;
          },
          py::arg("ratings"), py::arg("age"), py::arg("gender"), py::arg("occupation"),
          py::arg("top_n") = 10,
          "Top-n (native item id, score) pairs; `ratings` uses native item ids.");

  m.def("load_model", [](const std::filesystem::path& p) { return PyModel{LoadModel(p)}; },
        py::arg("path"));
  m.def(
      "model_from_bytes",
      [](const py::bytes& b) {
        const std::string s = b;
        return PyModel{DeserializeModel(
            {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()})};
      },
      py::arg("data"));

  m.def(
      "train",
      [](const Dataset& data, const std::string& model, std::uint64_t seed, int k, double mask_p,
         int epochs, int batch_size, double lr, double l2, int baseline_epochs, double baseline_lr,
         double baseline_reg) {
        const ExperimentConfig c = MakeConfig(5, seed, k, mask_p, epochs, batch_size, lr, l2,
                                              baseline_epochs, baseline_lr, baseline_reg, {});
        const std::string name = model == "lfg"       ? std::string(kModelLfg)
                                 : model == "biassvd" ? std::string(kModelBiasSvd)
                                 : model == "svd"     ? std::string(kModelSvd)
                                                      : model;
        py::gil_scoped_release release;
        return PyModel{TrainOnAll(data, name, c)};
      },
      py::arg("dataset"), py::arg("model") = "lfg", py::arg("seed") = 42, py::arg("k") = 50,
      py::arg("mask_p") = 0.1, py::arg("epochs") = 150, py::arg("batch_size") = 64,
      py::arg("lr") = 1e-3, py::arg("l2") = 3e-3, py::arg("baseline_epochs") = 30,
      py::arg("baseline_lr") = 0.005, py::arg("baseline_reg") = 0.05,
      "Fit one model (lfg, svd or biassvd) on every rating.");

  m.def(
      "run_experiment",
      [](const Dataset& data, int experiment, int folds, std::uint64_t seed, int k, double mask_p,
         int epochs, int batch_size, double lr, double l2, int baseline_epochs, double baseline_lr,
         double baseline_reg, const std::vector<std::string>& models) {
        if (experiment != 1 && experiment != 2) throw RangeError("experiment must be 1 or 2");
        const ExperimentConfig c = MakeConfig(folds, seed, k, mask_p, epochs, batch_size, lr, l2,
                                              baseline_epochs, baseline_lr, baseline_reg, models);
        EvalReport report;
        {
          py::gil_scoped_release release;
          report = experiment == 1 ? RunExperiment1(data, c) : RunExperiment2(data, c);
        }
        py::list rows;
        for (const FoldRow& r : report.rows) rows.append(py::make_tuple(r.fold, r.model, r.rmse));
        py::dict averages;
        for (const auto& name : report.models) averages[py::str(name)] = report.Average(name);
        py::dict out;
        out["experiment"] = report.experiment;
        out["dataset"] = report.dataset;
        out["rows"] = rows;
        out["averages"] = averages;
        out["config"] = report.config_json;
        return out;
      },
      py::arg("dataset"), py::arg("experiment") = 1, py::arg("folds") = 5, py::arg("seed") = 42,
      py::arg("k") = 50, py::arg("mask_p") = 0.1, py::arg("epochs") = 150,
      py::arg("batch_size") = 64, py::arg("lr") = 1e-3, py::arg("l2") = 3e-3,
      py::arg("baseline_epochs") = 30, py::arg("baseline_lr") = 0.005,
      py::arg("baseline_reg") = 0.05, py::arg("models") = std::vector<std::string>{},
      "Cross-validate. Returns rows of (fold, model, rmse) plus per-model averages.");

  m.def(
      "truncated_svd",
      [](const Matrix& a, int k, std::uint64_t seed) {
        const TruncatedSvd svd = ComputeTruncatedSvd(a, k, seed);
        return py::make_tuple(svd.u, svd.s, svd.vt);
      },
      py::arg("a"), py::arg("k"), py::arg("seed") = 0, "Rank-k (u, s, vt).");

  m.def(
      "mask_rows",
      [](const Matrix& rows, double p, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        MaskedRows masked = MaskRows(rows, p, rng);
        return py::make_tuple(masked.values, masked.masked, masked.observed);
      },
      py::arg("rows"), py::arg("p"), py::arg("seed") = 0,
      "Bernoulli-zero non-zero entries; returns (values, masked, observed).");

  m.def(
      "fnv1a64",
      [](const py::bytes& b) {
        const std::string s = b;
        return Fnv1a64({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
      },
      py::arg("data"));

  m.def("rmse", [](const std::vector<double>& t, const std::vector<double>& p) { return Rmse(t, p); },
        py::arg("truth"), py::arg("pred"));
}
