// Copyright 2026 The sparseseq Authors.
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

// Python bindings for planning, embedding allocation, configs, a sparse LSTM
// layer and the experiment runners.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "sparseseq/config.h"
#include "sparseseq/errors.h"
#include "sparseseq/models.h"
#include "sparseseq/sparse_embedding.h"
#include "sparseseq/sparse_recurrent.h"
#include "sparseseq/sparsity_plan.h"
#include "sparseseq/tasks.h"

namespace py = pybind11;

namespace sparseseq {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array ToNumpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array a(shape);
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

Tensor FromNumpy(const Array& a, std::size_t rank) {
  if (static_cast<std::size_t>(a.ndim()) != rank) {
    throw ShapeError("expected a rank-" + std::to_string(rank) + " array");
  }
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

std::vector<std::size_t> BinsOrPerDimension(
    std::size_t k, const std::optional<std::vector<std::size_t>>& bins) {
  return bins ? *bins : PerDimensionBins(k);
}

py::dict SummaryDict(const RunSummary& s) {
  py::dict d;
  d["run_id"] = s.run_id;
  d["seed"] = s.settings.seed;
  d["learning_rate"] = s.settings.learning_rate;
  d["word_dropout"] = s.settings.word_dropout;
  d["variational_dropout"] = s.settings.variational_dropout;
  d["weight_drop"] = s.settings.weight_drop;
  d["order_strategy"] = OrderStrategyName(s.settings.order);
  d["num_params"] = s.num_params;
  d["epochs_run"] = s.epochs_run;
  d["best_epoch"] = s.best_epoch;
  d["best_loss"] = s.best_loss;
  d["best_accuracy"] = s.best_accuracy;
  d["test_loss"] = s.test_loss;
  d["test_accuracy"] = s.test_accuracy;
  d["diverged"] = s.diverged;
  d["message"] = s.message;
  return d;
}

py::dict Train(const ExperimentConfig& config) {
  config.Validate();
  const TaskData data = LoadTaskData(config);
  std::ostringstream csv;
  MetricsWriter writer(csv);
  SweepResult result;
  {
    py::gil_scoped_release release;
    result = RunSweep(config, data, &writer);
  }
  py::list runs;
  for (const RunSummary& s : result.runs) runs.append(SummaryDict(s));
  py::dict d;
  d["runs"] = runs;
  d["best"] = result.best;
  d["any_diverged"] = result.any_diverged;
  d["metrics_csv"] = csv.str();
  return d;
}

std::vector<py::tuple> ParamTableFor(const ExperimentConfig& config,
                                     std::size_t vocab_size,
                                     std::size_t num_tags) {
  config.Validate();
  Rng rng(config.seeds.at(0));
  const std::vector<ParamGroup> table =
      config.task == "pos"
          ? PosTagger(config, vocab_size, num_tags, rng).ParamTable()
          : LmModel(config, vocab_size, rng).ParamTable();
  std::vector<py::tuple> out;
  for (const ParamGroup& g : table) {
    out.push_back(py::make_tuple(g.name, g.detail, g.count));
  }
  return out;
}

class PyLstmLayer {
 public:
  PyLstmLayer(const RecurrentSparsityPlan& plan, std::uint64_t seed) {
    Rng rng(seed);
    layer_ = SparseLstmLayer("layer", plan, rng);
  }

  std::int64_t num_params() const { return layer_.NumParams(); }
  const RecurrentSparsityPlan& plan() const { return layer_.plan(); }

  py::tuple Forward(const Array& x, std::size_t steps, std::size_t batch,
                    const std::optional<Array>& h0,
                    const std::optional<Array>& c0) {
    LstmState init = LstmState::Zeros(batch, layer_.hidden_size());
    if (h0) init.h = FromNumpy(*h0, 2);
    if (c0) init.c = FromNumpy(*c0, 2);
    Tape tape;
    LayerOutput out =
        layer_.Forward(tape, {tape.Constant(FromNumpy(x, 2)), steps, batch},
                       init);
    return py::make_tuple(ToNumpy(out.output.data.value()),
                          ToNumpy(out.final_state.h),
                          ToNumpy(out.final_state.c));
  }

  py::dict MaskedDense() const {
    const MaskedDenseLstm d = PackMaskedDense(layer_);
    py::dict out;
    out["w_hi"] = ToNumpy(d.w_hi.value);
    out["w_hh"] = ToNumpy(d.w_hh.value);
    out["b_ih"] = ToNumpy(d.b_ih.value);
    out["b_hh"] = ToNumpy(d.b_hh.value);
    out["mask_hi"] = ToNumpy(d.mask_hi);
    out["mask_hh"] = ToNumpy(d.mask_hh);
    return out;
  }

 private:
  SparseLstmLayer layer_;
};

}  // namespace
}  // namespace sparseseq

PYBIND11_MODULE(_core, m) {
  using namespace sparseseq;
  m.doc() = "Predefined sparse LSTMs and embeddings.";

  static py::exception<DataError> data_error(m, "DataError", PyExc_OSError);
  static py::exception<InfeasibleError> infeasible(m, "InfeasibleError",
                                                   PyExc_ValueError);
  static py::exception<DivergenceError> divergence(m, "DivergenceError",
                                                   PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DataError& e) {
      data_error(e.what());
    } catch (const InfeasibleError& e) {
      infeasible(e.what());
    } catch (const DivergenceError& e) {
      divergence(e.what());
    }
  });

  py::class_<ComponentSpec>(m, "ComponentSpec")
      .def_readonly("input_offset", &ComponentSpec::input_offset)
      .def_readonly("input_width", &ComponentSpec::input_width)
      .def_readonly("output_width", &ComponentSpec::output_width)
      .def("__repr__", [](const ComponentSpec& c) {
        return "ComponentSpec(input_offset=" + std::to_string(c.input_offset) +
               ", input_width=" + std::to_string(c.input_width) +
               ", output_width=" + std::to_string(c.output_width) + ")";
      });

  py::class_<RecurrentSparsityPlan>(m, "RecurrentSparsityPlan")
      .def_readonly("input_size", &RecurrentSparsityPlan::input_size)
      .def_readonly("hidden_size", &RecurrentSparsityPlan::hidden_size)
      .def_readonly("components", &RecurrentSparsityPlan::components)
      .def("is_dense", &RecurrentSparsityPlan::IsDense)
      .def("param_count", &CountLstmParams)
      .def("serialize", &SerializePlan)
      .def_static("parse", &ParsePlan, py::arg("text"))
      .def(
          "masks",
          [](const RecurrentSparsityPlan& p) {
            const PlanMasks masks = ExpandPlanToMasks(p);
            return py::make_tuple(ToNumpy(masks.hh), ToNumpy(masks.hi));
          },
          "(hh [h x h], hi [h x i]) 0/1 masks.");

  m.def(
      "plan_recurrent_layer",
      [](std::size_t i, std::size_t h, std::size_t n, double gamma,
         std::optional<std::vector<std::size_t>> lengths) {
        if (lengths) {
          return PlanRecurrentLayer(i, h, n, gamma,
                                    std::span<const std::size_t>(*lengths));
        }
        return PlanRecurrentLayer(i, h, n, gamma);
      },
      py::arg("input_size"), py::arg("hidden_size"), py::arg("num_segments"),
      py::arg("gamma") = 1.0, py::arg("segment_lengths") = py::none());
  m.def("dense_plan", &DensePlan, py::arg("input_size"),
        py::arg("hidden_size"));
  m.def("plan_matching_dense", &PlanMatchingDense, py::arg("input_size"),
        py::arg("hidden_size"), py::arg("num_segments"),
        py::arg("dense_input"), py::arg("dense_hidden"));
  m.def("solve_gamma_for_equal_params", &SolveGammaForEqualParams,
        py::arg("dense_input"), py::arg("dense_hidden"),
        py::arg("sparse_input"), py::arg("sparse_hidden"),
        py::arg("num_segments"));
  m.def("count_dense_lstm_params", &CountDenseLstmParams,
        py::arg("input_size"), py::arg("hidden_size"));

  py::class_<EmbeddingAllocation>(m, "EmbeddingAllocation")
      .def_readonly("vocab_size", &EmbeddingAllocation::vocab_size)
      .def_readonly("k", &EmbeddingAllocation::k)
      .def_readonly("delta", &EmbeddingAllocation::delta)
      .def_readonly("alpha", &EmbeddingAllocation::alpha)
      .def_readonly("bin_widths", &EmbeddingAllocation::bin_widths)
      .def_readonly("bin_word_counts", &EmbeddingAllocation::bin_word_counts)
      .def_readonly("lengths", &EmbeddingAllocation::lengths)
      .def("total_params", &EmbeddingAllocation::TotalParams)
      .def("realized_density", &EmbeddingAllocation::RealizedDensity);

  m.def("per_dimension_bins", &PerDimensionBins, py::arg("k"));
  m.def("uniform_bins", &UniformBins, py::arg("k"), py::arg("num_bins"));
  m.def(
      "solve_alpha",
      [](std::size_t k, double delta,
         std::optional<std::vector<std::size_t>> bins) {
        return SolveAlpha(k, delta, BinsOrPerDimension(k, bins));
      },
      py::arg("k"), py::arg("delta"), py::arg("bin_widths") = py::none());
  m.def(
      "allocate_for_density",
      [](std::size_t vocab_size, std::size_t k, double delta,
         std::optional<std::vector<std::size_t>> bins) {
        return AllocateForDensity(vocab_size, k, delta,
                                  BinsOrPerDimension(k, bins));
      },
      py::arg("vocab_size"), py::arg("k"), py::arg("delta"),
      py::arg("bin_widths") = py::none());

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def("set", &ExperimentConfig::Set, py::arg("key"), py::arg("value"))
      .def("validate", &ExperimentConfig::Validate)
      .def("serialize", &SerializeConfig)
      .def_readwrite("task", &ExperimentConfig::task)
      .def_readwrite("run_id", &ExperimentConfig::run_id)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("train_path", &ExperimentConfig::train_path)
      .def_readwrite("valid_path", &ExperimentConfig::valid_path)
      .def_readwrite("test_path", &ExperimentConfig::test_path)
      .def_readwrite("embedding_size", &ExperimentConfig::embedding_size)
      .def_readwrite("embedding_density", &ExperimentConfig::embedding_density)
      .def_readwrite("hidden_size", &ExperimentConfig::hidden_size)
      .def_readwrite("layers", &ExperimentConfig::layers)
      .def_readwrite("segments", &ExperimentConfig::segments)
      .def_readwrite("learning_rates", &ExperimentConfig::learning_rates)
      .def_readwrite("epochs", &ExperimentConfig::epochs)
      .def_readwrite("metrics_path", &ExperimentConfig::metrics_path)
      .def_readwrite("checkpoint_dir", &ExperimentConfig::checkpoint_dir);
  m.def("normalize_key", &NormalizeKey, py::arg("key"));
  m.def("parse_config", &ParseConfig, py::arg("text"),
        py::arg("source") = "<string>");
  m.def("load_config", &LoadConfig, py::arg("path"));

  m.def("param_table", &ParamTableFor, py::arg("config"),
        py::arg("vocab_size"), py::arg("num_tags") = 0,
        "[(name, detail, count)] for the model the config describes.");
  m.def("train", &Train, py::arg("config"),
        "Runs every sweep point; returns run summaries and the metrics CSV.");
  m.def(
      "evaluate_checkpoint",
      [](const std::string& dir, const std::string& split,
         const std::string& data_path) {
        const MetricsRow row = EvaluateCheckpoint(dir, split, data_path);
        py::dict d;
        d["split"] = row.split;
        d["loss"] = row.loss;
        d["accuracy"] = row.accuracy;
        d["row"] = FormatMetricsRow(row);
        return d;
      },
      py::arg("checkpoint_dir"), py::arg("split") = "test",
      py::arg("data_path") = "");
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "sparseseq");
        std::ostringstream out, err;
        const int code = RunCli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (code, out, err).");

  py::class_<PyLstmLayer>(m, "SparseLstmLayer")
      .def(py::init<const RecurrentSparsityPlan&, std::uint64_t>(),
           py::arg("plan"), py::arg("seed") = 0)
      .def_property_readonly("plan", &PyLstmLayer::plan)
      .def_property_readonly("num_params", &PyLstmLayer::num_params)
      .def("forward", &PyLstmLayer::Forward, py::arg("x"), py::arg("steps"),
           py::arg("batch"), py::arg("h0") = py::none(),
           py::arg("c0") = py::none(),
           "x is time-major [steps*batch x input]; returns (output, h, c).")
      .def("masked_dense", &PyLstmLayer::MaskedDense,
           "Gate-stacked dense weights (i, f, g, o) with the plan's masks.");
}
