#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cafp/baselines.hpp"
#include "cafp/counterfactual.hpp"
#include "cafp/errors.hpp"
#include "cafp/ensemble.hpp"
#include "cafp/harness.hpp"
#include "cafp/logistic.hpp"
#include "cafp/metrics.hpp"
#include "cafp/model.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Bytes = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

cafp::Matrix to_matrix(const Doubles& X) {
  if (X.ndim() != 2) throw cafp::ShapeError("X must be a 2-D array");
  cafp::Matrix out(static_cast<std::size_t>(X.shape(0)), static_cast<std::size_t>(X.shape(1)));
  const auto v = X.unchecked<2>();
  for (py::ssize_t i = 0; i < X.shape(0); ++i) {
    for (py::ssize_t j = 0; j < X.shape(1); ++j) out(i, j) = v(i, j);
  }
  return out;
}

std::vector<double> to_doubles(const Doubles& a) {
  if (a.ndim() != 1) throw cafp::ShapeError("expected a 1-D array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

std::vector<std::uint8_t> to_bytes(const Bytes& a) {
  if (a.ndim() != 1) throw cafp::ShapeError("expected a 1-D array");
  std::vector<std::uint8_t> out(a.data(), a.data() + a.size());
  for (auto v : out) {
    if (v > 1) throw cafp::ShapeError("binary arrays must hold only 0 and 1");
  }
  return out;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object to_py(const cafp::Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

cafp::Dataset make_dataset(const Doubles& X, const Bytes& a, const Bytes& y) {
  cafp::Dataset ds;
  ds.X = to_matrix(X);
  ds.a = to_bytes(a);
  ds.y = to_bytes(y);
  if (ds.a.size() != ds.n() || ds.y.size() != ds.n()) throw cafp::ShapeError("X, a and y have different lengths");
  for (std::size_t j = 0; j < ds.d(); ++j) {
    ds.feature_names.push_back("x" + std::to_string(j));
    ds.numeric.push_back(true);
  }
  ds.source_row.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) ds.source_row[i] = i;
  ds.id = "array";
  return ds;
}

// Owning wrapper so Python sees a single Model type for every family.
struct Model {
  std::shared_ptr<cafp::ProbClassifier> impl;

  py::array_t<double> predict_proba(const Doubles& X, const py::object& a) const {
    const auto m = to_matrix(X);
    if (py::isinstance<py::int_>(a)) {
      return to_array(cafp::predict_all(*impl, m, a.cast<std::uint8_t>()));
    }
    return to_array(cafp::predict_all(*impl, m, to_bytes(a.cast<Bytes>())));
  }
};

Model wrap(std::unique_ptr<cafp::ProbClassifier> p) { return Model{std::shared_ptr<cafp::ProbClassifier>(std::move(p))}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Counterfactual averaging for fair predictions: models, post-processors and metrics";

  auto base = py::register_exception<cafp::Error>(m, "CafpError");
  py::register_exception<cafp::SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<cafp::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<cafp::EmptyDatasetError>(m, "EmptyDatasetError", base.ptr());
  py::register_exception<cafp::DataError>(m, "DataError", base.ptr());
  py::register_exception<cafp::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<cafp::DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<cafp::CertificateError>(m, "CertificateError", base.ptr());
  py::register_exception<cafp::FitError>(m, "FitError", base.ptr());
  py::register_exception<cafp::ConfigError>(m, "ConfigError", base.ptr());

  // -- data ------------------------------------------------------------------
  m.def(
      "load_dataset",
      [](const std::string& csv, const std::string& schema) {
        const auto ds = cafp::load_dataset(csv, schema);
        std::vector<double> flat = ds.X.data();
        py::array_t<double> X({ds.n(), ds.d()});
        std::copy(flat.begin(), flat.end(), X.mutable_data());
        return py::dict("X"_a = X, "a"_a = to_array(ds.a), "y"_a = to_array(ds.y),
                        "feature_names"_a = ds.feature_names, "id"_a = ds.id, "schema_hash"_a = ds.schema_hash);
      },
      "csv"_a, "schema"_a, "Encode a CSV under a JSON schema; returns a dict with X, a, y and feature_names.");

  // -- models ----------------------------------------------------------------
  py::class_<Model>(m, "Model")
      .def("predict_proba", &Model::predict_proba, "X"_a, "a"_a,
           "Scores at the given protected attribute (an int for all rows or a per-row array).")
      .def_property_readonly("kind", [](const Model& self) { return self.impl->kind(); })
      .def_property_readonly("n_features", [](const Model& self) { return self.impl->n_features(); })
      .def("to_json", [](const Model& self) { return cafp::save_model(*self.impl, {}, "").dump(); })
      .def("__repr__", [](const Model& self) { return "<cafp.Model " + cafp::model_id(*self.impl) + ">"; });

  m.def(
      "load_model", [](const std::string& text) { return wrap(cafp::load_model(cafp::Json::parse(text))); }, "text"_a);

  m.def(
      "fit_logistic",
      [](const Doubles& X, const Bytes& a, const Bytes& y, double l2, int max_iters, double learning_rate) {
        cafp::LogisticConfig cfg;
        cfg.l2_penalty = l2;
        cfg.max_iters = max_iters;
        cfg.learning_rate = learning_rate;
        const auto ds = make_dataset(X, a, y);
        py::gil_scoped_release release;
        return wrap(std::make_unique<cafp::LogisticModel>(cafp::train_logistic(ds, cfg)));
      },
      "X"_a, "a"_a, "y"_a, "l2"_a = 1e-4, "max_iters"_a = 2000, "learning_rate"_a = 0.1);

  m.def(
      "fit_forest",
      [](const Doubles& X, const Bytes& a, const Bytes& y, int n_trees, int max_depth, int min_samples_leaf,
         std::uint64_t seed) {
        cafp::ForestConfig cfg;
        cfg.n_trees = n_trees;
        cfg.max_depth = max_depth;
        cfg.min_samples_leaf = min_samples_leaf;
        cfg.seed = seed;
        const auto ds = make_dataset(X, a, y);
        py::gil_scoped_release release;
        return wrap(std::make_unique<cafp::ForestModel>(cafp::train_forest(ds, cfg)));
      },
      "X"_a, "a"_a, "y"_a, "n_trees"_a = 200, "max_depth"_a = 12, "min_samples_leaf"_a = 5, "seed"_a = 0);

  m.def(
      "fit_gbt",
      [](const Doubles& X, const Bytes& a, const Bytes& y, int n_trees, int max_depth, double learning_rate) {
        cafp::GbtConfig cfg;
        cfg.n_trees = n_trees;
        cfg.max_depth = max_depth;
        cfg.learning_rate = learning_rate;
        const auto ds = make_dataset(X, a, y);
        py::gil_scoped_release release;
        return wrap(std::make_unique<cafp::GbtModel>(cafp::train_gbt(ds, cfg)));
      },
      "X"_a, "a"_a, "y"_a, "n_trees"_a = 200, "max_depth"_a = 3, "learning_rate"_a = 0.1);

  // -- CAFP ------------------------------------------------------------------
  m.def(
      "cafp_scores", [](const Model& model, const Doubles& X) { return to_array(cafp::cafp_scores(*model.impl, to_matrix(X))); },
      "model"_a, "X"_a, "Averaged scores 0.5 * (f(x, 0) + f(x, 1)).");

  m.def(
      "cafp_batch",
      [](const Model& model, const Doubles& X, const std::optional<Bytes>& a) {
        const auto av = a ? to_bytes(*a) : std::vector<std::uint8_t>{};
        const auto t = cafp::cafp_batch(*model.impl, to_matrix(X), av);
        std::vector<double> pf(t.size()), pc(t.size()), pa(t.size()), cb(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
          pf[i] = t[i].p_factual;
          pc[i] = t[i].p_counterfactual;
          pa[i] = t[i].p_avg;
          cb[i] = t[i].cb;
        }
        return py::dict("p_factual"_a = to_array(pf), "p_counterfactual"_a = to_array(pc), "p_avg"_a = to_array(pa),
                        "cb"_a = to_array(cb), "identity_error"_a = cafp::max_identity_error(t));
      },
      "model"_a, "X"_a, "a"_a = py::none());

  m.def(
      "eo_bound_certificate",
      [](const Model& model, const Doubles& X, const Bytes& a, const Bytes& y) {
        return to_py(cafp::eo_bound_certificate(*model.impl, make_dataset(X, a, y)).to_json());
      },
      "model"_a, "X"_a, "a"_a, "y"_a);

  // -- metrics ---------------------------------------------------------------
  m.def(
      "compute_metrics",
      [](const Doubles& scores, const Bytes& y, const Bytes& a, double threshold) {
        return to_py(
            cafp::compute_metrics_from_scores(to_doubles(scores), to_bytes(y), to_bytes(a), threshold).to_json());
      },
      "scores"_a, "y"_a, "a"_a, "threshold"_a = 0.5);
  m.def(
      "decision_metrics",
      [](const Bytes& pred, const Bytes& y, const Bytes& a) {
        return to_py(cafp::compute_metrics(to_bytes(pred), to_bytes(y), to_bytes(a)).to_json());
      },
      "pred"_a, "y"_a, "a"_a);
  m.def(
      "score_eod",
      [](const Doubles& s, const Bytes& y, const Bytes& a) { return cafp::score_eod(to_doubles(s), to_bytes(y), to_bytes(a)); },
      "scores"_a, "y"_a, "a"_a);
  m.def(
      "mutual_info",
      [](const Doubles& s, const Bytes& a, std::size_t bins) { return cafp::mutual_info(to_doubles(s), to_bytes(a), bins).nats; },
      "scores"_a, "a"_a, "bins"_a = 20, "Plug-in MI in nats over equal-width bins on [0, 1].");

  // -- baselines -------------------------------------------------------------
  m.def(
      "fit_eqodds",
      [](const Doubles& s, const Bytes& a, const Bytes& y, std::uint64_t seed, double threshold) {
        return to_py(cafp::fit_eqodds(to_doubles(s), to_bytes(a), to_bytes(y), seed, {threshold, 0.01, 0.001}).to_json());
      },
      "scores"_a, "a"_a, "y"_a, "seed"_a = 0, "threshold"_a = 0.5);
  m.def(
      "apply_eqodds",
      [](const py::dict& mixer, const Doubles& s, const Bytes& a) {
        const auto j = cafp::Json::parse(py::module_::import("json").attr("dumps")(mixer).cast<std::string>());
        return to_array(cafp::apply_eqodds(cafp::EqOddsMixer::from_json(j), to_doubles(s), to_bytes(a)));
      },
      "mixer"_a, "scores"_a, "a"_a);
  m.def(
      "apply_reject_option",
      [](const Doubles& s, const Bytes& a, double theta, std::uint8_t favored) {
        return to_array(cafp::apply_reject_option({theta, favored}, to_doubles(s), to_bytes(a)));
      },
      "scores"_a, "a"_a, "theta"_a = 0.1, "favored_group"_a = 0);
  m.def(
      "select_theta",
      [](const Doubles& s, const Bytes& a, const Bytes& y, double max_accuracy_loss) {
        const auto grid = cafp::default_theta_grid();
        return cafp::select_theta(to_doubles(s), to_bytes(a), to_bytes(y), grid, max_accuracy_loss).theta;
      },
      "scores"_a, "a"_a, "y"_a, "max_accuracy_loss"_a = 0.10);

  // -- harness ---------------------------------------------------------------
  m.def(
      "audit",
      [](const std::string& csv, const std::string& schema, const std::string& model,
         const std::vector<std::string>& postprocs, int repeats, std::uint64_t seed) {
        cafp::ExperimentConfig cfg;
        cfg.dataset_path = csv;
        cfg.schema_path = schema;
        cfg.model = model;
        cfg.postprocs = postprocs;
        cfg.repeats = repeats;
        cfg.seed = seed;
        cafp::Json j;
        {
          py::gil_scoped_release release;
          j = cafp::run_experiment(cfg).to_json(true);
        }
        return to_py(j);
      },
      "csv"_a, "schema"_a, "model"_a = "lr", "postprocs"_a = std::vector<std::string>{"none", "cafp"},
      "repeats"_a = 100, "seed"_a = 0, "Repeated-split fairness report as a dict.");

  m.def(
      "synthetic_check",
      [](std::uint64_t seed, std::size_t n, double a_coefficient, double feature_shift) {
        cafp::SyntheticConfig cfg;
        cfg.seed = seed;
        cfg.n = n;
        cfg.a_coefficient = a_coefficient;
        cfg.feature_shift = feature_shift;
        return to_py(cafp::synthetic_theorem_suite(cfg).to_json());
      },
      "seed"_a = 0, "n"_a = 10000, "a_coefficient"_a = 1.5, "feature_shift"_a = 0.0);
}
