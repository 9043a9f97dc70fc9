#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <numeric>
#include <sstream>

#include "ctxmlc/checkpoint.hpp"
#include "ctxmlc/dataset.hpp"
#include "ctxmlc/errors.hpp"
#include "ctxmlc/losses.hpp"
#include "ctxmlc/metrics.hpp"
#include "ctxmlc/model.hpp"
#include "ctxmlc/noise.hpp"
#include "ctxmlc/run_config.hpp"
#include "ctxmlc/train.hpp"

namespace py = pybind11;
using namespace ctxmlc;

namespace {

using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

LabelMatrix to_labels(const LabelArray& a) {
  if (a.ndim() != 2) throw py::value_error("label array must be 2-D");
  LabelMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j) != 0;
  }
  return m;
}

LabelArray from_labels(const LabelMatrix& m) {
  LabelArray a({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<std::uint8_t> to_row(const LabelArray& a) {
  if (a.ndim() != 1) throw py::value_error("label vector must be 1-D");
  return {a.data(), a.data() + a.size()};
}

LossSpec loss_spec(double gamma_pos, double gamma_neg, double shift_m, double clamp_eps) {
  LossSpec s;
  s.gamma_pos = gamma_pos;
  s.gamma_neg = gamma_neg;
  s.shift_m = shift_m;
  s.clamp_eps = clamp_eps;
  s.lambda = 0.0;
  s.validate();
  return s;
}

std::string setting_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  return py::str(v).cast<std::string>();
}

Checkpoint fit(const MultiLabelDataset& train_set, const MultiLabelDataset& val_set,
               const std::optional<Eigen::MatrixXd>& anchors, const py::kwargs& settings) {
  RunConfig rc;
  for (const auto& [k, v] : settings) {
    std::string key = k.cast<std::string>();
    if (key == "lam") key = "lambda";
    apply_setting(rc, key, setting_text(v), std::filesystem::current_path());
  }
  LabelEmbeddings embeddings;
  if (anchors) {
    embeddings = LabelEmbeddings(*anchors);
  } else {
    if (rc.train.loss.lambda > 0.0) {
      throw ConfigError("lambda > 0 needs anchors (anchors require word embeddings)");
    }
    if (rc.model.label_dim == 0) throw ConfigError("label_dim is required without anchors");
    embeddings = init_random_label_embeddings(train_set.num_labels(), rc.model.label_dim, rc.train.seed);
  }
  ModelConfig mc = rc.model;
  mc.num_features = train_set.num_features;
  mc.num_labels = train_set.num_labels();
  mc.label_dim = embeddings.dim();
  py::gil_scoped_release release;
  TrainResult r = train(train_set, val_set, mc, rc.train, std::move(embeddings));
  return Checkpoint{std::move(r.params), std::move(r.embeddings), train_set.label_names};
}

}  // namespace

PYBIND11_MODULE(_ctxmlc, m) {
  m.doc() = "Multi-label classifier with attention over a label graph";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<MultiLabelDataset>(m, "Dataset")
      .def_readonly("num_features", &MultiLabelDataset::num_features)
      .def_property_readonly("num_samples", &MultiLabelDataset::num_samples)
      .def_property_readonly("num_labels", &MultiLabelDataset::num_labels)
      .def_property(
          "labels", [](const MultiLabelDataset& d) { return from_labels(d.labels); },
          [](MultiLabelDataset& d, const LabelArray& a) {
            LabelMatrix l = to_labels(a);
            if (l.rows() != d.labels.rows() || l.cols() != d.labels.cols()) {
              throw py::value_error("label array shape does not match the dataset");
            }
            d.labels = std::move(l);
          })
      .def_property_readonly("features",
                             [](const MultiLabelDataset& d) {
                               py::list rows;
                               for (const auto& row : d.features) {
                                 py::list r;
                                 for (const auto& e : row) r.append(py::make_tuple(e.index, e.value));
                                 rows.append(r);
                               }
                               return rows;
                             })
      .def_readonly("label_names", &MultiLabelDataset::label_names)
      .def("__eq__", [](const MultiLabelDataset& a, const MultiLabelDataset& b) { return a == b; });

  m.def("parse_dataset", py::overload_cast<const std::string&>(&parse_dataset), py::arg("text"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("write_dataset", py::overload_cast<const MultiLabelDataset&>(&write_dataset), py::arg("dataset"));

  m.def(
      "inject_noise",
      [](const LabelArray& labels, const std::string& kind, double rate, std::uint64_t seed,
         bool always_corrupt) {
        NoiseSpec s{parse_noise_kind(kind), rate, seed, always_corrupt};
        s.validate();
        return from_labels(inject_noise(to_labels(labels), s));
      },
      py::arg("labels"), py::arg("kind"), py::arg("rate") = 0.0, py::arg("seed") = 0,
      py::arg("always_corrupt") = true);

  m.def(
      "binarize",
      [](const Eigen::MatrixXd& p, double t) { return from_labels(binarize(p, t)); },
      py::arg("probabilities"), py::arg("threshold") = 0.5);
  m.def("ebf1", [](const LabelArray& t, const LabelArray& p) { return ebf1(to_labels(t), to_labels(p)); });
  m.def("mif1", [](const LabelArray& t, const LabelArray& p) { return mif1(to_labels(t), to_labels(p)); });
  m.def("maf1", [](const LabelArray& t, const LabelArray& p) { return maf1(to_labels(t), to_labels(p)); });

  m.def(
      "bce",
      [](const LabelArray& y, const std::vector<double>& yhat, double eps) { return bce(to_row(y), yhat, eps); },
      py::arg("y"), py::arg("yhat"), py::arg("clamp_eps") = 1e-7);
  m.def(
      "asl",
      [](const LabelArray& y, const std::vector<double>& yhat, double gp, double gn, double shift, double eps) {
        return asl(to_row(y), yhat, loss_spec(gp, gn, shift, eps));
      },
      py::arg("y"), py::arg("yhat"), py::arg("gamma_pos") = 1.0, py::arg("gamma_neg") = 4.0,
      py::arg("shift_m") = 0.05, py::arg("clamp_eps") = 1e-7);

  m.def(
      "grad_check",
      [](std::size_t num_features, std::size_t num_labels, std::size_t label_dim, std::size_t num_layers,
         std::size_t num_heads, double lambda, std::uint64_t seed) {
        ModelConfig c;
        c.num_features = num_features;
        c.num_labels = num_labels;
        c.label_dim = label_dim;
        c.num_layers = num_layers;
        c.num_heads = num_heads;
        c.encoder_hidden = 8;
        c.feedforward_hidden = 8;
        LossSpec s;
        s.lambda = lambda;
        const GradCheckReport r = grad_check(c, s, seed);
        py::dict errors;
        for (const auto& a : r.arrays) errors[py::str(a.name)] = a.max_relative_error;
        return py::make_tuple(r.passed(), r.worst(), errors);
      },
      py::arg("num_features") = 6, py::arg("num_labels") = 5, py::arg("label_dim") = 8,
      py::arg("num_layers") = 2, py::arg("num_heads") = 2, py::arg("lam") = 0.1, py::arg("seed") = 0);

  py::class_<Checkpoint>(m, "Model")
      .def_property_readonly("num_labels", [](const Checkpoint& c) { return c.params.config.num_labels; })
      .def_property_readonly("label_dim", [](const Checkpoint& c) { return c.params.config.label_dim; })
      .def_property_readonly("label_embeddings", [](const Checkpoint& c) { return c.embeddings.current; })
      .def_property_readonly("anchors", [](const Checkpoint& c) { return c.embeddings.anchors(); })
      .def("predict",
           [](const Checkpoint& c, const MultiLabelDataset& d) {
             return predict(d.features, c.embeddings, c.params);
           })
      .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(p, c); })
      .def_static("load", &load_checkpoint, py::arg("path"));

  m.def("fit", &fit, py::arg("train"), py::arg("val"), py::arg("anchors") = py::none(),
        "Trains a model. Keyword arguments are configuration keys such as epochs=5 or label_dim=8; lam stands for lambda.");
}
