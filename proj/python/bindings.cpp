#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "carl/config.hpp"
#include "carl/experiment.hpp"
#include "carl/optim.hpp"

namespace py = pybind11;
using namespace carl;

namespace {

using ArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ArrayF = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
Tensor<T> to_tensor(const A& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(Shape(shape.begin(), shape.end()), std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(std::span<const T> data, const Shape& shape) {
  py::array_t<T> out(std::vector<py::ssize_t>(shape.begin(), shape.end()));
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  return to_array<T>(t.data(), t.shape());
}

// Runs `loss` on leaf copies of the inputs and returns (value, gradients).
py::tuple value_and_grad(const std::vector<ArrayD>& arrays,
                         const std::function<Tensor<double>(Tape<double>&, std::vector<Tensor<double>>&)>& loss) {
  std::vector<Tensor<double>> leaves;
  for (const auto& a : arrays) {
    auto t = to_tensor<double>(a);
    t.set_requires_grad(true);
    leaves.push_back(t);
  }
  Tape<double> tape;
  const auto out = loss(tape, leaves);
  tape.backward(out);
  py::list grads;
  for (const auto& t : leaves) {
    if (t.has_grad())
      grads.append(to_array<double>(t.grad(), t.shape()));
    else
      grads.append(to_array(Tensor<double>::zeros(t.shape())));
  }
  return py::make_tuple(out.item(), grads);
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["total_loss"] = r.total_loss;
  d["consistency_loss"] = r.consistency_loss;
  d["kl"] = r.kl;
  d["lambda"] = r.lambda;
  d["learning_rate"] = r.learning_rate;
  d["perplexity"] = r.perplexity;
  d["max_cluster_share"] = r.max_cluster_share;
  d["wall_seconds"] = r.wall_seconds;
  return d;
}

LabeledDataset dataset_from_arrays(const ArrayF& samples, const py::array_t<int, py::array::forcecast>& labels,
                                   int num_classes) {
  if (samples.ndim() != 2) throw DimensionError("samples must be a 2-D array");
  LabeledDataset ds;
  ds.name = "array";
  ds.sample_dim = static_cast<std::size_t>(samples.shape(1));
  ds.num_classes = num_classes;
  ds.samples.assign(samples.data(), samples.data() + samples.size());
  ds.labels.assign(labels.data(), labels.data() + labels.size());
  ds.validate();
  return ds;
}

}  // namespace

PYBIND11_MODULE(_carl_lab, m) {
  m.doc() = "CARL self-supervised training core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergedError>(m, "DivergedError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

  // losses, each returning (value, [gradient per input])
  m.def(
      "consistency_loss",
      [](const ArrayD& pa, const ArrayD& pp) {
        return value_and_grad({pa, pp}, [](Tape<double>& t, auto& x) { return consistency_loss(t, x[0], x[1]); });
      },
      py::arg("pa"), py::arg("pp"));
  m.def(
      "kl_to_uniform",
      [](const ArrayD& p_hat) {
        return value_and_grad({p_hat}, [](Tape<double>& t, auto& x) { return kl_to_uniform(t, x[0]); });
      },
      py::arg("p_hat"));
  m.def(
      "carl_total_loss",
      [](const ArrayD& pa, const ArrayD& pp, double end, double start, long decay_epochs, long epoch) {
        const DecaySchedule s{end, start, decay_epochs};
        return value_and_grad({pa, pp}, [&](Tape<double>& t, auto& x) {
          return carl_total_loss(t, x[0], x[1], s, epoch).total;
        });
      },
      py::arg("pa"), py::arg("pp"), py::arg("end") = 1.0, py::arg("start") = 2.0, py::arg("decay_epochs") = 100,
      py::arg("epoch") = 0);
  m.def(
      "infonce_loss",
      [](const ArrayD& anchors, const ArrayD& positives, double tau) {
        InfoNCEConfig cfg;
        cfg.tau = tau;
        return value_and_grad({anchors, positives},
                              [&](Tape<double>& t, auto& x) { return infonce_loss(t, x[0], x[1], cfg); });
      },
      py::arg("anchors"), py::arg("positives"), py::arg("tau") = 0.2);
  m.def(
      "assign",
      [](const ArrayD& z, const ArrayD& prototypes, const std::string& energy) {
        Tape<double> tape(Tape<double>::Mode::kInference);
        const auto mode = energy == "raw" ? EnergyMode::kRaw : EnergyMode::kNormalized;
        const auto bank = PrototypeBank<double>::from_weights(to_tensor<double>(prototypes), mode);
        return to_array(assign_views(tape, compute_energy(tape, to_tensor<double>(z), bank)));
      },
      py::arg("z"), py::arg("prototypes"), py::arg("energy") = "normalized");

  m.def(
      "decay_weight",
      [](long epoch, double end, double start, long decay_epochs) {
        return decay_weight(DecaySchedule{end, start, decay_epochs}, epoch);
      },
      py::arg("epoch"), py::arg("end") = 1.0, py::arg("start") = 2.0, py::arg("decay_epochs") = 100);
  m.def("cosine_learning_rate", &cosine_learning_rate, py::arg("epoch"), py::arg("total_epochs"),
        py::arg("lr_start"), py::arg("lr_end"));
  m.def(
      "usage_perplexity", [](const std::vector<double>& p) { return prototype_usage_perplexity(p); },
      py::arg("p_hat"));
  m.def(
      "top1_accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& labels) { return top1_accuracy(pred, labels); },
      py::arg("predictions"), py::arg("labels"));

  m.def(
      "gradcheck",
      [](int trials, std::uint64_t seed) {
        py::dict out;
        for (const auto& r : run_gradcheck_suite(trials, seed)) out[py::str(r.composition)] = r.worst_error;
        return out;
      },
      py::arg("trials") = 20, py::arg("seed") = 0);

  m.def(
      "gaussian_mixture",
      [](int num_classes, std::size_t per_class, std::size_t dim, double separation, std::uint64_t seed) {
        const auto ds = generate_gaussian_mixture(num_classes, per_class, dim, separation, seed);
        return py::make_tuple(to_array<float>(ds.samples, Shape{ds.size(), ds.sample_dim}),
                              to_array<int>(ds.labels, Shape{ds.size()}));
      },
      py::arg("num_classes"), py::arg("per_class"), py::arg("dim"), py::arg("separation"), py::arg("seed") = 0);

  m.def("config_keys", [] {
    py::dict out;
    for (const auto& k : config_keys()) out[py::str(k.name)] = k.default_value;
    return out;
  });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", &parse_run_config, py::arg("text"))
      .def_static("load", &load_run_config, py::arg("path"))
      .def("__getitem__", [](const RunConfig& c, const std::string& k) { return get_config_value(c, k); })
      .def("__setitem__",
           [](RunConfig& c, const std::string& k, const std::string& v) { set_config_value(c, k, v); })
      .def("serialize", &serialize_run_config)
      .def("__str__", &serialize_run_config);

  py::class_<TrainState>(m, "TrainState")
      .def_readonly("epoch", &TrainState::epoch)
      .def_readonly("seed", &TrainState::seed)
      .def("save", [](const TrainState& s, const std::filesystem::path& p) { checkpoint_save(s, p); })
      .def_static("load", &checkpoint_load, py::arg("path"))
      .def("checksum", [](const TrainState& s) { return checksum<float>(s.parameters()); })
      .def("prototypes", [](const TrainState& s) { return to_array(s.bank.weights); })
      .def(
          "embed",
          [](const TrainState& s, const ArrayF& samples) {
            py::array_t<int> labels(samples.ndim() == 2 ? samples.shape(0) : 0);
            std::fill_n(labels.mutable_data(), labels.size(), 0);
            LabeledDataset ds = dataset_from_arrays(samples, labels, 1);
            return to_array(extract_features(s.encoder, ds));
          },
          py::arg("samples"));

  m.def(
      "train",
      [](const RunConfig& cfg, std::optional<TrainState> resume, long stop_after,
         std::optional<std::function<void(py::dict)>> on_epoch) {
        RunConfig c = cfg;
        const auto data = build_dataset(c);
        std::vector<MetricsRecord> history;
        auto state = run_training(
            c, data.train, std::move(resume),
            [&](const MetricsRecord& r, const TrainState&) {
              history.push_back(r);
              if (on_epoch) (*on_epoch)(record_dict(r));
            },
            stop_after);
        py::list records;
        for (const auto& r : history) records.append(record_dict(r));
        return py::make_tuple(std::move(state), records);
      },
      py::arg("config"), py::arg("resume") = py::none(), py::arg("stop_after") = -1,
      py::arg("on_epoch") = py::none());

  m.def(
      "evaluate",
      [](const RunConfig& cfg, const TrainState& state) {
        RunConfig c = cfg;
        const auto data = build_dataset(c);
        const auto summary = evaluate_encoder(c, state.encoder, data);
        return py::make_tuple(summary.mean, summary.std);
      },
      py::arg("config"), py::arg("state"));

  m.def(
      "linear_probe",
      [](const ArrayF& features, const py::array_t<int, py::array::forcecast>& labels, int num_classes, long epochs,
         std::uint64_t seed) {
        ProbeConfig cfg;
        cfg.epochs = epochs;
        cfg.seed = seed;
        const std::vector<int> l(labels.data(), labels.data() + labels.size());
        return train_linear_probe(to_tensor<float>(features), l, num_classes, cfg).top1_accuracy;
      },
      py::arg("features"), py::arg("labels"), py::arg("num_classes"), py::arg("epochs") = 50, py::arg("seed") = 0);
}
