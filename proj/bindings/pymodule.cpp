#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfedpm/experiment.hpp"
#include "pfedpm/metrics.hpp"
#include "pfedpm/protocol.hpp"

namespace py = pybind11;
using namespace pfedpm;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    Tensor t(1, static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), t.raw().begin());
    return t;
  }
  if (a.ndim() != 2) throw DimensionError("expected a 1-d or 2-d array");
  Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), t.raw().begin());
  return t;
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> a({t.rows(), t.cols()});
  std::copy(t.raw().begin(), t.raw().end(), a.mutable_data());
  return a;
}

PrototypeSet to_protos(const py::dict& d) {
  PrototypeSet ps;
  for (auto item : d) {
    int label = item.first.cast<int>();
    auto pair = item.second.cast<py::tuple>();
    ps.entries[label] = {to_tensor(pair[0].cast<py::array_t<double>>()),
                         pair[1].cast<long long>()};
  }
  return ps;
}

py::dict from_protos(const PrototypeSet& ps) {
  py::dict d;
  for (const auto& [label, entry] : ps.entries)
    d[py::int_(label)] = py::make_tuple(to_array(entry.first), entry.second);
  return d;
}

py::dict round_to_dict(const RoundMetrics& m) {
  py::dict d;
  d["round"] = m.round;
  d["decision_acc"] = m.decision_acc;
  d["relation_acc"] = m.relation_acc;
  d["mean_decision_acc"] = m.mean_decision_acc;
  d["std_decision_acc"] = m.std_decision_acc;
  d["mean_relation_acc"] = m.mean_relation_acc;
  d["std_relation_acc"] = m.std_relation_acc;
  d["mean_train_loss"] = m.mean_train_loss;
  d["upload_scalars"] = m.upload_scalars;
  d["cum_upload_scalars"] = m.cum_upload_scalars;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pfedpm, m) {
  m.doc() = "prototype-exchange personalized federated learning simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("aggregate_global",
        [](const py::list& uploads) {
          std::vector<UploadMsg> msgs;
          for (auto u : uploads) {
            auto pair = u.cast<py::tuple>();
            msgs.push_back({pair[0].cast<int>(), to_protos(pair[1].cast<py::dict>())});
          }
          return from_protos(aggregate_global(msgs));
        },
        py::arg("uploads"),
        "Count-weighted aggregation of (client_id, {label: (vector, count)}) uploads.");

  m.def("mix_prototypes",
        [](const py::dict& local, const py::dict& global_, double a) {
          return from_protos(mix_prototypes(to_protos(local), to_protos(global_), a));
        },
        py::arg("local"), py::arg("global_"), py::arg("a"),
        "a*local + (1-a)*global per class; global fills classes the client lacks.");

  m.def("synth_blobs",
        [](int num_classes, int input_dim, int per_class, double cluster_std,
           std::uint64_t seed, double separation) {
          Dataset ds = synth_blobs(num_classes, input_dim, per_class, cluster_std, seed,
                                   separation);
          return py::make_tuple(to_array(ds.features), ds.labels);
        },
        py::arg("num_classes"), py::arg("input_dim"), py::arg("per_class"),
        py::arg("cluster_std"), py::arg("seed"), py::arg("separation") = 1.0,
        "Deterministic Gaussian clusters; returns (features, labels).");

  m.def("load_mnist_idx",
        [](const std::string& images, const std::string& labels) {
          Dataset ds = load_mnist_idx(images, labels);
          return py::make_tuple(to_array(ds.features), ds.labels);
        },
        py::arg("images"), py::arg("labels"),
        "Load a big-endian IDX image/label pair; pixels scaled to [0,1].");

  m.def("partition_label_skew",
        [](const py::array_t<double>& features, const std::vector<int>& labels,
           int num_clients, double n_mean, double k_mean, double stdev,
           std::uint64_t seed) {
          Dataset ds;
          ds.features = to_tensor(features);
          ds.labels = labels;
          for (int y : labels) ds.num_classes = std::max(ds.num_classes, y + 1);
          auto splits = partition_label_skew(
              ds, SkewSpec{num_clients, n_mean, k_mean, stdev, seed});
          py::list out;
          for (const auto& s : splits) {
            py::dict d;
            d["id"] = s.id;
            d["classes"] = s.classes;
            d["train_idx"] = s.train_idx;
            d["test_idx"] = s.test_idx;
            out.append(d);
          }
          return out;
        },
        py::arg("features"), py::arg("labels"), py::arg("num_clients"), py::arg("n_mean"),
        py::arg("k_mean"), py::arg("stdev"), py::arg("seed"),
        "Label-distribution-skew partition with per-client 80/20 splits.");

  m.def("run_experiment",
        [](const std::string& config_text, const std::string& out_dir, int threads) {
          ExperimentConfig cfg = parse_config_text(config_text);
          ExperimentResult res = run_experiment(cfg, out_dir, threads);
          py::list rounds;
          for (const auto& r : res.rounds) rounds.append(round_to_dict(r));
          return rounds;
        },
        py::arg("config_text"), py::arg("out_dir"), py::arg("threads") = 1,
        "Full seeded run; writes metrics.csv/summary.json/partition.json/manifest.json.");

  m.def("replay",
        [](const std::string& manifest, const std::string& out_dir, int threads) {
          return replay(manifest, out_dir, threads);
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("threads") = 1,
        "Re-run from a manifest; True when regenerated outputs match its checksums.");

  m.def("preset_config", &preset_config, py::arg("name"));
  m.def("preset_names", &preset_names);
  m.def("resolve_config",
        [](const std::string& text) { return resolve_config(parse_config_text(text)); },
        py::arg("config_text"), "Canonical key=value emission with all defaults filled in.");
}
