#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pros/bench.hpp"
#include "pros/error.hpp"
#include "pros/policy.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using nlohmann::json;
using namespace pros;

namespace {

  using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
  using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

  std::vector<double> to_vector(const DoubleArray& a) {
    if (a.ndim() != 1) { throw InvalidArgument("query must be one-dimensional"); }
    return {a.data(), a.data() + a.size()};
  }

  py::list neighbors(const std::vector<Neighbor>& ns) {
    py::list out;
    for (const auto& n : ns) { out.append(py::make_tuple(n.id, n.distance)); }
    return out;
  }

  // Index bound together with the dataset it was built on.
  struct PyIndex {
    std::shared_ptr<const IndexTree> tree;
  };

  struct PyBundle {
    std::shared_ptr<const GuaranteeBundle> bundle;
  };

  std::shared_ptr<const Dataset> as_dataset(const FloatArray& values, std::optional<std::vector<std::int32_t>> labels) {
    if (values.ndim() != 2) { throw InvalidArgument("values must be a 2D array (count, length)"); }
    std::vector<float> v(values.data(), values.data() + values.size());
    return std::make_shared<const Dataset>(static_cast<std::size_t>(values.shape(1)), std::move(v),
                                           labels.value_or(std::vector<std::int32_t>{}));
  }

  py::dict trace_dict(const SearchTrace& t) {
    py::list events;
    for (const auto& e : t.events) {
      events.append(py::dict("leaves_visited"_a = e.leaves_visited, "bsf_distances"_a = e.bsf_distances,
                             "bsf_ids"_a = e.bsf_ids, "initial"_a = e.has(ProgressiveEvent::initial),
                             "checkpoint"_a = e.has(ProgressiveEvent::checkpoint),
                             "final"_a = e.has(ProgressiveEvent::final)));
    }
    return py::dict("events"_a = events, "exact_distances"_a = t.exact_distances, "exact_ids"_a = t.exact_ids,
                    "leaves_to_exact"_a = t.leaves_to_exact, "total_leaves"_a = t.total_leaves);
  }

} // namespace

PYBIND11_MODULE(_pros, m) {
  m.doc() = "Progressive k-NN search with probabilistic quality guarantees";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ModelMismatch>(m, "ModelMismatch", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  py::class_<Dataset, std::shared_ptr<Dataset>>(m, "Dataset")
      .def(py::init([](const FloatArray& values, std::optional<std::vector<std::int32_t>> labels) {
             return std::const_pointer_cast<Dataset>(as_dataset(values, std::move(labels)));
           }),
           "values"_a, "labels"_a = py::none())
      .def_property_readonly("size", &Dataset::size)
      .def_property_readonly("length", &Dataset::length)
      .def_property_readonly("labels", &Dataset::labels)
      .def("__len__", &Dataset::size)
      .def("series", &Dataset::series_as_double, "id"_a)
      .def("to_numpy", [](const Dataset& d) {
        py::array_t<float> out({d.size(), d.length()});
        std::copy(d.values().begin(), d.values().end(), out.mutable_data());
        return out;
      });

  m.def("make_random_walk",
        [](std::size_t count, std::size_t length, std::uint64_t seed) {
          return std::make_shared<Dataset>(make_random_walk(count, length, seed));
        },
        "count"_a, "length"_a = 64, "seed"_a = 1);
  m.def("make_cbf",
        [](std::size_t count, std::size_t length, double amplitude, std::uint64_t seed) {
          CbfParams p;
          p.amplitude = amplitude;
          return std::make_shared<Dataset>(make_cbf(count, length, p, seed));
        },
        "count"_a, "length"_a = 128, "amplitude"_a = 3.0, "seed"_a = 1);
  m.def("load_dataset",
        [](const std::filesystem::path& sidecar) {
          return std::make_shared<Dataset>(load_dataset(load_descriptor(sidecar)));
        },
        "sidecar"_a);
  m.def("write_dataset",
        [](const Dataset& d, const std::filesystem::path& raw) { (void)write_dataset(d, raw); }, "dataset"_a,
        "raw_path"_a);

  m.def("euclidean", [](const DoubleArray& a, const DoubleArray& b) { return euclidean(to_vector(a), to_vector(b)); });
  m.def("dtw", [](const DoubleArray& a, const DoubleArray& b, std::size_t r) { return dtw(to_vector(a), to_vector(b), r); },
        "a"_a, "b"_a, "radius"_a);
  m.def("lb_keogh",
        [](const DoubleArray& q, const DoubleArray& c, std::size_t r) {
          return lb_keogh(build_envelope(to_vector(q), r), to_vector(c));
        },
        "query"_a, "candidate"_a, "radius"_a);

  m.def("brute_force_knn",
        [](const Dataset& d, const DoubleArray& q, std::size_t k, const std::string& distance) {
          return neighbors(brute_force_knn(d, to_vector(q), k, DistanceKind::parse(distance)));
        },
        "dataset"_a, "query"_a, "k"_a = 1, "distance"_a = "ed");

  py::class_<PyIndex>(m, "Index")
      .def_property_readonly("leaf_count", [](const PyIndex& i) { return i.tree->leaf_count(); })
      .def_property_readonly("indexed_count", [](const PyIndex& i) { return i.tree->indexed_count(); })
      .def_property_readonly("kind", [](const PyIndex& i) { return to_string(i.tree->config().kind); })
      .def("held_out_ids", [](const PyIndex& i) { return i.tree->held_out_ids(); })
      .def("save", [](const PyIndex& i, const std::filesystem::path& p) { save_index(*i.tree, p); }, "path"_a);

  m.def("build_index",
        [](std::shared_ptr<Dataset> d, const std::string& kind, std::size_t leaf_size, std::size_t segments,
           std::optional<std::vector<std::uint32_t>> subset) {
          IndexConfig c;
          c.kind = parse_index_kind(kind);
          c.leaf_threshold = leaf_size;
          c.segment_count = segments;
          std::optional<std::span<const std::uint32_t>> s;
          if (subset) { s = std::span<const std::uint32_t>(*subset); }
          py::gil_scoped_release release;
          return PyIndex{std::make_shared<const IndexTree>(build_index(d, c, s))};
        },
        "dataset"_a, "kind"_a = "isax", "leaf_size"_a = 100, "segments"_a = 16, "subset"_a = py::none());
  m.def("load_index",
        [](const std::filesystem::path& p, std::shared_ptr<Dataset> d) {
          return PyIndex{std::make_shared<const IndexTree>(load_index(p, d))};
        },
        "path"_a, "dataset"_a);

  m.def("progressive_knn",
        [](const PyIndex& i, const DoubleArray& q, std::size_t k, const std::string& distance,
           std::optional<std::vector<std::size_t>> checkpoints) {
          SearchConfig c;
          c.k = k;
          c.distance = DistanceKind::parse(distance);
          if (checkpoints) { c.checkpoints = *checkpoints; }
          const auto values = to_vector(q);
          SearchTrace t;
          {
            py::gil_scoped_release release;
            t = progressive_knn(*i.tree, values, c);
          }
          return trace_dict(t);
        },
        "index"_a, "query"_a, "k"_a = 1, "distance"_a = "ed", "checkpoints"_a = py::none());

  py::class_<PyBundle>(m, "Bundle")
      .def_property_readonly("k", [](const PyBundle& b) { return b.bundle->k; })
      .def_property_readonly("checkpoints", [](const PyBundle& b) { return b.bundle->checkpoints; })
      .def("to_json", [](const PyBundle& b) { return to_json(*b.bundle).dump(); })
      .def("save", [](const PyBundle& b, const std::filesystem::path& p) { save_bundle(*b.bundle, p); }, "path"_a)
      .def("time_bound",
           [](const PyBundle& b, double phi, double first_distance) {
             return b.bundle->time_bound(phi).bound(first_distance);
           },
           "phi"_a, "first_distance"_a)
      .def("exact_probability",
           [](const PyBundle& b, std::size_t leaves, double bsf) { return exact_probability(*b.bundle, leaves, bsf); },
           "leaves"_a, "bsf"_a)
      .def("estimate",
           [](const PyBundle& b, double bsf, std::size_t leaves, double theta, const std::string& method,
              double witness_distance) {
             const auto e = estimate_distance(*b.bundle, {bsf, leaves, witness_distance}, theta, parse_estimator(method));
             return py::dict("point"_a = e.point, "lower"_a = e.lower, "upper"_a = e.upper);
           },
           "bsf"_a, "leaves"_a, "theta"_a = 0.05, "method"_a = "kde2", "witness_distance"_a = 0.0);

  m.def("load_bundle", [](const std::filesystem::path& p) {
    return PyBundle{std::make_shared<const GuaranteeBundle>(load_bundle(p))};
  });

  m.def("train",
        [](const PyIndex& i, const std::vector<std::uint32_t>& witness_ids, const std::vector<std::uint32_t>& query_ids,
           std::size_t k, const std::string& distance, bool fit_kde3) {
          CollectConfig cc;
          cc.k = k;
          cc.distance = DistanceKind::parse(distance);
          TrainingConfig tc;
          tc.fit_kde3 = fit_kde3;
          py::gil_scoped_release release;
          const auto& ds = i.tree->dataset();
          const auto ws = make_witness_set(*i.tree, ds, witness_ids, k, cc.distance);
          const auto records = collect_training(*i.tree, ds, query_ids, ws, cc);
          return PyBundle{std::make_shared<const GuaranteeBundle>(fit_bundle(records, ws, *i.tree, cc, tc))};
        },
        "index"_a, "witness_ids"_a, "query_ids"_a, "k"_a = 1, "distance"_a = "ed", "fit_kde3"_a = false);

  m.def("query",
        [](const PyIndex& i, const PyBundle& b, const DoubleArray& q, const std::string& policy, bool audit) {
          RunConfig rc;
          rc.k = b.bundle->k;
          rc.distance = b.bundle->distance;
          rc.audit = audit;
          const auto p = StoppingPolicy::parse(policy);
          const auto values = to_vector(q);
          QueryOutcome out;
          {
            py::gil_scoped_release release;
            out = run_with_policy(*i.tree, *b.bundle, values, p, rc);
          }
          py::dict d("answer"_a = neighbors(out.answer), "stopped_at"_a = out.stopped_at, "stopped"_a = out.stopped,
                     "stop_reason"_a = out.stop_reason, "time_bound"_a = out.time_bound);
          if (audit) {
            d["total_leaves"] = out.total_leaves;
            d["savings"] = out.savings();
            d["exact"] = out.was_exact;
            d["family_error"] = out.family_error;
            d["predicted_class"] = out.predicted_class;
            d["exact_class"] = out.exact_class;
          }
          return d;
        },
        "index"_a, "bundle"_a, "query"_a, "policy"_a = "none", "audit"_a = true);

  m.def("plan_moments", [](std::size_t t_max, std::size_t m) { return plan_moments(t_max, m); }, "t_max"_a,
        "m"_a = 16);

  m.def("_bench_json",
        [](const std::string& preset, const std::string& config, std::optional<std::size_t> repetitions) {
          BenchConfig c = config.empty() ? bench_preset(preset) : BenchConfig::from_json(json::parse(config));
          if (repetitions) { c.repetitions = *repetitions; }
          py::gil_scoped_release release;
          return run_bench(c).to_json().dump();
        },
        "preset"_a, "config"_a = "", "repetitions"_a = py::none());
  m.def("_preset_json", [](const std::string& name) { return bench_preset(name).to_json().dump(); });
}
