#include "cgame/cli.hpp"
#include "cgame/error.hpp"
#include "cgame/evalkit.hpp"
#include "cgame/model.hpp"
#include "cgame/netgen.hpp"
#include "cgame/simkit.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace cgame;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

numcore::Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const auto r = static_cast<std::size_t>(a.shape(0));
    const auto c = static_cast<std::size_t>(a.shape(1));
    return numcore::Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const numcore::Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

std::span<const double> flat(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

py::dict metrics_dict(const evalkit::Metrics& m) {
    py::dict d;
    d["rmse"] = m.rmse;
    d["mae"] = m.mae;
    d["accuracy"] = m.accuracy;
    d["r2"] = m.r2;
    d["var_score"] = m.var_score;
    d["hotspot_recall"] = m.hotspot_recall;
    d["n_samples"] = m.n_samples;
    d["hotspot_items"] = m.hotspot_items;
    return d;
}

// Datasets are handed to Python as plain arrays; the C++ object stays the source of truth.
struct PyDataset {
    simkit::Dataset ds;

    py::array_t<double> counts() const {
        py::array_t<double> out({ds.items.size(), ds.n_links(), ds.n_slices()});
        double* p = out.mutable_data();
        for (const auto& it : ds.items) p = std::copy(it.counts.values.values().begin(), it.counts.values.values().end(), p);
        return out;
    }
    py::array_t<double> od() const {
        py::array_t<double> out({ds.items.size(), ds.n_spots(), ds.n_spots()});
        double* p = out.mutable_data();
        for (const auto& it : ds.items) p = std::copy(it.od.values.values().begin(), it.od.values.values().end(), p);
        return out;
    }
};

} // namespace

PYBIND11_MODULE(_cgame, m) {
    m.doc() = "C-GAME origin-destination estimation (C++ core)";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<IndexError>(m, "IndexError", data.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", data.ptr());
    auto format = py::register_exception<FormatError>(m, "FormatError", data.ptr());
    py::register_exception<VersionError>(m, "VersionError", format.ptr());
    py::register_exception<ChecksumError>(m, "ChecksumError", format.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());

    m.def("rmse", [](const Array& y, const Array& p) { return evalkit::rmse(flat(y), flat(p)); });
    m.def("mae", [](const Array& y, const Array& p) { return evalkit::mae(flat(y), flat(p)); });
    m.def("accuracy", [](const Array& y, const Array& p) { return evalkit::accuracy(flat(y), flat(p)); });
    m.def("r2", [](const Array& y, const Array& p) { return evalkit::r2(flat(y), flat(p)); });
    m.def("var_score", [](const Array& y, const Array& p) { return evalkit::var_score(flat(y), flat(p)); });
    m.def(
        "hotspot_recall",
        [](const Array& y, const Array& p, double k, double tol) {
            return evalkit::hotspot_recall(to_matrix(y), to_matrix(p), k, tol);
        },
        py::arg("y"), py::arg("y_hat"), py::arg("k") = evalkit::kHotspotK,
        py::arg("tolerance") = evalkit::kHotspotTolerance);

    m.def("grid_size", [](std::size_t rows, std::size_t cols) {
        const auto g = netgen::build_grid(rows, cols, 1.0);
        return py::make_tuple(g.spot_count(), g.link_count());
    }, "(spots, links) of a rows x cols grid");
    m.def("enumerate_routes", [](std::size_t rows, std::size_t cols, netgen::SpotId o, netgen::SpotId d, std::size_t cap) {
        const auto g = netgen::build_grid(rows, cols, 1.0);
        std::vector<std::vector<netgen::LinkId>> out;
        for (const auto& r : netgen::enumerate_routes(g, o, d, cap)) out.push_back(r.links);
        return out;
    });

    py::class_<PyDataset>(m, "Dataset")
        .def_property_readonly("counts", &PyDataset::counts, "F for every item, shape (items, n_l, n_t)")
        .def_property_readonly("od", &PyDataset::od, "D for every item, shape (items, n_p, n_p)")
        .def_property_readonly("train", [](const PyDataset& d) { return d.ds.split.train; })
        .def_property_readonly("validation", [](const PyDataset& d) { return d.ds.split.validation; })
        .def("__len__", [](const PyDataset& d) { return d.ds.items.size(); })
        .def("save", [](const PyDataset& d, const std::filesystem::path& dir) { simkit::save_dataset(d.ds, dir); });

    m.def(
        "generate_dataset",
        [](std::size_t rows, std::size_t cols, std::size_t n_items, std::size_t trips_min, std::size_t trips_max,
           std::size_t n_t, std::uint64_t seed) {
            simkit::DatasetConfig c;
            c.network = {rows, cols, 2000.0};
            c.sim.n_items = n_items;
            c.sim.trips_min = trips_min;
            c.sim.trips_max = trips_max;
            c.sim.n_t = n_t;
            py::gil_scoped_release release;
            return PyDataset{simkit::generate_dataset(c, seed)};
        },
        py::arg("rows") = 6, py::arg("cols") = 6, py::arg("n_items") = 100, py::arg("trips_min") = 20000,
        py::arg("trips_max") = 30000, py::arg("n_t") = 12, py::arg("seed") = 0);
    m.def("load_dataset", [](const std::filesystem::path& dir) { return PyDataset{simkit::load_dataset(dir)}; });

    py::class_<model::CGameModel>(m, "Model")
        .def_property_readonly("gate", [](const model::CGameModel& mdl) { return model::matcher_gate(mdl.matcher); })
        .def_property_readonly("M", [](const model::CGameModel& mdl) { return to_array(mdl.matcher.m); })
        .def_property_readonly("V", [](const model::CGameModel& mdl) { return to_array(mdl.matcher.v); })
        .def("predict_od", [](const model::CGameModel& mdl, const Array& f) {
            return to_array(model::predict_od(mdl, {to_matrix(f), 0.0}).values);
        })
        .def("predict_counts", [](const model::CGameModel& mdl, const Array& d) {
            return to_array(model::predict_counts(mdl, {to_matrix(d)}).values);
        })
        .def("evaluate", [](const model::CGameModel& mdl, const PyDataset& d, const std::string& split) {
            return metrics_dict(evalkit::evaluate(mdl, d.ds, evalkit::split_from_string(split)));
        }, py::arg("dataset"), py::arg("split") = "validation")
        .def("save", [](const model::CGameModel& mdl, const std::filesystem::path& dir) { model::save_model(mdl, dir); });
    m.def("load_model", [](const std::filesystem::path& dir) { return model::load_model(dir); });

    m.def(
        "train",
        [](const PyDataset& d, std::size_t iters, double lr, std::size_t batch_size, std::size_t n_f, std::size_t n_h,
           std::uint64_t seed, bool ablation, const std::string& normalization) {
            model::TrainConfig c;
            c.max_iters = iters;
            c.lr = lr;
            c.batch_size = batch_size;
            c.seed = seed;
            c.normalization = model::normalization_from_string(normalization);
            const auto dims = model::dims_for(d.ds, n_f, n_h);
            model::TrainResult r;
            {
                py::gil_scoped_release release;
                r = ablation ? model::train_ablation(d.ds, c, dims) : model::train(d.ds, c, dims);
            }
            return py::make_tuple(std::move(r.model), r.curve.train);
        },
        py::arg("dataset"), py::arg("iters") = 1000, py::arg("lr") = 1e-3, py::arg("batch_size") = 32,
        py::arg("n_f") = 256, py::arg("n_h") = 512, py::arg("seed") = 0, py::arg("ablation") = false,
        py::arg("normalization") = "zscore",
        "Returns (model, per-iteration training loss).");

    m.def("default_config_json", [] { return cli::to_json(cli::RunConfig{}).dump(2); });
}
