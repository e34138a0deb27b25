#include "cgame/cli.hpp"

#include "cgame/error.hpp"
#include "cgame/io.hpp"

#include <cmath>
#include <exception>
#include <ostream>

namespace cgame::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    dataset.validate();
    if (model.n_f < 1) throw ConfigError("must be >= 1", "model.n_f");
    if (model.n_h < 1) throw ConfigError("must be >= 1", "model.n_h");
    model.matcher.validate();
    if (train.seeds.empty()) throw ConfigError("at least one seed is required", "train.seeds");
    auto t = train.base;
    t.matcher = model.matcher;
    t.validate();
    if (std::abs(dataset.sim.train_fraction - 0.8) > 1e-12) {
        throw ConfigError("train fraction is fixed at 0.8", "sim.train_fraction");
    }
}

model::TrainConfig RunConfig::train_config(std::uint64_t seed) const {
    model::TrainConfig t = train.base;
    t.seed = seed;
    t.matcher = model.matcher;
    return t;
}

json to_json(const RunConfig& c) {
    json model_j = c.model.matcher;
    model_j["n_f"] = c.model.n_f;
    model_j["n_h"] = c.model.n_h;
    const auto& t = c.train.base;
    return json{{"network", c.dataset.network},
                {"sim", c.dataset.sim},
                {"model", model_j},
                {"train",
                 {{"lr", t.lr},
                  {"momentum", t.momentum},
                  {"batch_size", t.batch_size},
                  {"max_iters", t.max_iters},
                  {"loss_kind", model::to_string(t.loss)},
                  {"normalization", model::to_string(t.normalization)},
                  {"slope", t.slope},
                  {"eval_interval", t.eval_interval},
                  {"seeds", c.train.seeds}}},
                {"paths", {{"data", c.paths.data}, {"out", c.paths.out}, {"report", c.paths.report}}}};
}

RunConfig run_config_from_json(const json& j) {
    io::StrictObject root(j, "");
    root.allow_only({"network", "sim", "model", "train", "paths"});
    RunConfig c;
    if (root.has("network")) c.dataset.network = simkit::network_config_from_json(root.at("network"), "network");
    if (root.has("sim")) c.dataset.sim = simkit::sim_config_from_json(root.at("sim"), "sim");

    if (root.has("model")) {
        json m = root.at("model");
        io::StrictObject mo(m, "model");
        mo.allow_only({"n_f", "n_h", "n_s", "p", "q", "lambda", "update_interval", "literal_structure_cosine",
                       "gate_aggregation"});
        mo.read("n_f", c.model.n_f);
        mo.read("n_h", c.model.n_h);
        m.erase("n_f");
        m.erase("n_h");
        c.model.matcher = model::matcher_hyper_from_json(m, "model");
    }
    if (root.has("train")) {
        json t = root.at("train");
        io::StrictObject to(t, "train");
        to.allow_only({"lr", "momentum", "batch_size", "max_iters", "loss_kind", "normalization", "slope",
                       "eval_interval", "seeds"});
        if (to.has("seeds")) to.read("seeds", c.train.seeds);
        t.erase("seeds");
        c.train.base = model::train_config_from_json(t, "train");
    }
    if (root.has("paths")) {
        io::StrictObject p(root.at("paths"), "paths");
        p.allow_only({"data", "out", "report"});
        p.read("data", c.paths.data);
        p.read("out", c.paths.out);
        p.read("report", c.paths.report);
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    json j;
    try {
        j = io::read_json(path);
    } catch (const FormatError& e) {
        throw ConfigError(e.what(), "<config>");
    }
    return run_config_from_json(j);
}

void cmd_init_config(const fs::path& path, std::ostream& log) {
    RunConfig defaults;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_text(path, to_json(defaults).dump(2) + "\n");
    log << "wrote default config to " << path.string() << "\n";
}

GenSummary cmd_gen(const RunConfig& config, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                   std::ostream& log) {
    config.validate();
    const std::uint64_t s = seed.value_or(config.dataset.sim.seed);
    const auto ds = simkit::generate_dataset(config.dataset, s);
    simkit::save_dataset(ds, out_dir);
    const auto manifest = io::read_json(out_dir / "manifest.json");

    GenSummary summary{ds.items.size(), ds.n_links(), ds.n_slices(), ds.n_spots(),
                       manifest.at("blob").at("sha256").get<std::string>()};
    log << "generated " << summary.n_items << " items (train " << ds.split.train.size() << ", validation "
        << ds.split.validation.size() << ")\n"
        << "F shape " << summary.n_l << "x" << summary.n_t << ", D shape " << summary.n_p << "x" << summary.n_p << "\n"
        << "data.bin sha256 " << summary.sha256 << "\n";
    return summary;
}

namespace {

void check_dataset_matches(const RunConfig& config, const simkit::Dataset& ds) {
    const auto& net = config.dataset.network;
    const std::size_t n_links = 2 * (net.rows * (net.cols - 1) + net.cols * (net.rows - 1));
    if (ds.n_spots() != net.rows * net.cols || ds.n_links() != n_links || ds.n_slices() != config.dataset.sim.n_t) {
        throw ShapeError("dataset (n_l=" + std::to_string(ds.n_links()) + ", n_t=" + std::to_string(ds.n_slices()) +
                         ", n_p=" + std::to_string(ds.n_spots()) + ") does not match the config network " +
                         std::to_string(net.rows) + "x" + std::to_string(net.cols) + " with n_t=" +
                         std::to_string(config.dataset.sim.n_t));
    }
}

} // namespace

std::vector<fs::path> cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                                bool ablation, std::optional<std::uint64_t> seed, std::ostream& log) {
    config.validate();
    const auto ds = simkit::load_dataset(data_dir);
    check_dataset_matches(config, ds);
    const auto dims = model::dims_for(ds, config.model.n_f, config.model.n_h);

    std::vector<std::uint64_t> seeds = config.train.seeds;
    if (seed) seeds = {*seed};

    std::vector<fs::path> dirs;
    for (auto s : seeds) {
        const auto tc = config.train_config(s);
        log << (ablation ? "training identity-matcher ablation" : "training C-GAME") << ", seed " << s << ", "
            << tc.max_iters << " iterations\n";
        const auto result = ablation ? model::train_ablation(ds, tc, dims) : model::train(ds, tc, dims);
        const fs::path dir = out_dir / ("seed_" + std::to_string(s));
        // The whole run directory is published in one rename, so an interrupted run leaves nothing behind.
        io::write_directory_atomically(dir, [&](const fs::path& tmp) {
            model::save_model(result.model, tmp / "model");
            for (const auto& f : fs::directory_iterator(tmp / "model")) fs::rename(f.path(), tmp / f.path().filename());
            fs::remove(tmp / "model");
            evalkit::export_curve(result.curve.train, tmp / "loss_curve.csv");
            evalkit::export_curve(result.curve.validation, tmp / "validation_curve.csv");
        });
        const auto& c = result.curve.train;
        log << "  final training loss " << c.back() << ", best validation at iteration " << result.curve.best_iteration
            << ", matcher steps " << result.curve.matcher_steps << " -> " << dir.string() << "\n";
        dirs.push_back(dir);
    }
    return dirs;
}

evalkit::MetricsReport cmd_eval(const std::vector<fs::path>& model_dirs, const fs::path& data_dir,
                                const fs::path& report_path, std::ostream& log, evalkit::Split split) {
    if (model_dirs.empty()) throw ConfigError("at least one model directory is required", "--model");
    const auto ds = simkit::load_dataset(data_dir);
    std::vector<evalkit::Metrics> per_model;
    std::vector<std::string> labels;
    for (const auto& dir : model_dirs) {
        const auto m = model::load_model(dir);
        per_model.push_back(evalkit::evaluate(m, ds, split));
        labels.push_back(dir.filename().string());
    }
    auto report = evalkit::aggregate(per_model, labels);
    report.split = evalkit::to_string(split);
    evalkit::write_report(report, report_path);
    log << "metrics over " << report.n_samples << " OD cells (" << report.split << " split, " << per_model.size()
        << " model(s))\n";
    auto line = [&](const char* name, const evalkit::MetricSummary& s) {
        log << "  " << name << " " << s.mean << " +- " << s.std << "\n";
    };
    line("RMSE    ", report.rmse);
    line("MAE     ", report.mae);
    line("Accuracy", report.accuracy);
    line("R2      ", report.r2);
    line("var     ", report.var_score);
    line("hotspot ", report.hotspot_recall);
    log << "report written to " << report_path.string() << "\n";
    return report;
}

void export_od_comparison(const numcore::Matrix& truth, const numcore::Matrix& predicted, const fs::path& out_dir) {
    numcore::require_shape(predicted, truth.rows(), truth.cols(), "predicted OD matrix");
    numcore::Matrix diff = truth;
    for (std::size_t i = 0; i < diff.size(); ++i) diff.values()[i] = std::abs(truth.values()[i] - predicted.values()[i]);
    fs::create_directories(out_dir);
    evalkit::export_heatmap(truth, out_dir / "od_true");
    evalkit::export_heatmap(predicted, out_dir / "od_pred");
    evalkit::export_heatmap(diff, out_dir / "od_absdiff");
}

void cmd_export(const fs::path& model_dir, const fs::path& data_dir, std::size_t item_index, const fs::path& out_dir,
                std::ostream& log) {
    const auto ds = simkit::load_dataset(data_dir);
    if (item_index >= ds.items.size()) {
        throw IndexError("item index " + std::to_string(item_index) + " out of range (dataset has " +
                         std::to_string(ds.items.size()) + " items)");
    }
    const auto m = model::load_model(model_dir);
    const auto& item = ds.items[item_index];
    if (m.dims.n_p != ds.n_spots() || m.dims.n_l != ds.n_links() || m.dims.n_t != ds.n_slices()) {
        throw ShapeError("model dims do not match the dataset");
    }
    const auto pred = model::predict_od(m, item.counts);
    export_od_comparison(item.od.values, pred.values, out_dir);
    log << "exported od_true, od_pred, od_absdiff (.csv, .pgm) for item " << item_index << " to " << out_dir.string()
        << "\n";
}

int exit_code_for_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const UndefinedMetricError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace cgame::cli
