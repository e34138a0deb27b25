#include "cgame/evalkit.hpp"

#include "cgame/error.hpp"
#include "cgame/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cgame::evalkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_pair(std::span<const double> y, std::span<const double> y_hat, std::size_t min_len, const char* what) {
    if (y.size() != y_hat.size()) throw ShapeError(std::string(what) + ": length mismatch");
    if (y.size() < min_len) {
        throw UndefinedMetricError(std::string(what) + ": needs at least " + std::to_string(min_len) + " samples");
    }
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double population_variance(std::span<const double> v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

} // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
    check_pair(y, y_hat, 1, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
    check_pair(y, y_hat, 1, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
    return acc / static_cast<double>(y.size());
}

double accuracy(std::span<const double> y, std::span<const double> y_hat) {
    check_pair(y, y_hat, 1, "accuracy");
    double err = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err += std::abs(y[i] - y_hat[i]);
        mass += std::abs(y[i]);
    }
    if (!(mass > 0.0)) throw UndefinedMetricError("accuracy: ground truth is all zero");
    return 1.0 - err / mass;
}

double r2(std::span<const double> y, std::span<const double> y_hat) {
    check_pair(y, y_hat, 2, "r2");
    const double m = mean_of(y);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - m) * (y[i] - m);
    }
    if (!(ss_tot > 0.0)) throw UndefinedMetricError("r2: ground truth has zero variance");
    return 1.0 - ss_res / ss_tot;
}

double var_score(std::span<const double> y, std::span<const double> y_hat) {
    check_pair(y, y_hat, 2, "var_score");
    const double var_y = population_variance(y);
    if (!(var_y > 0.0)) throw UndefinedMetricError("var_score: ground truth has zero variance");
    std::vector<double> residual(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - y_hat[i];
    return 1.0 - population_variance(residual) / var_y;
}

double hotspot_recall(const Matrix& y, const Matrix& y_hat, double k, double tolerance) {
    numcore::require_shape(y_hat, y.rows(), y.cols(), "hotspot_recall");
    const auto yv = y.values();
    const auto pv = y_hat.values();
    if (yv.empty()) throw UndefinedMetricError("hotspot_recall: empty matrix");
    const double threshold = mean_of(yv) + k * std::sqrt(population_variance(yv));
    std::size_t hotspots = 0;
    std::size_t captured = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) {
        if (!(yv[i] > threshold)) continue;
        ++hotspots;
        if (std::abs(yv[i] - pv[i]) <= tolerance * std::abs(yv[i])) ++captured;
    }
    if (hotspots == 0) throw UndefinedMetricError("hotspot_recall: no hotspot cells (not applicable)");
    return static_cast<double>(captured) / static_cast<double>(hotspots);
}

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat) {
    Metrics m;
    m.rmse = rmse(y, y_hat);
    m.mae = mae(y, y_hat);
    m.accuracy = accuracy(y, y_hat);
    m.r2 = r2(y, y_hat);
    m.var_score = var_score(y, y_hat);
    m.n_samples = y.size();
    m.hotspot_recall = std::numeric_limits<double>::quiet_NaN();
    return m;
}

std::vector<std::size_t> split_indices(const simkit::Dataset& dataset, Split split) {
    switch (split) {
    case Split::Train: return dataset.split.train;
    case Split::Validation: return dataset.split.validation;
    case Split::All: {
        std::vector<std::size_t> all(dataset.items.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    }
    return {};
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "all") return Split::All;
    throw ConfigError("unknown split '" + s + "' (expected train|validation|all)");
}

std::string to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::All: return "all";
    }
    return "validation";
}

Metrics evaluate(const OdPredictor& predictor, const simkit::Dataset& dataset, Split split) {
    const auto idx = split_indices(dataset, split);
    if (idx.empty()) throw DataError("evaluate: split '" + to_string(split) + "' is empty");

    std::vector<double> y;
    std::vector<double> y_hat;
    double recall_sum = 0.0;
    std::size_t recall_items = 0;
    for (auto i : idx) {
        const auto& item = dataset.items.at(i);
        const auto pred = predictor(item);
        numcore::require_shape(pred.values, item.od.values.rows(), item.od.values.cols(), "predicted OD matrix");
        const auto yv = item.od.values.values();
        const auto pv = pred.values.values();
        y.insert(y.end(), yv.begin(), yv.end());
        y_hat.insert(y_hat.end(), pv.begin(), pv.end());
        try {
            recall_sum += hotspot_recall(item.od.values, pred.values);
            ++recall_items;
        } catch (const UndefinedMetricError&) {
        }
    }
    Metrics m = compute_metrics(y, y_hat);
    m.hotspot_items = recall_items;
    if (recall_items > 0) m.hotspot_recall = recall_sum / static_cast<double>(recall_items);
    return m;
}

Metrics evaluate(const model::CGameModel& model, const simkit::Dataset& dataset, Split split) {
    if (dataset.n_spots() != model.dims.n_p || dataset.n_links() != model.dims.n_l ||
        dataset.n_slices() != model.dims.n_t) {
        throw ShapeError("model dims (n_l=" + std::to_string(model.dims.n_l) + ", n_t=" + std::to_string(model.dims.n_t) +
                         ", n_p=" + std::to_string(model.dims.n_p) + ") do not match the dataset (n_l=" +
                         std::to_string(dataset.n_links()) + ", n_t=" + std::to_string(dataset.n_slices()) +
                         ", n_p=" + std::to_string(dataset.n_spots()) + ")");
    }
    return evaluate([&](const simkit::DatasetItem& item) { return model::predict_od(model, item.counts); }, dataset,
                    split);
}

MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    s.per_seed.assign(values.begin(), values.end());
    if (values.empty()) return s;
    s.mean = mean_of(values);
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

MetricsReport aggregate(std::span<const Metrics> per_seed, std::vector<std::string> labels) {
    MetricsReport r;
    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& m : per_seed) v.push_back(m.*field);
        return summarize(v);
    };
    r.rmse = collect(&Metrics::rmse);
    r.mae = collect(&Metrics::mae);
    r.accuracy = collect(&Metrics::accuracy);
    r.r2 = collect(&Metrics::r2);
    r.var_score = collect(&Metrics::var_score);
    r.hotspot_recall = collect(&Metrics::hotspot_recall);
    r.n_samples = per_seed.empty() ? 0 : per_seed.front().n_samples;
    if (labels.empty()) {
        for (std::size_t i = 0; i < per_seed.size(); ++i) labels.push_back("model_" + std::to_string(i));
    }
    r.labels = std::move(labels);
    return r;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_json(const MetricSummary& s) {
    json per = json::array();
    for (double v : s.per_seed) per.push_back(finite_or_null(v));
    return json{{"mean", finite_or_null(s.mean)}, {"std", finite_or_null(s.std)}, {"per_seed", per}};
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

json report_to_json(const MetricsReport& r) {
    return json{{"format", "cgame-report"},
                {"version", kReportFormatVersion},
                {"split", r.split},
                {"n_samples", r.n_samples},
                {"models", r.labels},
                {"metrics",
                 {{"rmse", summary_json(r.rmse)},
                  {"mae", summary_json(r.mae)},
                  {"accuracy", summary_json(r.accuracy)},
                  {"r2", summary_json(r.r2)},
                  {"var_score", summary_json(r.var_score)},
                  {"hotspot_recall", summary_json(r.hotspot_recall)}}},
                {"definitions",
                 {{"accuracy", "1 - sum|y - y_hat| / sum|y| over all OD cells of the split"},
                  {"r2_var_score", "population variances"},
                  {"hotspot_recall",
                   "project-defined quantification: cells above mean + 2 * std of each true OD matrix, "
                   "captured when relative error <= 0.2; averaged over items having hotspots"},
                  {"std", "sample standard deviation across models"}}}};
}

void write_report(const MetricsReport& report, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_text(path, report_to_json(report).dump(2) + "\n");
}

std::vector<std::uint8_t> graymap_pixels(const Matrix& m) {
    const auto v = m.values();
    std::vector<std::uint8_t> px(v.size(), 0);
    if (v.empty()) return px;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double min = *lo;
    const double range = *hi - *lo;
    if (!(range > 0.0)) return px;
    for (std::size_t i = 0; i < v.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(std::clamp(std::round(255.0 * (v[i] - min) / range), 0.0, 255.0));
    }
    return px;
}

void export_heatmap(const Matrix& m, const fs::path& stem) {
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
    std::ostringstream csv;
    csv << "# cgame-heatmap v1 rows=" << m.rows() << " cols=" << m.cols() << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) csv << ',';
            csv << format_double(m(r, c));
        }
        csv << '\n';
    }
    io::write_text(fs::path(stem.string() + ".csv"), csv.str());

    std::string header = "P5\n# cgame-heatmap v1\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
    std::vector<std::uint8_t> pgm(header.begin(), header.end());
    const auto px = graymap_pixels(m);
    pgm.insert(pgm.end(), px.begin(), px.end());
    io::write_file(fs::path(stem.string() + ".pgm"), pgm);
}

Matrix read_heatmap_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    std::size_t want_rows = 0;
    std::size_t want_cols = 0;
    if (!std::getline(in, line) ||
        std::sscanf(line.c_str(), "# cgame-heatmap v1 rows=%zu cols=%zu", &want_rows, &want_cols) != 2) {
        throw FormatError("missing heatmap header in " + path.string());
    }
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || end != cell.data() + cell.size()) {
                throw FormatError("bad number '" + cell + "' in " + path.string());
            }
            values.push_back(v);
            ++count;
        }
        if (count != want_cols) throw FormatError("heatmap CSV row width differs from header in " + path.string());
        ++rows;
    }
    if (rows != want_rows) throw FormatError("heatmap CSV row count differs from header in " + path.string());
    return Matrix(rows, want_cols, std::move(values));
}

void export_curve(std::span<const double> series, const fs::path& path) {
    std::vector<std::pair<std::size_t, double>> points;
    points.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) points.emplace_back(i + 1, series[i]);
    export_curve(points, path);
}

void export_curve(std::span<const std::pair<std::size_t, double>> series, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ostringstream csv;
    csv << "# cgame-curve v1\nstep,value\n";
    for (const auto& [step, value] : series) csv << step << ',' << format_double(value) << '\n';
    io::write_text(path, csv.str());
}

} // namespace cgame::evalkit
