#pragma once

#include "cgame/model.hpp"
#include "cgame/simkit.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cgame::evalkit {

using numcore::Matrix;

double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
/// 1 - sum|y - y_hat| / sum|y|.
double accuracy(std::span<const double> y, std::span<const double> y_hat);
/// 1 - SS_res / SS_tot.
double r2(std::span<const double> y, std::span<const double> y_hat);
/// 1 - Var(y - y_hat) / Var(y), population variances.
double var_score(std::span<const double> y, std::span<const double> y_hat);

inline constexpr double kHotspotK = 2.0;
inline constexpr double kHotspotTolerance = 0.2;

/// Fraction of hotspot cells (y > mean(y) + k * std(y)) predicted within `tolerance`
/// relative error. Throws UndefinedMetricError when y has no hotspot.
double hotspot_recall(const Matrix& y, const Matrix& y_hat, double k = kHotspotK, double tolerance = kHotspotTolerance);

struct Metrics {
    double rmse = 0.0;
    double mae = 0.0;
    double accuracy = 0.0;
    double r2 = 0.0;
    double var_score = 0.0;
    std::size_t n_samples = 0;
    /// Mean per-item hotspot recall over items that have hotspots; NaN when none do.
    double hotspot_recall = 0.0;
    std::size_t hotspot_items = 0;
};

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat);

enum class Split { Train, Validation, All };
std::vector<std::size_t> split_indices(const simkit::Dataset& dataset, Split split);
Split split_from_string(const std::string& s);
std::string to_string(Split s);

using OdPredictor = std::function<simkit::ODMatrix(const simkit::DatasetItem&)>;

/// Metrics over all OD cells of all items in `split`.
Metrics evaluate(const OdPredictor& predictor, const simkit::Dataset& dataset, Split split = Split::Validation);
Metrics evaluate(const model::CGameModel& model, const simkit::Dataset& dataset, Split split = Split::Validation);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation across seeds, 0 for a single seed
    std::vector<double> per_seed;
};

struct MetricsReport {
    MetricSummary rmse, mae, accuracy, r2, var_score, hotspot_recall;
    std::size_t n_samples = 0;
    std::vector<std::string> labels; // one per seed/model
    std::string split = "validation";
};

MetricSummary summarize(std::span<const double> values);
MetricsReport aggregate(std::span<const Metrics> per_seed, std::vector<std::string> labels = {});

inline constexpr int kReportFormatVersion = 1;
nlohmann::json report_to_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

/// Pixel value mapping v -> round(255 * (v - min) / (max - min)); constant matrices map to 0.
std::vector<std::uint8_t> graymap_pixels(const Matrix& m);

/// Writes `<stem>.csv` (full precision, versioned header) and `<stem>.pgm` (binary 8-bit).
void export_heatmap(const Matrix& m, const std::filesystem::path& stem);
Matrix read_heatmap_csv(const std::filesystem::path& path);

/// Two-column (step, value) CSV with a versioned header.
void export_curve(std::span<const double> series, const std::filesystem::path& path);
void export_curve(std::span<const std::pair<std::size_t, double>> series, const std::filesystem::path& path);

} // namespace cgame::evalkit
