#pragma once

#include "cgame/evalkit.hpp"
#include "cgame/model.hpp"
#include "cgame/simkit.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cgame::cli {

struct ModelSection {
    std::size_t n_f = 256;
    std::size_t n_h = 512;
    model::MatcherHyper matcher;
    friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct TrainSection {
    model::TrainConfig base; // seed and matcher are filled per run
    std::vector<std::uint64_t> seeds{0, 1, 2};
    friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

struct PathsSection {
    std::string data = "data";
    std::string out = "runs";
    std::string report = "report.json";
    friend bool operator==(const PathsSection&, const PathsSection&) = default;
};

/// Complete experiment configuration; defaults reproduce the reference 6x6 grid setup.
struct RunConfig {
    simkit::DatasetConfig dataset;
    ModelSection model;
    TrainSection train;
    PathsSection paths;

    void validate() const;
    /// Training configuration for one seed.
    model::TrainConfig train_config(std::uint64_t seed) const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Strict parse: unknown fields and invalid values raise ConfigError naming the field path.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

void cmd_init_config(const std::filesystem::path& path, std::ostream& log);

struct GenSummary {
    std::size_t n_items = 0;
    std::size_t n_l = 0, n_t = 0, n_p = 0;
    std::string sha256;
};
GenSummary cmd_gen(const RunConfig& config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
                   std::ostream& log);

/// Trains one model per seed into `out_dir/seed_<s>/` (model.json, model.bin, loss_curve.csv,
/// validation_curve.csv). Returns the model directories.
std::vector<std::filesystem::path> cmd_train(const RunConfig& config, const std::filesystem::path& data_dir,
                                             const std::filesystem::path& out_dir, bool ablation,
                                             std::optional<std::uint64_t> seed, std::ostream& log);

evalkit::MetricsReport cmd_eval(const std::vector<std::filesystem::path>& model_dirs,
                                const std::filesystem::path& data_dir, const std::filesystem::path& report_path,
                                std::ostream& log, evalkit::Split split = evalkit::Split::Validation);

/// Writes od_true, od_pred and od_absdiff heatmaps (CSV + PGM each) into `out_dir`.
void export_od_comparison(const numcore::Matrix& truth, const numcore::Matrix& predicted,
                          const std::filesystem::path& out_dir);
void cmd_export(const std::filesystem::path& model_dir, const std::filesystem::path& data_dir, std::size_t item_index,
                const std::filesystem::path& out_dir, std::ostream& log);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Maps the active exception to an exit code and prints it to `err`. Call from a catch block.
int exit_code_for_current_exception(std::ostream& err);

} // namespace cgame::cli
