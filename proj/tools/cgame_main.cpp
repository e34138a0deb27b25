#include "cgame/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    using namespace cgame;

    CLI::App app{"C-GAME origin-destination estimation: simulate, train, evaluate, export"};
    app.require_subcommand(1);

    std::string config_path = "config.json";
    std::string data_dir;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t item = 0;
    bool ablation = false;
    std::vector<std::string> model_dirs;
    std::string split = "validation";

    auto* init = app.add_subcommand("init-config", "Write the default configuration");
    init->add_option("--out", out, "Config file to write")->default_str("config.json");

    auto* gen = app.add_subcommand("gen", "Simulate a dataset");
    gen->add_option("--config", config_path, "Run configuration (JSON)");
    gen->add_option("--out", out, "Dataset directory (default: paths.data)");
    gen->add_option("--seed", seed, "Override sim.seed");

    auto* train = app.add_subcommand("train", "Train one model per seed");
    train->add_option("--config", config_path, "Run configuration (JSON)");
    train->add_option("--data", data_dir, "Dataset directory (default: paths.data)");
    train->add_option("--out", out, "Output directory (default: paths.out)");
    train->add_option("--seed", seed, "Train a single seed instead of train.seeds");
    train->add_flag("--ablation", ablation, "Freeze the matcher at all-ones (identity gate)");

    auto* eval = app.add_subcommand("eval", "Evaluate trained models on a dataset split");
    eval->add_option("--config", config_path, "Run configuration (JSON), used for default paths");
    eval->add_option("--model", model_dirs, "Model directory (repeatable)")->required();
    eval->add_option("--data", data_dir, "Dataset directory (default: paths.data)");
    eval->add_option("--out", out, "Report path (default: paths.report)");
    eval->add_option("--split", split, "train | validation | all")->check(CLI::IsMember({"train", "validation", "all"}));

    auto* exp = app.add_subcommand("export", "Export true/predicted/|diff| OD heatmaps for one item");
    exp->add_option("--config", config_path, "Run configuration (JSON), used for default paths");
    exp->add_option("--model", model_dirs, "Model directory")->required()->expected(1);
    exp->add_option("--data", data_dir, "Dataset directory (default: paths.data)");
    exp->add_option("--item", item, "Item index")->required();
    exp->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitConfig;
    }

    try {
        if (init->parsed()) {
            cli::cmd_init_config(out.empty() ? "config.json" : out, std::cout);
            return cli::kExitOk;
        }

        const bool config_given = app.get_subcommands().front()->count("--config") > 0;
        cli::RunConfig cfg;
        if (config_given || std::filesystem::exists(config_path)) cfg = cli::load_run_config(config_path);
        if (data_dir.empty()) data_dir = cfg.paths.data;

        if (gen->parsed()) {
            cli::cmd_gen(cfg, out.empty() ? cfg.paths.data : out, seed, std::cout);
        } else if (train->parsed()) {
            cli::cmd_train(cfg, data_dir, out.empty() ? cfg.paths.out : out, ablation, seed, std::cout);
        } else if (eval->parsed()) {
            std::vector<std::filesystem::path> dirs(model_dirs.begin(), model_dirs.end());
            cli::cmd_eval(dirs, data_dir, out.empty() ? cfg.paths.report : out, std::cout,
                          evalkit::split_from_string(split));
        } else if (exp->parsed()) {
            cli::cmd_export(model_dirs.front(), data_dir, item, out, std::cout);
        }
        return cli::kExitOk;
    } catch (...) {
        return cli::exit_code_for_current_exception(std::cerr);
    }
}
