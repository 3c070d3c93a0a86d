#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trmlab/cli.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            out.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    out.push_back(current);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning model-merging lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string strategies_csv;
    std::string variants_csv;
    std::string ratio_grid_csv;
    std::optional<std::uint64_t> seed_override;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
        cmd->add_option("--out", out_dir, "Output directory (overrides config)");
        cmd->add_option("--seed", seed_override, "Run a single seed instead of the config list");
    };

    CLI::App* run = app.add_subcommand("run", "Run the strategy x seed experiment matrix");
    add_common(run);
    run->add_option("--strategies", strategies_csv, "Comma-separated strategy subset");

    CLI::App* ablate = app.add_subcommand("ablate", "Run the constraint ablation table");
    add_common(ablate);
    ablate->add_option("--variants", variants_csv, "Comma-separated variant letters a..h");

    CLI::App* sweep = app.add_subcommand("sweep-ratio", "Sweep the parameter replacement ratio");
    add_common(sweep);
    sweep->add_option("--ratio-grid", ratio_grid_csv, "Comma-separated ratios in [0, 1]");

    CLI::App* diagnose = app.add_subcommand("diagnose", "Probe a pair of checkpoints");
    std::string ckpt_a;
    std::string ckpt_b;
    std::string data_path;
    std::string diag_out = ".";
    std::optional<std::size_t> scan_points;
    bool lambda_max = false;
    std::uint64_t diag_seed = 0;
    diagnose->add_option("checkpoint_a", ckpt_a, "First checkpoint")->required();
    diagnose->add_option("checkpoint_b", ckpt_b, "Second checkpoint")->required();
    diagnose->add_option("data", data_path, "Dataset CSV (task,split,class,feature_*)")->required();
    diagnose->add_option("--out", diag_out, "Output directory");
    diagnose->add_option("--scan", scan_points, "Emit scan.csv/angle.csv with N points");
    diagnose->add_flag("--lambda-max", lambda_max, "Emit hessian.csv");
    diagnose->add_option("--seed", diag_seed, "Power-iteration seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // Help and version exits stay 0; anything else is a config error.
        return code == 0 ? trmlab::kExitOk : trmlab::kExitConfigError;
    }

    trmlab::RunOverrides overrides;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (seed_override) overrides.seed = *seed_override;
    if (!strategies_csv.empty()) overrides.strategies = split_csv(strategies_csv);
    if (!variants_csv.empty()) overrides.variants = split_csv(variants_csv);
    if (!ratio_grid_csv.empty()) {
        std::vector<double> grid;
        for (const std::string& cell : split_csv(ratio_grid_csv)) {
            try {
                grid.push_back(std::stod(cell));
            } catch (const std::exception&) {
                std::cerr << "error: bad --ratio-grid value '" << cell << "'\n";
                return trmlab::kExitConfigError;
            }
        }
        overrides.ratio_grid = grid;
    }

    if (run->parsed()) return trmlab::cmd_run(config_path, overrides);
    if (ablate->parsed()) return trmlab::cmd_ablate(config_path, overrides);
    if (sweep->parsed()) return trmlab::cmd_sweep_ratio(config_path, overrides);
    if (diagnose->parsed()) {
        trmlab::DiagnoseFlags flags;
        flags.scan_points = scan_points;
        flags.lambda_max = lambda_max;
        flags.seed = diag_seed;
        flags.out_dir = diag_out;
        return trmlab::cmd_diagnose(ckpt_a, ckpt_b, data_path, flags);
    }
    return trmlab::kExitConfigError;
}
