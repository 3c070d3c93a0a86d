#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trmlab/checkpoint.hpp"
#include "trmlab/datastream.hpp"
#include "trmlab/diagnostics.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/evaluate.hpp"
#include "trmlab/experiment_config.hpp"
#include "trmlab/io.hpp"
#include "trmlab/merging.hpp"
#include "trmlab/parallel.hpp"

namespace trmlab {

// Exit code contract: 0 success, 2 config/contract error, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericError = 3;

struct RunOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;               // replaces the seed list
    std::optional<std::vector<std::string>> strategies;
    std::optional<std::vector<std::string>> variants;    // ablate: subset of a..h
    std::optional<std::vector<double>> ratio_grid;       // sweep-ratio
};

namespace detail {

template <typename Fn>
int guarded_command(Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const NumericFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const UndefinedAngle& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

inline ExperimentConfig load_config_with_overrides(const std::filesystem::path& config_path,
                                                   const RunOverrides& overrides) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (overrides.out_dir) cfg.output_dir = *overrides.out_dir;
    if (overrides.seed) cfg.seeds = {*overrides.seed};
    if (overrides.strategies) {
        cfg.strategies.clear();
        for (const std::string& s : *overrides.strategies)
            cfg.strategies.push_back(parse_strategy(s));
    }
    cfg.validate();
    return cfg;
}

inline std::string merge_record_text(const StageSummary& s) {
    std::ostringstream out;
    out << "alpha: " << format_double(s.coefficients.alpha) << "\n";
    out << "betas:";
    for (double b : s.coefficients.betas) out << ' ' << format_double(b);
    out << "\n";
    out << "anchor_total_alpha0: " << format_double(s.anchor_values[0]) << "\n";
    out << "anchor_total_alpha1: " << format_double(s.anchor_values[1]) << "\n";
    out << "anchor_total_alpha05: " << format_double(s.anchor_values[2]) << "\n";
    out << "trace: index alpha betas.. align pre res total\n";
    for (std::size_t i = 0; i < s.objective_trace.size(); ++i) {
        const ObjectivePoint& p = s.objective_trace[i];
        out << i << ' ' << format_double(p.alpha);
        for (double b : p.betas) out << ' ' << format_double(b);
        out << ' ' << format_double(p.loss.align) << ' ' << format_double(p.loss.pre) << ' '
            << format_double(p.loss.res) << ' ' << format_double(p.loss.total) << "\n";
    }
    return out.str();
}

struct RunResult {
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::seq_finetune;
    CLReport report;
};

// Executes the (seed x strategy) matrix on the worker pool, writing per-stage
// checkpoints as stages complete (writes serialized by one mutex).
inline std::vector<RunResult> execute_run_matrix(const ExperimentConfig& cfg,
                                                 const std::vector<TaskDataset>& stream,
                                                 bool write_checkpoints) {
    const MlpSpec spec = cfg.model_spec();
    const std::size_t jobs = cfg.seeds.size() * cfg.strategies.size();
    std::vector<RunResult> results(jobs);
    std::mutex output_mutex;
    const std::filesystem::path out_root(cfg.output_dir);

    parallel_for(jobs, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i / cfg.strategies.size()];
        const Strategy strategy = cfg.strategies[i % cfg.strategies.size()];
        StageObserver observer;
        if (write_checkpoints) {
            observer = [&, seed, strategy](const ModelParams& merged, const StageSummary& s) {
                const std::filesystem::path dir = out_root / "checkpoints" /
                                                  strategy_name(strategy) /
                                                  ("seed_" + std::to_string(seed));
                std::lock_guard<std::mutex> lock(output_mutex);
                std::filesystem::create_directories(dir);
                save_checkpoint(dir / ("stage_" + std::to_string(s.stage + 1) + ".trm"), merged);
                if (s.merged)
                    write_file_atomic(
                        dir / ("stage_" + std::to_string(s.stage + 1) + ".merge.txt"),
                        merge_record_text(s));
            };
        }
        results[i].seed = seed;
        results[i].strategy = strategy;
        results[i].report =
            run_cl_experiment(stream, strategy, spec, cfg.train, cfg.trm, seed, observer);
    });
    return results;
}

inline std::string results_csv(const std::vector<RunResult>& results) {
    std::ostringstream out;
    out << "seed,strategy,stage,eval_task,accuracy\n";
    for (const RunResult& r : results) {
        for (std::size_t stage = 0; stage < r.report.matrix.num_stages(); ++stage)
            for (std::size_t task = 0; task <= stage; ++task)
                out << r.seed << ',' << strategy_name(r.strategy) << ',' << (stage + 1) << ','
                    << (task + 1) << ',' << format_double(r.report.matrix.at(stage, task))
                    << "\n";
    }
    return out.str();
}

inline std::string summary_json(const ExperimentConfig& cfg,
                                const std::vector<RunResult>& results) {
    nlohmann::json strategies = nlohmann::json::array();
    for (const Strategy strategy : cfg.strategies) {
        nlohmann::json per_seed = nlohmann::json::array();
        double acc_sum = 0.0;
        double forget_sum = 0.0;
        std::size_t forget_count = 0;
        std::size_t count = 0;
        for (const RunResult& r : results) {
            if (r.strategy != strategy) continue;
            nlohmann::json row;
            row["seed"] = r.seed;
            row["last_accuracy"] = r.report.last_accuracy;
            if (r.report.avg_forgetting) {
                row["average_forgetting"] = *r.report.avg_forgetting;
                forget_sum += *r.report.avg_forgetting;
                ++forget_count;
            }
            per_seed.push_back(std::move(row));
            acc_sum += r.report.last_accuracy;
            ++count;
        }
        nlohmann::json entry;
        entry["strategy"] = strategy_name(strategy);
        entry["seeds"] = cfg.seeds;
        entry["mean_last_accuracy"] = count ? acc_sum / static_cast<double>(count) : 0.0;
        if (forget_count)
            entry["mean_average_forgetting"] = forget_sum / static_cast<double>(forget_count);
        entry["per_seed"] = std::move(per_seed);
        strategies.push_back(std::move(entry));
    }
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["strategies"] = std::move(strategies);
    return doc.dump(2) + "\n";
}

// Exactly ten sweep seeds derived from the config's list: truncate or extend
// with consecutive values after the last entry.
inline std::vector<std::uint64_t> sweep_seeds(const ExperimentConfig& cfg) {
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds.size() > 10) seeds.resize(10);
    while (seeds.size() < 10) seeds.push_back(seeds.back() + 1);
    return seeds;
}

inline std::vector<std::size_t> parse_variant_ids(const std::vector<std::string>& names) {
    std::vector<std::size_t> ids;
    for (const std::string& name : names) {
        if (name.size() != 1 || name[0] < 'a' || name[0] > 'h')
            throw ContractViolation("ablate: variant names are letters a..h");
        ids.push_back(static_cast<std::size_t>(name[0] - 'a'));
    }
    return ids;
}

}  // namespace detail

inline int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides) {
    return detail::guarded_command([&] {
        const ExperimentConfig cfg = detail::load_config_with_overrides(config_path, overrides);
        const std::vector<TaskDataset> stream = generate_stream(cfg.stream);
        const auto results = detail::execute_run_matrix(cfg, stream, /*write_checkpoints=*/true);
        const std::filesystem::path out_root(cfg.output_dir);
        write_file_atomic(out_root / "results.csv", detail::results_csv(results));
        write_file_atomic(out_root / "summary.json", detail::summary_json(cfg, results));
        std::ostringstream stream_csv;
        dump_stream_csv(stream_csv, stream, format_double);
        write_file_atomic(out_root / "stream.csv", stream_csv.str());
    });
}

inline int cmd_ablate(const std::filesystem::path& config_path, const RunOverrides& overrides) {
    return detail::guarded_command([&] {
        const ExperimentConfig cfg = detail::load_config_with_overrides(config_path, overrides);
        const std::vector<AblationVariant> all = all_ablation_variants();
        std::vector<AblationVariant> variants;
        std::vector<std::size_t> ids;
        if (overrides.variants) {
            for (std::size_t id : detail::parse_variant_ids(*overrides.variants)) {
                variants.push_back(all[id]);
                ids.push_back(id);
            }
        } else {
            variants = all;
            for (std::size_t id = 0; id < all.size(); ++id) ids.push_back(id);
        }

        const std::vector<TaskDataset> stream = generate_stream(cfg.stream);
        const auto rows =
            ablation_suite(stream, variants, cfg.model_spec(), cfg.train, cfg.trm, cfg.seeds);

        std::ostringstream out;
        out << "variant,align,pre,res,seed,last_accuracy,average_forgetting\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const AblationRow& row = rows[i];
            const char letter = static_cast<char>('a' + ids[i / cfg.seeds.size()]);
            out << letter << ',' << (row.variant.align ? 1 : 0) << ',' << (row.variant.pre ? 1 : 0)
                << ',' << (row.variant.res ? 1 : 0) << ',' << row.seed << ','
                << format_double(row.last_accuracy) << ',' << format_double(row.avg_forgetting)
                << "\n";
        }
        write_file_atomic(std::filesystem::path(cfg.output_dir) / "ablation.csv", out.str());
    });
}

inline int cmd_sweep_ratio(const std::filesystem::path& config_path,
                           const RunOverrides& overrides) {
    return detail::guarded_command([&] {
        const ExperimentConfig cfg = detail::load_config_with_overrides(config_path, overrides);
        std::vector<double> grid =
            overrides.ratio_grid.value_or(std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
        for (double r : grid)
            if (r < 0.0 || r > 1.0)
                throw ContractViolation("sweep-ratio: grid values must lie in [0, 1]");

        const std::vector<std::uint64_t> seeds = detail::sweep_seeds(cfg);
        const std::vector<TaskDataset> stream = generate_stream(cfg.stream);
        const MlpSpec spec = cfg.model_spec();

        struct Cell {
            double ratio = 0.0;
            double accuracy = 0.0;
        };
        std::vector<Cell> cells(grid.size() * seeds.size());
        parallel_for(cells.size(), [&](std::size_t i) {
            const double ratio = grid[i / seeds.size()];
            TrmConfig trm = cfg.trm;
            trm.crossover_ratio = ratio;
            const CLReport report = run_cl_experiment(stream, Strategy::trm, spec, cfg.train, trm,
                                                      seeds[i % seeds.size()]);
            cells[i] = {ratio, report.last_accuracy};
        });

        std::ostringstream out;
        out << "ratio,min_last_accuracy,max_last_accuracy,mean_last_accuracy\n";
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double lo = 1.0, hi = 0.0, sum = 0.0;
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                const double a = cells[g * seeds.size() + s].accuracy;
                lo = std::min(lo, a);
                hi = std::max(hi, a);
                sum += a;
            }
            out << format_double(grid[g]) << ',' << format_double(lo) << ',' << format_double(hi)
                << ',' << format_double(sum / static_cast<double>(seeds.size())) << "\n";
        }
        write_file_atomic(std::filesystem::path(cfg.output_dir) / "sweep_ratio.csv", out.str());
    });
}

struct DiagnoseFlags {
    std::optional<std::size_t> scan_points;
    bool lambda_max = false;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

namespace detail {

// Reads the stream-dump CSV layout: task,split,class,feature_0..feature_{d-1}.
inline LabeledSet load_data_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ContractViolation("data csv: empty file");
    std::size_t feature_cols = 0;
    {
        std::istringstream header(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(header, col, ',')) cols.push_back(col);
        if (cols.size() < 4 || cols[0] != "task" || cols[1] != "split" || cols[2] != "class")
            throw ContractViolation("data csv: expected header task,split,class,feature_*");
        feature_cols = cols.size() - 3;
    }
    std::vector<double> features;
    std::vector<std::size_t> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(row, cell, ',')) {
            if (col == 2) {
                std::size_t label = 0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), label);
                if (res.ec != std::errc{}) throw ContractViolation("data csv: bad class value");
                labels.push_back(label);
            } else if (col >= 3) {
                double v = 0.0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc{}) throw ContractViolation("data csv: bad feature value");
                features.push_back(v);
            }
            ++col;
        }
        if (col != feature_cols + 3) throw ContractViolation("data csv: ragged row");
    }
    if (labels.empty()) throw ContractViolation("data csv: no samples");
    LabeledSet set;
    set.features = DenseMatrix(labels.size(), feature_cols);
    set.features.data = std::move(features);
    set.labels = std::move(labels);
    return set;
}

}  // namespace detail

inline int cmd_diagnose(const std::filesystem::path& checkpoint_a,
                        const std::filesystem::path& checkpoint_b,
                        const std::filesystem::path& data_path, const DiagnoseFlags& flags) {
    return detail::guarded_command([&] {
        const ModelParams a = load_checkpoint(checkpoint_a);
        const ModelParams b = load_checkpoint(checkpoint_b);
        if (!(a.spec == b.spec)) throw ContractViolation("diagnose: checkpoint specs differ");
        const LabeledSet data = detail::load_data_csv(data_path);
        if (data.features.cols != a.spec.input_dim())
            throw ContractViolation("diagnose: data width differs from checkpoint input size");
        for (std::size_t label : data.labels)
            if (label >= a.spec.output_dim())
                throw ContractViolation("diagnose: label outside checkpoint output range");

        const std::filesystem::path out_root(flags.out_dir);
        const Objective obj = mlp_objective(a.spec, data.features, data.labels);

        {
            const DriftProfile drift = layer_drift(a, b, data.features);
            std::ostringstream out;
            out << "layer,delta\n";
            for (std::size_t l = 0; l < drift.per_layer.size(); ++l)
                out << (l + 1) << ',' << format_double(drift.per_layer[l]) << "\n";
            write_file_atomic(out_root / "drift.csv", out.str());
        }

        if (flags.scan_points) {
            const TrajectoryScan scan = loss_interpolation_scan(obj, a.theta, b.theta,
                                                                *flags.scan_points,
                                                                /*with_angles=*/true);
            std::ostringstream scan_out;
            scan_out << "s,loss\n";
            for (std::size_t i = 0; i < scan.fractions.size(); ++i)
                scan_out << format_double(scan.fractions[i]) << ','
                         << format_double(scan.loss[i]) << "\n";
            write_file_atomic(out_root / "scan.csv", scan_out.str());

            std::ostringstream angle_out;
            angle_out << "s,radians\n";
            for (std::size_t i = 0; i < scan.fractions.size(); ++i)
                angle_out << format_double(scan.fractions[i]) << ','
                          << format_double((*scan.angle)[i]) << "\n";
            write_file_atomic(out_root / "angle.csv", angle_out.str());
        }

        if (flags.lambda_max) {
            std::ostringstream out;
            out << "config,lambda_max\n";
            RngState rng_a{flags.seed, 0};
            out << "a," << format_double(hessian_lambda_max(obj, a.theta, rng_a)) << "\n";
            RngState rng_b{flags.seed, 0};
            out << "b," << format_double(hessian_lambda_max(obj, b.theta, rng_b)) << "\n";
            write_file_atomic(out_root / "hessian.csv", out.str());
        }
    });
}

}  // namespace trmlab
