#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trmlab/datastream.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/merging.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/parallel.hpp"
#include "trmlab/trainer.hpp"

namespace trmlab {

// Lower-triangular accuracy grid: entry (stage, task), 0-based, is the
// accuracy on task's test split after training stage `stage`, defined only
// for task <= stage.
struct AccuracyMatrix {
    std::vector<std::vector<double>> rows;

    void push_stage(std::vector<double> accs) {
        if (accs.size() != rows.size() + 1)
            throw ContractViolation("AccuracyMatrix: stage row must cover tasks 0..stage");
        rows.push_back(std::move(accs));
    }

    double at(std::size_t stage, std::size_t task) const {
        if (stage >= rows.size() || task > stage)
            throw ContractViolation("AccuracyMatrix: access above the diagonal");
        return rows[stage][task];
    }

    std::size_t num_stages() const { return rows.size(); }
};

inline double accuracy(const ModelParams& m, const LabeledSet& testset) {
    if (testset.size() == 0) throw ContractViolation("accuracy: empty test set");
    const auto preds = predict(m, testset.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == testset.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

// Mean over tasks 0..T-2 of (peak accuracy from its own stage onward) minus
// (accuracy after the final stage). The last task is excluded; its drop is
// structurally zero.
inline double average_forgetting(const AccuracyMatrix& mat) {
    const std::size_t T = mat.num_stages();
    if (T < 2) throw ContractViolation("average_forgetting: need at least two stages");
    double sum = 0.0;
    for (std::size_t task = 0; task + 1 < T; ++task) {
        double peak = mat.at(task, task);
        for (std::size_t stage = task; stage < T; ++stage)
            peak = std::max(peak, mat.at(stage, task));
        sum += peak - mat.at(T - 1, task);
    }
    return sum / static_cast<double>(T - 1);
}

enum class Strategy { seq_finetune, average, ties, magmax, trm };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::seq_finetune: return "seq_finetune";
        case Strategy::average: return "average";
        case Strategy::ties: return "ties";
        case Strategy::magmax: return "magmax";
        case Strategy::trm: return "trm";
    }
    throw ContractViolation("strategy_name: unknown strategy");
}

inline Strategy parse_strategy(const std::string& name) {
    if (name == "seq_finetune") return Strategy::seq_finetune;
    if (name == "average") return Strategy::average;
    if (name == "ties") return Strategy::ties;
    if (name == "magmax") return Strategy::magmax;
    if (name == "trm") return Strategy::trm;
    throw ContractViolation("parse_strategy: unknown strategy '" + name + "'");
}

// Trim fraction used when the TIES rule merges the two per-stage task vectors.
inline constexpr double kTiesKeepFraction = 0.2;

struct StageSummary {
    std::size_t stage = 0;  // 0-based
    bool merged = false;
    MergeCoefficients coefficients;               // TRM only
    std::array<double, 3> anchor_values{};        // TRM only
    std::vector<ObjectivePoint> objective_trace;  // TRM only
    double train_final_loss = 0.0;
    double wall_seconds = 0.0;  // informational; excluded from serialized outputs
};

// Per-stage sink for persisting the consolidated model; receives only the
// current merged model, never a history.
using StageObserver = std::function<void(const ModelParams& merged, const StageSummary&)>;

struct CLReport {
    Strategy strategy = Strategy::seq_finetune;
    AccuracyMatrix matrix;
    double last_accuracy = 0.0;
    std::optional<double> avg_forgetting;  // absent when the stream has one task
    std::vector<StageSummary> stages;
};

namespace detail {

// Single-stage consolidation. The signature is the storage contract: exactly
// the initial, previous-merged, and current-finetuned models plus the current
// task are admissible inputs — no history of models exists to pass.
inline ModelParams merge_stage(Strategy strategy, const ModelParams& init,
                               const ModelParams& prev, const ModelParams& cur_ft,
                               const TaskDataset& task, const TrmConfig& trm_cfg,
                               StageSummary& summary) {
    switch (strategy) {
        case Strategy::seq_finetune:
            return cur_ft;
        case Strategy::average:
            return ModelParams{init.spec, merge_average(prev.theta, cur_ft.theta)};
        case Strategy::ties: {
            const std::vector<TaskVector> taus{task_vector(prev.theta, init.theta),
                                               task_vector(cur_ft.theta, init.theta)};
            ParamVec theta = init.theta;
            axpy(theta, 1.0, merge_ties(taus, kTiesKeepFraction).tau);
            return ModelParams{init.spec, std::move(theta)};
        }
        case Strategy::magmax: {
            const std::vector<TaskVector> taus{task_vector(prev.theta, init.theta),
                                               task_vector(cur_ft.theta, init.theta)};
            ParamVec theta = init.theta;
            axpy(theta, 1.0, merge_magmax(taus).tau);
            return ModelParams{init.spec, std::move(theta)};
        }
        case Strategy::trm: {
            MergeOutcome outcome = trm_search(init, prev, cur_ft, task, trm_cfg);
            summary.merged = true;
            summary.coefficients = outcome.coefficients;
            summary.anchor_values = outcome.anchor_values;
            summary.objective_trace = std::move(outcome.objective_trace);
            return ModelParams{init.spec, std::move(outcome.theta_merged)};
        }
    }
    throw ContractViolation("merge_stage: unknown strategy");
}

}  // namespace detail

// Sequential class-incremental protocol. Stage 1 keeps the plain finetune
// (two task vectors are needed before any merge); stage t >= 2 finetunes from
// the previous merged model and consolidates. At every instant the loop holds
// exactly three parameter vectors: theta_init, the previous merged model, and
// the current finetuned model. The run seed fans out into stage-local train
// and search seeds through derive_seed, so distinct seeds decorrelate every
// source of randomness.
inline CLReport run_cl_experiment(const std::vector<TaskDataset>& stream, Strategy strategy,
                                  const MlpSpec& spec, const TrainConfig& train_cfg,
                                  const TrmConfig& trm_cfg, std::uint64_t seed,
                                  const StageObserver& observer = {}) {
    if (stream.empty()) throw ContractViolation("run_cl_experiment: empty stream");
    train_cfg.validate();
    trm_cfg.validate();

    CLReport report;
    report.strategy = strategy;

    RngState init_rng{derive_seed(seed, 0), 0};
    const ModelParams theta_init = init_params(spec, init_rng);
    ModelParams prev = theta_init;

    const std::uint64_t train_base = derive_seed(train_cfg.seed, seed * 2 + 1);
    const std::uint64_t trm_base = derive_seed(trm_cfg.seed, seed * 2 + 2);

    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto stage_start = std::chrono::steady_clock::now();
        StageSummary summary;
        summary.stage = t;

        TrainConfig stage_train = train_cfg;
        stage_train.seed = train_base + t;
        auto [cur_ft, train_report] = finetune(prev, stream[t], stage_train);
        summary.train_final_loss = train_report.epoch_loss.empty() ? 0.0 : train_report.epoch_loss.back();

        if (t == 0) {
            prev = std::move(cur_ft);
        } else {
            TrmConfig stage_trm = trm_cfg;
            stage_trm.seed = trm_base + t;
            prev = detail::merge_stage(strategy, theta_init, prev, cur_ft, stream[t], stage_trm,
                                       summary);
        }

        std::vector<double> accs;
        accs.reserve(t + 1);
        for (std::size_t i = 0; i <= t; ++i) accs.push_back(accuracy(prev, stream[i].test));
        report.matrix.push_stage(std::move(accs));

        summary.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - stage_start).count();
        if (observer) observer(prev, summary);
        report.stages.push_back(std::move(summary));
    }

    report.last_accuracy = accuracy(prev, joint_testset(stream, stream.size()));
    if (stream.size() >= 2) report.avg_forgetting = average_forgetting(report.matrix);
    return report;
}

// One row of the constraint-ablation table.
struct AblationVariant {
    bool align = false;
    bool pre = false;
    bool res = false;
};

inline std::vector<AblationVariant> all_ablation_variants() {
    // Same ordering as the rows of the constraint ablation: baseline, the
    // three single constraints, the three pairs, then the full objective.
    return {{false, false, false}, {true, false, false}, {false, true, false},
            {false, false, true},  {true, true, false},  {true, false, true},
            {false, true, true},   {true, true, true}};
}

struct AblationRow {
    AblationVariant variant;
    std::uint64_t seed = 0;
    double last_accuracy = 0.0;
    double avg_forgetting = 0.0;
};

// Runs the TRM pipeline once per (variant, seed) with disabled terms zeroed
// out of the search objective. The all-off row degenerates to the crossover
// midpoint merge. Rows come back in (variant, seed) order regardless of the
// worker pool's scheduling.
inline std::vector<AblationRow> ablation_suite(const std::vector<TaskDataset>& stream,
                                               const std::vector<AblationVariant>& variants,
                                               const MlpSpec& spec, const TrainConfig& train_cfg,
                                               const TrmConfig& trm_cfg,
                                               const std::vector<std::uint64_t>& seeds) {
    if (variants.empty()) throw ContractViolation("ablation_suite: no variants requested");
    if (seeds.empty()) throw ContractViolation("ablation_suite: no seeds requested");
    std::vector<AblationRow> rows(variants.size() * seeds.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        const AblationVariant& v = variants[i / seeds.size()];
        const std::uint64_t seed = seeds[i % seeds.size()];
        TrmConfig cfg = trm_cfg;
        cfg.align_enabled = v.align;
        cfg.lambda1 = v.pre ? trm_cfg.lambda1 : 0.0;
        cfg.lambda2 = v.res ? trm_cfg.lambda2 : 0.0;
        const CLReport report = run_cl_experiment(stream, Strategy::trm, spec, train_cfg, cfg, seed);
        rows[i] = {v, seed, report.last_accuracy, report.avg_forgetting.value_or(0.0)};
    });
    return rows;
}

}  // namespace trmlab
