// Acceptance suite: every release criterion with its tolerance pinned in
// code, one pass/fail line per criterion. Exits nonzero if any criterion
// fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "oracles.hpp"
#include "trmlab/trmlab.hpp"

using namespace trmlab;
namespace fs = std::filesystem;

namespace {

struct CheckContext {
    std::ostringstream detail;
    bool ok = true;

    void expect(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << what;
        }
    }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

void gradient_oracle(CheckContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<MlpSpec> specs{{{2, 8, 4}, Activation::relu},
                                     {{4, 16, 16, 5}, Activation::tanh}};
    double worst = 0.0;
    for (const MlpSpec& spec : specs) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            RngState rng{seed, 0};
            const ModelParams m = init_params(spec, rng);
            DenseMatrix x(16, spec.input_dim());
            fill_gaussian(rng, x.data.data(), x.data.size());
            std::vector<std::size_t> y(16);
            for (auto& v : y) v = next_index(rng, spec.output_dim());

            const ParamVec grad = loss_and_grad(m, x, y).second;
            auto loss_at = [&](const ParamVec& theta) {
                return cross_entropy(forward_logits(ModelParams{spec, theta}, x), y);
            };
            for (int probe = 0; probe < 100; ++probe) {
                const std::size_t i = next_index(rng, m.theta.size());
                ParamVec plus = m.theta;
                plus[i] += 1e-5;
                ParamVec minus = m.theta;
                minus[i] -= 1e-5;
                const double fd = (loss_at(plus) - loss_at(minus)) / 2e-5;
                worst = std::max(worst, oracles::relative_error(fd, grad[i]));
            }
        }
    }
    const double secs = seconds_since(t0);
    ctx.expect(worst < 1e-5, "max relative error " + fmt(worst) + " >= 1e-5");
    ctx.expect(secs < 30.0, "runtime " + fmt(secs) + "s >= 30s");
    ctx.detail << (ctx.detail.tellp() > 0 ? "; " : "") << "max rel err " << fmt(worst) << ", "
               << fmt(secs) << "s";
}

// ---------------------------------------------------------------- criterion 2

void subspace_contracts(CheckContext& ctx) {
    for (const std::size_t dim : {std::size_t{10}, std::size_t{1000}, std::size_t{100000}}) {
        RngState rng{dim, 0};
        const std::size_t pairs = 50;
        for (std::size_t p = 0; p < pairs; ++p) {
            SubspaceBasis basis;
            basis.tau_prev = TaskVector{gaussian_vector(rng, dim)};
            basis.tau_cur = TaskVector{gaussian_vector(rng, dim)};
            basis.d = subtract(basis.tau_cur.tau, basis.tau_prev.tau);
            const double d_norm = l2_norm(basis.d);

            const ParamVec perturbation = orthogonal_perturbation(basis.d, rng);
            ctx.expect(std::abs(l2_norm(perturbation) - 1.0) <= 1e-12,
                       "||P|| off unit at dim " + std::to_string(dim));
            ctx.expect(std::abs(dot(perturbation, basis.d)) <= 1e-10 * d_norm,
                       "<P,d> too large at dim " + std::to_string(dim));

            const SubspaceBasis ext = gram_schmidt_extend(basis, 3, rng);
            for (std::size_t i = 0; i < 3; ++i) {
                ctx.expect(std::abs(l2_norm(ext.perturbations[i]) - 1.0) <= 1e-12,
                           "extension norm off unit");
                ctx.expect(std::abs(dot(ext.perturbations[i], basis.tau_cur.tau)) <=
                               1e-10 * l2_norm(basis.tau_cur.tau),
                           "extension not orthogonal to tau_cur");
                ctx.expect(std::abs(dot(ext.perturbations[i], basis.tau_prev.tau)) <=
                               1e-10 * l2_norm(basis.tau_prev.tau),
                           "extension not orthogonal to tau_prev");
                for (std::size_t j = i + 1; j < 3; ++j)
                    ctx.expect(std::abs(dot(ext.perturbations[i], ext.perturbations[j])) <= 1e-10,
                               "extension pair not orthogonal");
            }
            if (!ctx.ok) return;
        }
    }
    ctx.detail << "50 pairs per dim in {10, 1e3, 1e5}";
}

// ---------------------------------------------------------------- criterion 3

void endpoint_exactness(CheckContext& ctx) {
    RngState rng{77, 0};
    const std::size_t dim = 10000;
    const ParamVec init = gaussian_vector(rng, dim);
    ParamVec prev = init;
    ParamVec cur = init;
    for (std::size_t i = 0; i < dim; ++i) {
        prev[i] += 2.0 * next_uniform(rng) - 1.0;
        cur[i] += 2.0 * next_uniform(rng) - 1.0;
    }
    SubspaceBasis basis;
    basis.tau_prev = task_vector(prev, init);
    basis.tau_cur = task_vector(cur, init);
    basis.d = subtract(basis.tau_cur.tau, basis.tau_prev.tau);
    basis.perturbations.push_back(orthogonal_perturbation(basis.d, rng));

    const ParamVec at_cur = merge_point(init, basis, MergeCoefficients{1.0, {0.0}});
    const ParamVec at_prev = merge_point(init, basis, MergeCoefficients{0.0, {0.0}});
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        worst = std::max(worst, std::abs(at_cur[i] - cur[i]));
        worst = std::max(worst, std::abs(at_prev[i] - prev[i]));
    }
    ctx.expect(worst <= 1e-12, "endpoint error " + fmt(worst) + " > 1e-12");
    ctx.detail << "max abs endpoint error " << fmt(worst);
}

// ---------------------------------------------------------------- criterion 4

void layer_weight_values(CheckContext& ctx) {
    const auto w = layer_weights(12, 7);
    const std::vector<double> expected{0.010777, 0.010777, 0.010777, 0.010777,
                                       0.010777, 0.010777, 0.010777, 0.010777,
                                       0.029295, 0.079631, 0.216459, 0.588399};
    for (std::size_t l = 0; l < 12; ++l)
        ctx.expect(std::abs(w[l] - expected[l]) <= 1e-6,
                   "weight " + std::to_string(l + 1) + " off by " +
                       fmt(std::abs(w[l] - expected[l])));
    double sum = 0.0;
    for (double v : w) sum += v;
    ctx.expect(std::abs(sum - 1.0) <= 1e-12, "sum " + fmt(sum) + " not 1");
    for (std::size_t l = 1; l < 12; ++l)
        ctx.expect(w[l] >= w[l - 1], "weights not nondecreasing");
    ctx.detail << "profile (12, 7) matches to 1e-6";
}

// ---------------------------------------------------------------- criterion 5

void argmin_postcondition(CheckContext& ctx) {
    StreamConfig scfg;
    scfg.num_classes = 6;
    scfg.num_tasks = 3;
    scfg.samples_per_class_train = 32;
    scfg.samples_per_class_test = 8;
    scfg.noise_sigma = 0.15;
    scfg.seed = 4;
    const auto stream = generate_stream(scfg);
    const MlpSpec spec{{2, 16, 16, 6}, Activation::tanh};
    TrainConfig train;
    train.epochs = 6;
    train.learning_rate = 0.01;

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngState rng{seed, 0};
        const ModelParams init = init_params(spec, rng);
        TrainConfig t1 = train;
        t1.seed = seed;
        const ModelParams prev = finetune(init, stream[seed % 3], t1).first;
        TrainConfig t2 = train;
        t2.seed = seed + 1000;
        const ModelParams cur = finetune(prev, stream[(seed + 1) % 3], t2).first;

        TrmConfig cfg;
        cfg.seed = seed;
        const MergeOutcome out = trm_search(init, prev, cur, stream[(seed + 1) % 3], cfg);
        const double anchor_min =
            std::min({out.anchor_values[0], out.anchor_values[1], out.anchor_values[2]});
        ctx.expect(out.chosen_loss.total <= anchor_min,
                   "seed " + std::to_string(seed) + ": chosen " + fmt(out.chosen_loss.total) +
                       " > anchor min " + fmt(anchor_min));
    }
    ctx.detail << "20 seeded merges";
}

// ---------------------------------------------------------------- criterion 6

void baseline_oracles(CheckContext& ctx) {
    RngState rng{5150, 0};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 1 + next_index(rng, 64);
        const std::size_t count = 2 + next_index(rng, 3);
        std::vector<TaskVector> taus;
        std::vector<std::vector<double>> raw;
        for (std::size_t t = 0; t < count; ++t) {
            ParamVec v = gaussian_vector(rng, dim);
            for (double& x : v)
                if (std::abs(x) < 0.1) x = 0.0;
            raw.push_back(v);
            taus.push_back(TaskVector{std::move(v)});
        }
        const double keep = 0.05 + 0.95 * next_uniform(rng);
        if (merge_ties(taus, keep).tau != oracles::ties_oracle(raw, keep)) {
            ctx.expect(false, "ties mismatch at trial " + std::to_string(trial));
            return;
        }
        if (merge_magmax(taus).tau != oracles::magmax_oracle(raw)) {
            ctx.expect(false, "magmax mismatch at trial " + std::to_string(trial));
            return;
        }
    }
    ctx.detail << "1000 random vectors, exact equality";
}

// ---------------------------------------------------------------- criterion 7

void spectral_norm(CheckContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();

    // random rotations of planted spectra: analytic gradients, dense oracle
    RngState rng{31337, 0};
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 10;
        std::vector<ParamVec> q;
        for (std::size_t i = 0; i < n; ++i) {
            ParamVec v = gaussian_vector(rng, n);
            for (const ParamVec& prevq : q) axpy(v, -dot(v, prevq), prevq);
            scale_in_place(v, 1.0 / l2_norm(v));
            q.push_back(std::move(v));
        }
        std::vector<double> spectrum{5.0};
        for (std::size_t i = 1; i < n; ++i) spectrum.push_back(4.0 * (next_uniform(rng) - 0.5));
        oracles::SymmetricMatrix m;
        m.n = n;
        m.a.assign(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m.at(i, j) += spectrum[k] * q[k][i] * q[k][j];
        const double expected = oracles::dominant_abs_eigenvalue(m);
        RngState prng{static_cast<std::uint64_t>(trial), 0};
        const double est =
            hessian_lambda_max(oracles::quadratic_objective(m), gaussian_vector(rng, n), 300, prng);
        ctx.expect(std::abs(est - expected) <= 0.01 * std::abs(expected),
                   "quadratic trial " + std::to_string(trial) + ": " + fmt(est) + " vs " +
                       fmt(expected));
    }

    // small trained MLP: assemble the dense Hessian column by column
    StreamConfig scfg;
    scfg.num_classes = 4;
    scfg.num_tasks = 1;
    scfg.samples_per_class_train = 32;
    scfg.samples_per_class_test = 8;
    scfg.noise_sigma = 0.15;
    scfg.seed = 6;
    const auto stream = generate_stream(scfg);
    const MlpSpec spec{{2, 8, 8, 4}, Activation::tanh};  // 132 parameters
    RngState mrng{3, 0};
    TrainConfig train;
    train.epochs = 10;
    train.learning_rate = 0.01;
    const ModelParams model = finetune(init_params(spec, mrng), stream[0], train).first;
    const Objective obj =
        mlp_objective(spec, stream[0].train.features, stream[0].train.labels);

    const std::size_t n = model.theta.size();
    oracles::SymmetricMatrix hess;
    hess.n = n;
    hess.a.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        ParamVec e(n, 0.0);
        e[j] = 1.0;
        const ParamVec column = hvp(obj, model.theta, e);
        for (std::size_t i = 0; i < n; ++i) hess.at(i, j) = column[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double sym = 0.5 * (hess.at(i, j) + hess.at(j, i));
            hess.at(i, j) = sym;
            hess.at(j, i) = sym;
        }
    const double dense = oracles::dominant_abs_eigenvalue(hess);
    RngState prng{11, 0};
    const double power = hessian_lambda_max(obj, model.theta, 300, prng);
    ctx.expect(std::abs(power - dense) <= 0.01 * std::abs(dense),
               "mlp: power " + fmt(power) + " vs dense " + fmt(dense));

    const double secs = seconds_since(t0);
    ctx.expect(secs < 60.0, "runtime " + fmt(secs) + "s >= 60s");
    ctx.detail << (ctx.detail.tellp() > 0 ? "; " : "") << "mlp lambda_max " << fmt(power)
               << " vs dense " << fmt(dense) << ", " << fmt(secs) << "s";
}

// ---------------------------------------------------------------- criterion 8

void taylor_verification(CheckContext& ctx) {
    StreamConfig scfg;
    scfg.num_classes = 4;
    scfg.num_tasks = 1;
    scfg.samples_per_class_train = 48;
    scfg.samples_per_class_test = 8;
    scfg.noise_sigma = 0.15;
    scfg.seed = 8;
    const auto stream = generate_stream(scfg);
    const MlpSpec spec{{2, 16, 16, 4}, Activation::tanh};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngState rng{seed, 0};
        TrainConfig train;
        train.epochs = 15;
        train.learning_rate = 0.01;
        train.seed = seed;
        const ModelParams model = finetune(init_params(spec, rng), stream[0], train).first;
        const Objective obj =
            mlp_objective(spec, stream[0].train.features, stream[0].train.labels);
        const TaylorCheck check = taylor_check(obj, model.theta, 1e-4);
        ctx.expect(check.ratio >= 0.95 && check.ratio <= 1.05,
                   "seed " + std::to_string(seed) + ": ratio " + fmt(check.ratio));
    }
    ctx.detail << "10 converged models at eta = 1e-4";
}

// -------------------------------------------------------- criteria 9 and 10

struct PhenomenonResult {
    double seq_acc = 0.0, seq_forget = 0.0;
    double avg_acc = 0.0;
    double trm_acc = 0.0, trm_forget = 0.0;
    std::vector<double> ablation_mean;  // per variant a..h
    double wall_seconds = 0.0;
};

PhenomenonResult run_phenomenon() {
    const auto t0 = std::chrono::steady_clock::now();
    const StreamConfig scfg;  // default 5-task, 10-class Gaussian stream
    const auto stream = generate_stream(scfg);
    const MlpSpec spec{{2, 64, 64, 10}, Activation::tanh};
    const TrainConfig train;
    const TrmConfig trm;
    const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

    PhenomenonResult out;
    const std::vector<Strategy> strategies{Strategy::seq_finetune, Strategy::average,
                                           Strategy::trm};
    std::vector<CLReport> reports(strategies.size() * seeds.size());
    parallel_for(reports.size(), [&](std::size_t i) {
        reports[i] = run_cl_experiment(stream, strategies[i / seeds.size()], spec, train, trm,
                                       seeds[i % seeds.size()]);
    });
    auto mean_over = [&](std::size_t strat, bool forget) {
        double sum = 0.0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const CLReport& r = reports[strat * seeds.size() + s];
            sum += forget ? r.avg_forgetting.value_or(0.0) : r.last_accuracy;
        }
        return sum / static_cast<double>(seeds.size());
    };
    out.seq_acc = mean_over(0, false);
    out.seq_forget = mean_over(0, true);
    out.avg_acc = mean_over(1, false);
    out.trm_acc = mean_over(2, false);
    out.trm_forget = mean_over(2, true);

    const auto rows = ablation_suite(stream, all_ablation_variants(), spec, train, trm, seeds);
    out.ablation_mean.assign(8, 0.0);
    for (std::size_t v = 0; v < 8; ++v) {
        for (std::size_t s = 0; s < seeds.size(); ++s)
            out.ablation_mean[v] += rows[v * seeds.size() + s].last_accuracy;
        out.ablation_mean[v] /= static_cast<double>(seeds.size());
    }
    out.wall_seconds = seconds_since(t0);
    return out;
}

void phenomenon_criteria(CheckContext& ctx, const PhenomenonResult& r) {
    ctx.expect(r.seq_forget >= 0.10, "seq forgetting " + fmt(r.seq_forget) + " < 0.10");
    ctx.expect(r.trm_acc >= r.seq_acc + 0.05,
               "trm " + fmt(r.trm_acc) + " < seq " + fmt(r.seq_acc) + " + 0.05");
    ctx.expect(r.trm_acc >= r.avg_acc, "trm " + fmt(r.trm_acc) + " < avg " + fmt(r.avg_acc));
    ctx.expect(r.trm_forget <= r.seq_forget,
               "trm forgetting " + fmt(r.trm_forget) + " > seq " + fmt(r.seq_forget));
    ctx.expect(r.wall_seconds < 900.0, "runtime " + fmt(r.wall_seconds) + "s >= 15 min");
    ctx.detail << "seq " << fmt(r.seq_acc) << "/" << fmt(r.seq_forget) << ", avg "
               << fmt(r.avg_acc) << ", trm " << fmt(r.trm_acc) << "/" << fmt(r.trm_forget)
               << ", " << fmt(r.wall_seconds) << "s";
}

void ablation_criteria(CheckContext& ctx, const PhenomenonResult& r) {
    ctx.expect(r.ablation_mean.size() == 8, "expected 8 variants");
    const double full = r.ablation_mean[7];
    // single-constraint variants sit at indices 1..3 (align, pre, res)
    const char* names[] = {"align-only", "pre-only", "res-only"};
    for (std::size_t v = 1; v <= 3; ++v)
        ctx.expect(full >= r.ablation_mean[v],
                   std::string("full ") + fmt(full) + " < " + names[v - 1] + " " +
                       fmt(r.ablation_mean[v]));
    ctx.detail << "full " << fmt(full) << " vs singles " << fmt(r.ablation_mean[1]) << "/"
               << fmt(r.ablation_mean[2]) << "/" << fmt(r.ablation_mean[3]);
}

// --------------------------------------------------------------- criterion 11

void cli_determinism(CheckContext& ctx) {
    const fs::path dir = fs::temp_directory_path() / "trmlab_acceptance_run";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string config = R"({
  "schema_version": 1,
  "stream": {"num_classes": 10, "num_tasks": 5, "samples_per_class_train": 32,
             "samples_per_class_test": 16, "seed": 1},
  "train": {"epochs": 8, "seed": 2},
  "trm": {"seed": 3},
  "model": {"hidden": [32, 32], "activation": "tanh"},
  "strategies": ["average", "trm"],
  "seeds": [0, 1],
  "output_dir": ")" + (dir / "a").string() + R"("
})";
    const fs::path config_path = dir / "config.json";
    {
        std::ofstream out(config_path);
        out << config;
    }
    RunOverrides second;
    second.out_dir = (dir / "b").string();
    const int rc1 = cmd_run(config_path, {});
    const int rc2 = cmd_run(config_path, second);
    ctx.expect(rc1 == 0 && rc2 == 0, "cmd_run exit codes " + std::to_string(rc1) + "/" +
                                         std::to_string(rc2));
    if (rc1 == 0 && rc2 == 0) {
        const std::string results_a = read_file(dir / "a" / "results.csv");
        const std::string results_b = read_file(dir / "b" / "results.csv");
        const std::string summary_a = read_file(dir / "a" / "summary.json");
        const std::string summary_b = read_file(dir / "b" / "summary.json");
        ctx.expect(results_a == results_b, "results.csv differ");
        ctx.expect(summary_a == summary_b, "summary.json differ");
        ctx.detail << "results.csv " << results_a.size() << " bytes, summary.json "
                   << summary_a.size() << " bytes, byte-identical";
    }
    fs::remove_all(dir);
}

// --------------------------------------------------------------- criterion 12

void storage_contract(CheckContext& ctx) {
    using SearchFn = decltype(&trm_search);
    static_assert(std::is_invocable_r_v<MergeOutcome, SearchFn, const ModelParams&,
                                        const ModelParams&, const ModelParams&,
                                        const TaskDataset&, const TrmConfig&>);
    static_assert(!std::is_invocable_v<SearchFn, const std::vector<ModelParams>&,
                                       const TaskDataset&, const TrmConfig&>);
    using MergeFn = decltype(&detail::merge_stage);
    static_assert(!std::is_invocable_v<MergeFn, Strategy, const std::vector<ModelParams>&,
                                       const TaskDataset&, const TrmConfig&, StageSummary&>);
    using RunFn = decltype(&run_cl_experiment);
    static_assert(!std::is_invocable_v<RunFn, const std::vector<TaskDataset>&, Strategy,
                                       const MlpSpec&, const TrainConfig&, const TrmConfig&,
                                       const std::vector<ModelParams>&>);
    ctx.detail << "merge and search interfaces admit exactly {theta_init, theta_prev, "
                  "theta_cur_ft}; compile-time checked";
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    int failures = 0;
    std::size_t index = 0;

    auto run = [&](const char* name, const std::function<void(CheckContext&)>& fn) {
        ++index;
        CheckContext ctx;
        try {
            fn(ctx);
        } catch (const std::exception& e) {
            ctx.expect(false, std::string("exception: ") + e.what());
        }
        std::printf("[%s] criterion %2zu: %s (%s)\n", ctx.ok ? "PASS" : "FAIL", index, name,
                    ctx.detail.str().c_str());
        std::fflush(stdout);
        if (!ctx.ok) ++failures;
    };

    run("gradient oracle vs central finite differences", gradient_oracle);
    run("subspace contracts across dimensions", subspace_contracts);
    run("merge endpoint exactness at crossover ratio 0", endpoint_exactness);
    run("progressive layer-weight profile", layer_weight_values);
    run("coefficient-search argmin postcondition", argmin_postcondition);
    run("TIES and MagMax against brute-force oracles", baseline_oracles);
    run("Hessian spectral norm vs dense eigensolver", spectral_norm);
    run("first-order decrease verification", taylor_verification);

    const PhenomenonResult phenomenon = run_phenomenon();
    run("continual-learning phenomenon reproduction",
        [&](CheckContext& ctx) { phenomenon_criteria(ctx, phenomenon); });
    run("constraint ablation ordering",
        [&](CheckContext& ctx) { ablation_criteria(ctx, phenomenon); });
    run("byte-identical experiment outputs", cli_determinism);
    run("storage contract by interface shape", storage_contract);

    std::printf("%d of %zu criteria failed; total %.1fs\n", failures, index,
                seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
