#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "trmlab/datastream.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/matrix.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/rng.hpp"
#include "trmlab/vecops.hpp"

namespace trmlab {

// Parameter-space displacement from the initial model.
struct TaskVector {
    ParamVec tau;
};

inline TaskVector task_vector(const ParamVec& theta, const ParamVec& theta_init) {
    return TaskVector{subtract(theta, theta_init)};
}

// Search space for one merge: the two task vectors, their difference d, and
// unit perturbations orthogonal to d (pairwise orthogonal when several).
struct SubspaceBasis {
    TaskVector tau_prev;
    TaskVector tau_cur;
    ParamVec d;
    std::vector<ParamVec> perturbations;
};

struct TrmConfig {
    double lambda1 = 0.1;
    double lambda2 = 0.01;
    std::size_t layer_pivot = 0;  // 0 = derive as max(1, L - 5)
    double crossover_ratio = 0.6;
    std::size_t merge_epochs = 5;
    double coeff_lr = 0.05;
    double beta_max = 0.05;  // |beta| bound as a fraction of ||d||
    std::size_t merge_batch_size = 256;
    std::size_t num_perturbations = 1;
    bool clamp_alpha = true;
    bool span_orthogonal = false;  // orthogonalize against both task vectors, not just d
    bool align_enabled = true;     // ablation mask for the alignment term
    std::uint64_t seed = 0;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw ContractViolation("TrmConfig: lambdas must be >= 0");
        if (merge_epochs < 1) throw ContractViolation("TrmConfig: merge_epochs must be >= 1");
        if (crossover_ratio < 0.0 || crossover_ratio > 1.0)
            throw ContractViolation("TrmConfig: crossover_ratio must lie in [0, 1]");
        if (!(coeff_lr > 0.0)) throw ContractViolation("TrmConfig: coeff_lr must be > 0");
        if (beta_max < 0.0) throw ContractViolation("TrmConfig: beta_max must be >= 0");
        if (merge_batch_size == 0)
            throw ContractViolation("TrmConfig: merge_batch_size must be >= 1");
    }
};

inline std::size_t resolved_pivot(const TrmConfig& cfg, std::size_t num_layers) {
    const std::size_t pivot =
        cfg.layer_pivot == 0 ? (num_layers > 5 ? num_layers - 5 : 1) : cfg.layer_pivot;
    if (pivot < 1 || pivot > num_layers)
        throw ContractViolation("TrmConfig: layer_pivot out of range");
    return pivot;
}

struct MergeCoefficients {
    double alpha = 0.5;
    std::vector<double> betas;  // one per perturbation
};

struct LossComponents {
    double align = 0.0;
    double pre = 0.0;
    double res = 0.0;
    double total = 0.0;
};

struct ObjectivePoint {
    double alpha = 0.0;
    std::vector<double> betas;
    LossComponents loss;
};

struct MergeOutcome {
    ParamVec theta_merged;
    MergeCoefficients coefficients;
    LossComponents chosen_loss;  // L_total of theta_merged on the fixed batch
    std::vector<ObjectivePoint> objective_trace;
    // L_total at coefficient anchors (0,0), (1,0), (0.5,0) on the fixed batch.
    std::array<double, 3> anchor_values{0.0, 0.0, 0.0};
    std::uint64_t base_point_seed = 0;
};

// alpha * tau_cur + (1 - alpha) * tau_prev, in task-vector space.
inline ParamVec merge_1d(const SubspaceBasis& basis, double alpha) {
    check_same_length(basis.tau_cur.tau, basis.tau_prev.tau, "merge_1d: length mismatch");
    ParamVec out(basis.tau_cur.tau.size());
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = alpha * basis.tau_cur.tau[i] + keep * basis.tau_prev.tau[i];
    return out;
}

// Unit residual of r after removing its component along d; nullopt when the
// residual is numerically degenerate and the caller should resample.
inline std::optional<ParamVec> orthogonal_unit_residual(const ParamVec& r, const ParamVec& d) {
    check_same_length(r, d, "orthogonal_unit_residual: length mismatch");
    const double dd = l2_norm_squared(d);
    if (dd == 0.0) throw DegenerateDirection("orthogonal_unit_residual: zero direction");
    ParamVec resid = r;
    axpy(resid, -dot(r, d) / dd, d);
    const double norm = l2_norm(resid);
    if (norm <= 1e-12 * std::max(1.0, l2_norm(r))) return std::nullopt;
    scale_in_place(resid, 1.0 / norm);
    return resid;
}

// P = Normalize(r - (<r,d>/||d||^2) d) with r drawn standard normal;
// resamples r on a degenerate residual.
inline ParamVec orthogonal_perturbation(const ParamVec& d, RngState& rng) {
    if (d.size() < 2)
        throw InsufficientDimension("orthogonal_perturbation: need dimension >= 2");
    if (l2_norm_squared(d) == 0.0)
        throw DegenerateDirection("orthogonal_perturbation: zero direction");
    for (int attempt = 0; attempt < 64; ++attempt) {
        const ParamVec r = gaussian_vector(rng, d.size());
        if (auto p = orthogonal_unit_residual(r, d)) return std::move(*p);
    }
    throw NumericFailure("orthogonal_perturbation: resampling kept degenerating");
}

namespace detail {

// Gaussian direction with an orthonormal set projected out (two passes),
// normalized; resamples while the residual is degenerate.
inline ParamVec sample_unit_orthogonal(const std::vector<ParamVec>& ortho, std::size_t n,
                                       RngState& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        ParamVec r = gaussian_vector(rng, n);
        const double r_norm = l2_norm(r);
        for (int pass = 0; pass < 2; ++pass)
            for (const ParamVec& q : ortho) axpy(r, -dot(r, q), q);
        const double resid = l2_norm(r);
        if (resid > 1e-12 * std::max(1.0, r_norm)) {
            scale_in_place(r, 1.0 / resid);
            return r;
        }
    }
    throw NumericFailure("sample_unit_orthogonal: resampling kept degenerating");
}

inline void append_normalized_if_independent(std::vector<ParamVec>& ortho, ParamVec v) {
    const double scale = l2_norm(v);
    if (scale == 0.0) return;
    for (int pass = 0; pass < 2; ++pass)
        for (const ParamVec& q : ortho) axpy(v, -dot(v, q), q);
    const double resid = l2_norm(v);
    if (resid > 1e-12 * scale) {
        scale_in_place(v, 1.0 / resid);
        ortho.push_back(std::move(v));
    }
}

}  // namespace detail

// k unit perturbations, each orthogonal to both task vectors and to every
// earlier perturbation.
inline SubspaceBasis gram_schmidt_extend(const SubspaceBasis& basis, std::size_t k,
                                         RngState& rng) {
    if (k < 1) throw ContractViolation("gram_schmidt_extend: k must be >= 1");
    const std::size_t n = basis.tau_cur.tau.size();
    if (n < k + 2)
        throw InsufficientDimension("gram_schmidt_extend: parameter dimension below k + 2");

    std::vector<ParamVec> ortho;
    detail::append_normalized_if_independent(ortho, basis.tau_cur.tau);
    detail::append_normalized_if_independent(ortho, basis.tau_prev.tau);

    SubspaceBasis out = basis;
    out.perturbations.clear();
    for (std::size_t i = 0; i < k; ++i) {
        ParamVec p = detail::sample_unit_orthogonal(ortho, n, rng);
        ortho.push_back(p);
        out.perturbations.push_back(std::move(p));
    }
    return out;
}

// Coordinate-wise randomized reference point: with probability 1 - ratio keep
// theta_init[i], otherwise take theta_prev[i] or theta_cur[i] with equal odds.
inline ParamVec crossover_base(const ParamVec& theta_init, const ParamVec& theta_prev,
                               const ParamVec& theta_cur_ft, double ratio, RngState& rng) {
    check_same_length(theta_init, theta_prev, "crossover_base: length mismatch");
    check_same_length(theta_init, theta_cur_ft, "crossover_base: length mismatch");
    if (ratio < 0.0 || ratio > 1.0)
        throw ContractViolation("crossover_base: ratio must lie in [0, 1]");
    ParamVec out(theta_init.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (next_uniform(rng) < ratio)
            out[i] = next_uniform(rng) < 0.5 ? theta_prev[i] : theta_cur_ft[i];
        else
            out[i] = theta_init[i];
    }
    return out;
}

// base + alpha * tau_cur + (1 - alpha) * tau_prev + sum_i beta_i * P_i
inline ParamVec merge_point(const ParamVec& base, const SubspaceBasis& basis,
                            const MergeCoefficients& coeffs) {
    check_same_length(base, basis.tau_cur.tau, "merge_point: length mismatch");
    check_same_length(base, basis.tau_prev.tau, "merge_point: length mismatch");
    if (coeffs.betas.size() != basis.perturbations.size())
        throw ContractViolation("merge_point: beta count differs from perturbation count");
    ParamVec out(base.size());
    const double keep = 1.0 - coeffs.alpha;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = base[i] + coeffs.alpha * basis.tau_cur.tau[i] + keep * basis.tau_prev.tau[i];
    for (std::size_t j = 0; j < coeffs.betas.size(); ++j)
        axpy(out, coeffs.betas[j], basis.perturbations[j]);
    return out;
}

// Progressive layer weighting: w_l = exp(max{1, l - pivot}) normalized over
// l = 1..L. Equal below the pivot, growing geometrically above it.
inline std::vector<double> layer_weights(std::size_t num_layers, std::size_t pivot) {
    if (num_layers < 1) throw ContractViolation("layer_weights: need at least one layer");
    if (pivot < 1 || pivot > num_layers)
        throw ContractViolation("layer_weights: pivot out of range");
    std::vector<double> w(num_layers);
    double sum = 0.0;
    for (std::size_t l = 1; l <= num_layers; ++l) {
        const double arg = std::max<double>(1.0, static_cast<double>(l) - static_cast<double>(pivot));
        w[l - 1] = std::exp(arg);
        sum += w[l - 1];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Fixed data for one merge-phase objective: the evaluation batch plus the
// cached per-layer centroid of the two constituent models on that batch.
struct MergeContext {
    MlpSpec spec;
    DenseMatrix batch_x;
    std::vector<std::size_t> batch_y;
    std::vector<double> weights;
    std::vector<DenseMatrix> centroid;
};

inline MergeContext make_merge_context(const MlpSpec& spec, const ParamVec& theta_cur_ft,
                                       const ParamVec& theta_prev, DenseMatrix batch_x,
                                       std::vector<std::size_t> batch_y,
                                       std::vector<double> weights) {
    MergeContext ctx{spec, std::move(batch_x), std::move(batch_y), std::move(weights), {}};
    const HiddenTrace cur = forward_with_trace(ModelParams{spec, theta_cur_ft}, ctx.batch_x);
    const HiddenTrace prev = forward_with_trace(ModelParams{spec, theta_prev}, ctx.batch_x);
    ctx.centroid.reserve(cur.size());
    for (std::size_t l = 0; l < cur.size(); ++l) {
        DenseMatrix c(cur[l].rows, cur[l].cols);
        for (std::size_t i = 0; i < c.data.size(); ++i)
            c.data[i] = 0.5 * (cur[l].data[i] + prev[l].data[i]);
        ctx.centroid.push_back(std::move(c));
    }
    return ctx;
}

namespace detail {

// Layer-weighted mean squared distance between a trace and a cached centroid.
inline double centroid_gap(const HiddenTrace& trace, const std::vector<DenseMatrix>& centroid,
                           const std::vector<double>& weights) {
    if (trace.size() != centroid.size() || trace.size() != weights.size())
        throw ContractViolation("centroid_gap: layer counts differ");
    double total = 0.0;
    for (std::size_t l = 0; l < trace.size(); ++l) {
        const std::size_t rows = trace[l].rows;
        double layer_sum = 0.0;
        for (std::size_t i = 0; i < trace[l].data.size(); ++i) {
            const double diff = trace[l].data[i] - centroid[l].data[i];
            layer_sum += diff * diff;
        }
        total += weights[l] * layer_sum / static_cast<double>(rows);
    }
    return total;
}

}  // namespace detail

// Mean cross-entropy of the candidate parameters on the batch.
inline double loss_align(const MlpSpec& spec, const ParamVec& theta, const DenseMatrix& x,
                         const std::vector<std::size_t>& labels) {
    return cross_entropy(forward_logits(ModelParams{spec, theta}, x), labels);
}

// Layer-weighted squared distance between the candidate's hidden states and
// the centroid of the two constituent models' hidden states.
inline double loss_pre(const MlpSpec& spec, const ParamVec& theta_mrg,
                       const ParamVec& theta_cur_ft, const ParamVec& theta_prev,
                       const DenseMatrix& x, const std::vector<double>& weights) {
    if (theta_mrg.size() != spec.param_count() || theta_cur_ft.size() != spec.param_count() ||
        theta_prev.size() != spec.param_count())
        throw ContractViolation("loss_pre: parameter lengths differ from spec");
    MergeContext ctx = make_merge_context(spec, theta_cur_ft, theta_prev, x, {}, weights);
    const HiddenTrace trace = forward_with_trace(ModelParams{spec, theta_mrg}, x);
    return detail::centroid_gap(trace, ctx.centroid, weights);
}

// Negative squared gradient norm of the cross-entropy at theta, from one
// reverse pass over the batch.
inline double loss_res(const MlpSpec& spec, const ParamVec& theta, const DenseMatrix& x,
                       const std::vector<std::size_t>& labels) {
    const auto [loss, grad] = loss_and_grad(ModelParams{spec, theta}, x, labels);
    (void)loss;
    return -l2_norm_squared(grad);
}

// L_align + lambda1 * L_pre + lambda2 * L_res on the context batch, one
// forward-with-trace plus one reverse pass. All components are reported even
// when the ablation mask drops the alignment term from the total.
inline LossComponents loss_total(const ParamVec& theta, const MergeContext& ctx,
                                 const TrmConfig& cfg) {
    const ModelParams model{ctx.spec, theta};
    const HiddenTrace trace = forward_with_trace(model, ctx.batch_x);
    LossComponents out;
    out.align = cross_entropy(trace.back(), ctx.batch_y);
    out.pre = detail::centroid_gap(trace, ctx.centroid, ctx.weights);
    const ParamVec grad = backprop_from_trace(model, ctx.batch_x, ctx.batch_y, trace);
    out.res = -l2_norm_squared(grad);
    if (!std::isfinite(out.align)) throw NumericFailure("loss_total: non-finite alignment term");
    if (!std::isfinite(out.pre)) throw NumericFailure("loss_total: non-finite consistency term");
    if (!std::isfinite(out.res)) throw NumericFailure("loss_total: non-finite responsiveness term");
    out.total = (cfg.align_enabled ? out.align : 0.0) + cfg.lambda1 * out.pre + cfg.lambda2 * out.res;
    return out;
}

// Elementwise mean of two parameter vectors.
inline ParamVec merge_average(const ParamVec& theta_prev, const ParamVec& theta_cur_ft) {
    check_same_length(theta_prev, theta_cur_ft, "merge_average: length mismatch");
    ParamVec out(theta_prev.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (theta_prev[i] + theta_cur_ft[i]);
    return out;
}

// Trim / elect sign / disjoint mean. Per vector only the top
// ceil(keep_fraction * n) magnitudes survive (ties broken toward the lower
// index); the elected sign per coordinate is the sign of the summed trimmed
// values, and the output is the mean of surviving entries that agree with it.
inline TaskVector merge_ties(const std::vector<TaskVector>& taus, double keep_fraction) {
    if (taus.empty()) throw ContractViolation("merge_ties: empty task-vector list");
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw ContractViolation("merge_ties: keep_fraction must lie in (0, 1]");
    const std::size_t n = taus.front().tau.size();
    for (const TaskVector& t : taus)
        if (t.tau.size() != n) throw ContractViolation("merge_ties: length mismatch");

    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(n)));
    std::vector<ParamVec> trimmed;
    trimmed.reserve(taus.size());
    std::vector<std::size_t> idx(n);
    for (const TaskVector& t : taus) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(t.tau[a]) > std::abs(t.tau[b]);
        });
        ParamVec kept(n, 0.0);
        for (std::size_t r = 0; r < keep && r < n; ++r) kept[idx[r]] = t.tau[idx[r]];
        trimmed.push_back(std::move(kept));
    }

    TaskVector out{ParamVec(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const ParamVec& t : trimmed) sum += t[i];
        if (sum == 0.0) continue;  // sign tie (or all trimmed) -> 0
        const double sign = sum > 0.0 ? 1.0 : -1.0;
        double acc = 0.0;
        std::size_t count = 0;
        for (const ParamVec& t : trimmed) {
            if (t[i] != 0.0 && ((t[i] > 0.0) == (sign > 0.0))) {
                acc += t[i];
                ++count;
            }
        }
        out.tau[i] = count > 0 ? acc / static_cast<double>(count) : 0.0;
    }
    return out;
}

// Per coordinate the entry of largest magnitude; exact ties go to the later
// task vector.
inline TaskVector merge_magmax(const std::vector<TaskVector>& taus) {
    if (taus.empty()) throw ContractViolation("merge_magmax: empty task-vector list");
    const std::size_t n = taus.front().tau.size();
    for (const TaskVector& t : taus)
        if (t.tau.size() != n) throw ContractViolation("merge_magmax: length mismatch");
    TaskVector out{taus.front().tau};
    for (std::size_t t = 1; t < taus.size(); ++t)
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(taus[t].tau[i]) >= std::abs(out.tau[i])) out.tau[i] = taus[t].tau[i];
    return out;
}

// Coefficient search over the augmented subspace. Draw order from cfg.seed is
// fixed: perturbations, then the crossover base, then the batch subsample.
// Coefficients start at (0.5, 0) and follow projected gradient descent with
// central-difference gradients; the returned point is the argmin of L_total
// over the anchors, the best visited iterate, and the final iterate, all on
// the same fixed batch.
inline MergeOutcome trm_search(const ModelParams& theta_init, const ModelParams& theta_prev,
                               const ModelParams& theta_cur_ft, const TaskDataset& task_data,
                               const TrmConfig& cfg) {
    cfg.validate();
    if (!(theta_init.spec == theta_prev.spec) || !(theta_init.spec == theta_cur_ft.spec))
        throw ContractViolation("trm_search: models must share one spec");
    if (task_data.train.size() == 0) throw ContractViolation("trm_search: empty task data");

    constexpr double kCoeffFdEps = 1e-3;
    const MlpSpec& spec = theta_init.spec;
    RngState rng{cfg.seed, 0};

    SubspaceBasis basis;
    basis.tau_prev = task_vector(theta_prev.theta, theta_init.theta);
    basis.tau_cur = task_vector(theta_cur_ft.theta, theta_init.theta);
    basis.d = subtract(basis.tau_cur.tau, basis.tau_prev.tau);
    const double d_norm = l2_norm(basis.d);

    // d = 0 leaves no lateral direction: fall back to the pure 1-D search.
    if (d_norm > 0.0 && cfg.num_perturbations > 0) {
        if (cfg.span_orthogonal) {
            basis = gram_schmidt_extend(basis, cfg.num_perturbations, rng);
        } else {
            std::vector<ParamVec> ortho{scaled(basis.d, 1.0 / d_norm)};
            basis.perturbations.push_back(orthogonal_perturbation(basis.d, rng));
            ortho.push_back(basis.perturbations.back());
            for (std::size_t i = 1; i < cfg.num_perturbations; ++i) {
                ParamVec p = detail::sample_unit_orthogonal(ortho, basis.d.size(), rng);
                ortho.push_back(p);
                basis.perturbations.push_back(std::move(p));
            }
        }
    }
    const std::size_t k = basis.perturbations.size();

    const ParamVec base = crossover_base(theta_init.theta, theta_prev.theta, theta_cur_ft.theta,
                                         cfg.crossover_ratio, rng);

    // Fixed seed-determined subsample reused for every objective evaluation.
    const std::size_t n_train = task_data.train.size();
    const std::size_t batch_n = std::min(cfg.merge_batch_size, n_train);
    std::vector<std::size_t> pick(n_train);
    std::iota(pick.begin(), pick.end(), 0);
    if (batch_n < n_train) shuffle(rng, pick);
    DenseMatrix batch_x(batch_n, task_data.train.features.cols);
    std::vector<std::size_t> batch_y(batch_n);
    for (std::size_t r = 0; r < batch_n; ++r) {
        std::copy(task_data.train.features.row(pick[r]),
                  task_data.train.features.row(pick[r]) + batch_x.cols, batch_x.row(r));
        batch_y[r] = task_data.train.labels[pick[r]];
    }

    const MergeContext ctx = make_merge_context(
        spec, theta_cur_ft.theta, theta_prev.theta, std::move(batch_x), std::move(batch_y),
        layer_weights(spec.num_layers(), resolved_pivot(cfg, spec.num_layers())));

    auto eval_at = [&](const MergeCoefficients& c) {
        return loss_total(merge_point(base, basis, c), ctx, cfg);
    };

    MergeOutcome outcome;
    outcome.base_point_seed = cfg.seed;

    MergeCoefficients iterate{0.5, ParamVec(k, 0.0)};
    LossComponents iterate_loss = eval_at(iterate);
    outcome.objective_trace.push_back({iterate.alpha, iterate.betas, iterate_loss});

    MergeCoefficients best = iterate;
    LossComponents best_loss = iterate_loss;

    const double beta_bound = cfg.beta_max * d_norm;
    const std::size_t steps_per_epoch = (n_train + cfg.merge_batch_size - 1) / cfg.merge_batch_size;
    for (std::size_t epoch = 0; epoch < cfg.merge_epochs; ++epoch) {
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            MergeCoefficients probe = iterate;
            probe.alpha = iterate.alpha + kCoeffFdEps;
            const double f_alpha_hi = eval_at(probe).total;
            probe.alpha = iterate.alpha - kCoeffFdEps;
            const double f_alpha_lo = eval_at(probe).total;
            const double g_alpha = (f_alpha_hi - f_alpha_lo) / (2.0 * kCoeffFdEps);

            std::vector<double> g_beta(k, 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                probe = iterate;
                probe.betas[j] = iterate.betas[j] + kCoeffFdEps;
                const double hi = eval_at(probe).total;
                probe.betas[j] = iterate.betas[j] - kCoeffFdEps;
                const double lo = eval_at(probe).total;
                g_beta[j] = (hi - lo) / (2.0 * kCoeffFdEps);
            }

            iterate.alpha -= cfg.coeff_lr * g_alpha;
            if (cfg.clamp_alpha) iterate.alpha = std::clamp(iterate.alpha, 0.0, 1.0);
            for (std::size_t j = 0; j < k; ++j) {
                iterate.betas[j] -= cfg.coeff_lr * g_beta[j];
                iterate.betas[j] = std::clamp(iterate.betas[j], -beta_bound, beta_bound);
            }

            iterate_loss = eval_at(iterate);
            outcome.objective_trace.push_back({iterate.alpha, iterate.betas, iterate_loss});
            if (iterate_loss.total < best_loss.total) {
                best = iterate;
                best_loss = iterate_loss;
            }
        }
    }

    // Anchors always evaluated on the same fixed batch.
    const std::array<double, 3> anchor_alphas{0.0, 1.0, 0.5};
    std::array<LossComponents, 3> anchor_loss;
    std::array<MergeCoefficients, 3> anchor_coeffs;
    for (std::size_t a = 0; a < 3; ++a) {
        anchor_coeffs[a] = MergeCoefficients{anchor_alphas[a], ParamVec(k, 0.0)};
        anchor_loss[a] = eval_at(anchor_coeffs[a]);
        outcome.anchor_values[a] = anchor_loss[a].total;
    }

    // Scan with strict less-than: ties keep the earlier candidate, so a flat
    // objective returns the final iterate.
    MergeCoefficients chosen = iterate;
    LossComponents chosen_loss = iterate_loss;
    auto consider = [&](const MergeCoefficients& c, const LossComponents& l) {
        if (l.total < chosen_loss.total) {
            chosen = c;
            chosen_loss = l;
        }
    };
    consider(best, best_loss);
    for (std::size_t a = 0; a < 3; ++a) consider(anchor_coeffs[a], anchor_loss[a]);

    outcome.coefficients = chosen;
    outcome.chosen_loss = chosen_loss;
    outcome.theta_merged = merge_point(base, basis, chosen);
    if (!all_finite(outcome.theta_merged))
        throw NumericFailure("trm_search: non-finite merged parameters");
    return outcome;
}

}  // namespace trmlab
