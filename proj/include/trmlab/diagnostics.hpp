#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "trmlab/errors.hpp"
#include "trmlab/matrix.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/rng.hpp"
#include "trmlab/vecops.hpp"

namespace trmlab {

// Differentiable scalar objective over a flat parameter vector. The probes
// below are generic over this so they work on analytic test surfaces as well
// as on model losses.
struct Objective {
    std::function<double(const ParamVec&)> loss;
    std::function<ParamVec(const ParamVec&)> grad;
};

// Mean cross-entropy of an MLP on a fixed batch, packaged as an Objective.
inline Objective mlp_objective(const MlpSpec& spec, const DenseMatrix& x,
                               const std::vector<std::size_t>& labels) {
    return Objective{
        [spec, &x, &labels](const ParamVec& theta) {
            return cross_entropy(forward_logits(ModelParams{spec, theta}, x), labels);
        },
        [spec, &x, &labels](const ParamVec& theta) {
            return loss_and_grad(ModelParams{spec, theta}, x, labels).second;
        }};
}

// Per-layer mean L2 distance between hidden states of two models.
struct DriftProfile {
    std::vector<double> per_layer;  // length L, all >= 0
};

inline DriftProfile layer_drift(const ModelParams& a, const ModelParams& b,
                                const DenseMatrix& x) {
    if (!(a.spec == b.spec)) throw ContractViolation("layer_drift: specs differ");
    if (x.rows == 0) throw ContractViolation("layer_drift: empty dataset");
    const HiddenTrace ta = forward_with_trace(a, x);
    const HiddenTrace tb = forward_with_trace(b, x);
    DriftProfile out;
    out.per_layer.resize(ta.size());
    for (std::size_t l = 0; l < ta.size(); ++l) {
        double sum = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
            double sq = 0.0;
            const double* ra = ta[l].row(r);
            const double* rb = tb[l].row(r);
            for (std::size_t j = 0; j < ta[l].cols; ++j) {
                const double diff = ra[j] - rb[j];
                sq += diff * diff;
            }
            sum += std::sqrt(sq);
        }
        out.per_layer[l] = sum / static_cast<double>(x.rows);
    }
    return out;
}

// Angle in radians between the gradients at theta and theta + delta: the
// arccos of their cosine similarity, evaluated through atan2 on the
// normalized gradients so coincident and antipodal pairs land exactly on 0
// and pi instead of picking up sqrt-of-rounding noise.
inline double grad_angle(const Objective& obj, const ParamVec& theta, const ParamVec& delta) {
    ParamVec g0 = obj.grad(theta);
    ParamVec g1 = obj.grad(add(theta, delta));
    const double n0 = l2_norm(g0);
    const double n1 = l2_norm(g1);
    if (n0 == 0.0 || n1 == 0.0)
        throw UndefinedAngle("grad_angle: vanishing gradient at an endpoint");
    scale_in_place(g0, 1.0 / n0);
    scale_in_place(g1, 1.0 / n1);
    const double diff = l2_norm(subtract(g0, g1));
    const double sum = l2_norm(add(g0, g1));
    return 2.0 * std::atan2(diff, sum);
}

// Loss (and optionally gradient angle relative to the start point) sampled
// along the straight segment from theta_a to theta_b.
struct TrajectoryScan {
    std::vector<double> fractions;  // strictly increasing, 0 and 1 included
    std::vector<double> loss;
    std::optional<std::vector<double>> angle;  // radians vs the gradient at theta_a
};

inline TrajectoryScan loss_interpolation_scan(const Objective& obj, const ParamVec& theta_a,
                                              const ParamVec& theta_b, std::size_t n_points,
                                              bool with_angles = false) {
    if (n_points < 2) throw ContractViolation("loss_interpolation_scan: need n_points >= 2");
    check_same_length(theta_a, theta_b, "loss_interpolation_scan: length mismatch");
    const ParamVec direction = subtract(theta_b, theta_a);

    TrajectoryScan scan;
    if (with_angles) scan.angle.emplace();
    for (std::size_t i = 0; i < n_points; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n_points - 1);
        ParamVec point = theta_a;
        axpy(point, s, direction);
        scan.fractions.push_back(s);
        scan.loss.push_back(obj.loss(point));
        if (with_angles) scan.angle->push_back(grad_angle(obj, theta_a, scaled(direction, s)));
    }
    return scan;
}

// Predicted first-order decrease eta * ||grad||^2 against the realized
// decrease of one gradient step of size eta.
struct TaylorCheck {
    double predicted_decrease = 0.0;
    double actual_decrease = 0.0;
    double ratio = 0.0;  // actual / predicted; 0 when predicted is 0
};

inline TaylorCheck taylor_check(const Objective& obj, const ParamVec& theta, double eta) {
    if (!(eta > 0.0)) throw ContractViolation("taylor_check: eta must be > 0");
    const ParamVec g = obj.grad(theta);
    TaylorCheck out;
    out.predicted_decrease = eta * l2_norm_squared(g);
    ParamVec stepped = theta;
    axpy(stepped, -eta, g);
    out.actual_decrease = obj.loss(theta) - obj.loss(stepped);
    out.ratio = out.predicted_decrease == 0.0 ? 0.0 : out.actual_decrease / out.predicted_decrease;
    return out;
}

// Hessian-vector product by central differences of the gradient along the
// unit direction of v, rescaled by ||v||.
inline ParamVec hvp(const Objective& obj, const ParamVec& theta, const ParamVec& v,
                    double eps = 1e-4) {
    const double v_norm = l2_norm(v);
    if (v_norm == 0.0) throw ContractViolation("hvp: zero direction");
    const ParamVec unit = scaled(v, 1.0 / v_norm);
    ParamVec hi = theta;
    axpy(hi, eps, unit);
    ParamVec lo = theta;
    axpy(lo, -eps, unit);
    ParamVec out = subtract(obj.grad(hi), obj.grad(lo));
    scale_in_place(out, v_norm / (2.0 * eps));
    return out;
}

// Dominant-magnitude eigenvalue estimate by power iteration on the HVP
// operator; returns the Rayleigh quotient after `iters` steps or earlier on a
// 1e-6 relative stall. Near a minimum the dominant magnitude coincides with
// the top eigenvalue.
inline double hessian_lambda_max(const Objective& obj, const ParamVec& theta,
                                 std::size_t iters, RngState& rng, double eps = 1e-4) {
    if (iters < 1) throw ContractViolation("hessian_lambda_max: iters must be >= 1");
    ParamVec v = gaussian_vector(rng, theta.size());
    scale_in_place(v, 1.0 / l2_norm(v));
    double rayleigh = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        ParamVec hv = hvp(obj, theta, v, eps);
        const double next = dot(v, hv);
        const double hv_norm = l2_norm(hv);
        if (hv_norm == 0.0) return 0.0;
        scale_in_place(hv, 1.0 / hv_norm);
        v = std::move(hv);
        if (it > 0 && std::abs(next - rayleigh) <= 1e-6 * std::abs(next)) {
            rayleigh = next;
            break;
        }
        rayleigh = next;
    }
    return rayleigh;
}

inline double hessian_lambda_max(const Objective& obj, const ParamVec& theta, RngState& rng) {
    return hessian_lambda_max(obj, theta, 50, rng);
}

}  // namespace trmlab
