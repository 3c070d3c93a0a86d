#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "trmlab/errors.hpp"
#include "trmlab/matrix.hpp"
#include "trmlab/rng.hpp"
#include "trmlab/vecops.hpp"

namespace trmlab {

enum class Activation { relu, tanh };

// Fully connected classifier: input, hidden..., output sizes. The number of
// affine layers L is layer_sizes.size() - 1; hidden layers share one
// activation, the final layer emits raw logits.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;

    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
        return n;
    }

    void validate() const {
        if (layer_sizes.size() < 2)
            throw ContractViolation("MlpSpec: need at least input and output sizes");
        for (std::size_t s : layer_sizes)
            if (s == 0) throw ContractViolation("MlpSpec: layer sizes must be positive");
    }

    bool operator==(const MlpSpec&) const = default;
};

// Flat parameter layout, fixed bit-exactly: for each affine layer l in order,
// the weight matrix W_l (n_in x n_out, row-major) followed by the bias b_l
// (n_out). Total length is spec.param_count().
struct ModelParams {
    MlpSpec spec;
    ParamVec theta;
};

// Post-activation outputs h^1..h^L for a batch; the final entry is the raw
// logits of the output layer.
using HiddenTrace = std::vector<DenseMatrix>;

namespace detail {

inline std::size_t layer_offset(const MlpSpec& spec, std::size_t layer) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
        off += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
    return off;
}

inline double activate(Activation a, double x) {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the post-activation value h = act(z).
inline double activate_grad(Activation a, double h) {
    return a == Activation::relu ? (h > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

}  // namespace detail

// Weights drawn from N(0, 1/n_in) per layer in layout order; biases zero.
inline ModelParams init_params(const MlpSpec& spec, RngState& rng) {
    spec.validate();
    ParamVec theta(spec.param_count(), 0.0);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(n_in));
        fill_gaussian(rng, theta.data() + off, n_in * n_out);
        for (std::size_t i = 0; i < n_in * n_out; ++i) theta[off + i] *= std_dev;
        off += n_in * n_out + n_out;  // biases stay zero
    }
    return ModelParams{spec, std::move(theta)};
}

// Per-layer (weights, biases) copies of a flat parameter vector.
inline std::vector<std::pair<DenseMatrix, std::vector<double>>> unflatten_params(
    const MlpSpec& spec, const ParamVec& theta) {
    if (theta.size() != spec.param_count())
        throw ContractViolation("unflatten_params: length differs from spec layout");
    std::vector<std::pair<DenseMatrix, std::vector<double>>> layers;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        DenseMatrix w(n_in, n_out);
        std::copy(theta.begin() + off, theta.begin() + off + n_in * n_out, w.data.begin());
        off += n_in * n_out;
        std::vector<double> b(theta.begin() + off, theta.begin() + off + n_out);
        off += n_out;
        layers.emplace_back(std::move(w), std::move(b));
    }
    return layers;
}

inline ParamVec flatten_params(
    const std::vector<std::pair<DenseMatrix, std::vector<double>>>& layers) {
    ParamVec theta;
    for (const auto& [w, b] : layers) {
        theta.insert(theta.end(), w.data.begin(), w.data.end());
        theta.insert(theta.end(), b.begin(), b.end());
    }
    return theta;
}

inline HiddenTrace forward_with_trace(const ModelParams& m, const DenseMatrix& x) {
    const MlpSpec& spec = m.spec;
    if (x.cols != spec.input_dim())
        throw ContractViolation("forward_with_trace: input width differs from spec");
    if (m.theta.size() != spec.param_count())
        throw ContractViolation("forward_with_trace: parameter length differs from spec");

    HiddenTrace trace;
    trace.reserve(spec.num_layers());
    const DenseMatrix* h_in = &x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double* w = m.theta.data() + off;
        const double* b = m.theta.data() + off + n_in * n_out;
        off += n_in * n_out + n_out;

        DenseMatrix z(h_in->rows, n_out);
        for (std::size_t i = 0; i < h_in->rows; ++i) {
            const double* in = h_in->row(i);
            double* out = z.row(i);
            for (std::size_t j = 0; j < n_out; ++j) out[j] = b[j];
            for (std::size_t k = 0; k < n_in; ++k) {
                const double v = in[k];
                const double* wrow = w + k * n_out;
                for (std::size_t j = 0; j < n_out; ++j) out[j] += v * wrow[j];
            }
        }
        const bool is_output = (l + 2 == spec.layer_sizes.size());
        if (!is_output) {
            for (double& v : z.data) v = detail::activate(spec.activation, v);
        }
        trace.push_back(std::move(z));
        h_in = &trace.back();
    }
    return trace;
}

// Reverse pass of mean cross-entropy from an existing forward trace. The
// returned gradient uses the theta layout.
inline ParamVec backprop_from_trace(const ModelParams& m, const DenseMatrix& x,
                                    const std::vector<std::size_t>& labels,
                                    const HiddenTrace& trace) {
    const MlpSpec& spec = m.spec;
    const std::size_t batch = x.rows;
    if (labels.size() != batch)
        throw ContractViolation("backprop_from_trace: label count differs from batch");
    if (trace.size() != spec.num_layers())
        throw ContractViolation("backprop_from_trace: trace length differs from spec");

    // d(mean CE)/d(logits) = (softmax - onehot) / batch
    DenseMatrix dz = softmax_rows(trace.back());
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        double* row = dz.row(i);
        row[labels[i]] -= 1.0;
        for (std::size_t j = 0; j < dz.cols; ++j) row[j] *= inv_batch;
    }

    ParamVec grad(spec.param_count(), 0.0);
    for (std::size_t l = spec.num_layers(); l-- > 0;) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const std::size_t off = detail::layer_offset(spec, l);
        const DenseMatrix& h_in = (l == 0) ? x : trace[l - 1];

        // dW = h_in^T dz, accumulated over batch rows in ascending order
        for (std::size_t r = 0; r < batch; ++r) {
            const double* in = h_in.row(r);
            const double* d = dz.row(r);
            for (std::size_t k = 0; k < n_in; ++k) {
                double* grow = grad.data() + off + k * n_out;
                const double v = in[k];
                for (std::size_t j = 0; j < n_out; ++j) grow[j] += v * d[j];
            }
        }
        // db = column sums of dz
        for (std::size_t r = 0; r < batch; ++r) {
            const double* d = dz.row(r);
            double* gb = grad.data() + off + n_in * n_out;
            for (std::size_t j = 0; j < n_out; ++j) gb[j] += d[j];
        }
        if (l == 0) break;

        const double* w = m.theta.data() + off;
        DenseMatrix dz_prev(batch, n_in);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* d = dz.row(r);
            const double* h = trace[l - 1].row(r);
            double* out = dz_prev.row(r);
            for (std::size_t k = 0; k < n_in; ++k) {
                const double* wrow = w + k * n_out;
                double s = 0.0;
                for (std::size_t j = 0; j < n_out; ++j) s += d[j] * wrow[j];
                out[k] = s * detail::activate_grad(spec.activation, h[k]);
            }
        }
        dz = std::move(dz_prev);
    }
    return grad;
}

// Mean cross-entropy and its exact reverse-mode gradient in theta layout.
inline std::pair<double, ParamVec> loss_and_grad(const ModelParams& m, const DenseMatrix& x,
                                                 const std::vector<std::size_t>& labels) {
    const HiddenTrace trace = forward_with_trace(m, x);
    const double loss = cross_entropy(trace.back(), labels);
    return {loss, backprop_from_trace(m, x, labels, trace)};
}

inline DenseMatrix forward_logits(const ModelParams& m, const DenseMatrix& x) {
    HiddenTrace trace = forward_with_trace(m, x);
    return std::move(trace.back());
}

// Argmax per row; ties resolve to the lowest class index.
inline std::vector<std::size_t> predict(const ModelParams& m, const DenseMatrix& x) {
    const DenseMatrix logits = forward_logits(m, x);
    std::vector<std::size_t> out(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (z[j] > z[best]) best = j;
        out[i] = best;
    }
    return out;
}

}  // namespace trmlab
