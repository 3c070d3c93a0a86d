#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "trmlab/errors.hpp"

namespace trmlab {

// Row-major dense matrix of doubles. Reductions over its entries accumulate
// left to right so results are reproducible across runs.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const DenseMatrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// C = A * B, accumulating over k in ascending order for every entry.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw ContractViolation("matmul: inner dimensions differ");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// C = A^T * B with A of shape (k, m), B of shape (k, n).
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) throw ContractViolation("matmul_at_b: row counts differ");
    DenseMatrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            double* crow = c.row(i);
            const double aki = arow[i];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

// C = A * B^T with A of shape (m, k), B of shape (n, k).
inline DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols) throw ContractViolation("matmul_a_bt: column counts differ");
    DenseMatrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

// Row-wise softmax with per-row max subtraction.
inline DenseMatrix softmax_rows(const DenseMatrix& z) {
    DenseMatrix out(z.rows, z.cols);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double* in = z.row(i);
        double* o = out.row(i);
        double m = in[0];
        for (std::size_t j = 1; j < z.cols; ++j) m = std::max(m, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) {
            o[j] = std::exp(in[j] - m);
            sum += o[j];
        }
        for (std::size_t j = 0; j < z.cols; ++j) o[j] /= sum;
    }
    return out;
}

// Mean over rows of -log softmax(logits)[label], evaluated via log-sum-exp.
inline double cross_entropy(const DenseMatrix& logits, const std::vector<std::size_t>& labels) {
    if (logits.rows == 0) throw ContractViolation("cross_entropy: empty batch");
    if (labels.size() != logits.rows)
        throw ContractViolation("cross_entropy: label count differs from batch size");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (labels[i] >= logits.cols)
            throw ContractViolation("cross_entropy: label out of range");
        const double* z = logits.row(i);
        double m = z[0];
        for (std::size_t j = 1; j < logits.cols; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(z[j] - m);
        total += m + std::log(sum) - z[labels[i]];
    }
    return total / static_cast<double>(logits.rows);
}

}  // namespace trmlab
