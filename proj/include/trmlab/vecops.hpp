#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "trmlab/errors.hpp"

namespace trmlab {

// Flat view of all model parameters; the common currency between modules.
using ParamVec = std::vector<double>;

inline void check_same_length(const ParamVec& a, const ParamVec& b, const char* what) {
    if (a.size() != b.size()) throw ContractViolation(what);
}

inline double dot(const ParamVec& a, const ParamVec& b) {
    check_same_length(a, b, "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm_squared(const ParamVec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double l2_norm(const ParamVec& v) { return std::sqrt(l2_norm_squared(v)); }

inline ParamVec subtract(const ParamVec& a, const ParamVec& b) {
    check_same_length(a, b, "subtract: length mismatch");
    ParamVec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline ParamVec add(const ParamVec& a, const ParamVec& b) {
    check_same_length(a, b, "add: length mismatch");
    ParamVec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline ParamVec scaled(const ParamVec& v, double c) {
    ParamVec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i];
    return out;
}

// y += c * x
inline void axpy(ParamVec& y, double c, const ParamVec& x) {
    check_same_length(y, x, "axpy: length mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline void scale_in_place(ParamVec& v, double c) {
    for (double& x : v) x *= c;
}

inline bool all_finite(const ParamVec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace trmlab
