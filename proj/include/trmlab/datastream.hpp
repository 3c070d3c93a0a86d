#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <vector>

#include "trmlab/errors.hpp"
#include "trmlab/matrix.hpp"
#include "trmlab/rng.hpp"

namespace trmlab {

// Synthetic class-incremental stream: Gaussian blobs around class means laid
// out on a ring (2-D inputs) or along seeded random unit directions (higher
// dimensions). Classes are assigned to tasks contiguously by index, so task
// identity is reproducible from the config alone.
struct StreamConfig {
    std::size_t num_classes = 10;
    std::size_t num_tasks = 5;
    std::size_t samples_per_class_train = 128;
    std::size_t samples_per_class_test = 64;
    std::size_t input_dim = 2;
    double cluster_radius = 2.0;
    double noise_sigma = 0.1;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_classes == 0 || num_tasks == 0)
            throw ContractViolation("StreamConfig: class and task counts must be positive");
        if (num_classes % num_tasks != 0)
            throw ContractViolation("StreamConfig: num_classes must divide evenly into tasks");
        if (samples_per_class_train == 0 || samples_per_class_test == 0)
            throw ContractViolation("StreamConfig: sample counts must be positive");
        if (input_dim == 0) throw ContractViolation("StreamConfig: input_dim must be positive");
        if (!(noise_sigma > 0.0)) throw ContractViolation("StreamConfig: noise_sigma must be > 0");
    }
};

struct LabeledSet {
    DenseMatrix features;
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
};

struct TaskDataset {
    std::size_t task_index = 0;  // 0-based
    std::vector<std::size_t> class_ids;
    LabeledSet train;
    LabeledSet test;
};

namespace detail {

inline std::vector<std::vector<double>> class_means(const StreamConfig& cfg, RngState& rng) {
    std::vector<std::vector<double>> means(cfg.num_classes);
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        std::vector<double> mu(cfg.input_dim, 0.0);
        if (cfg.input_dim == 2) {
            const double angle =
                2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(cfg.num_classes);
            mu[0] = cfg.cluster_radius * std::cos(angle);
            mu[1] = cfg.cluster_radius * std::sin(angle);
        } else {
            std::vector<double> dir = gaussian_vector(rng, cfg.input_dim);
            double norm = 0.0;
            for (double v : dir) norm += v * v;
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < cfg.input_dim; ++i)
                mu[i] = cfg.cluster_radius * dir[i] / norm;
        }
        means[c] = std::move(mu);
    }
    return means;
}

inline void append_class_samples(LabeledSet& set, std::size_t row0, std::size_t count,
                                 const std::vector<double>& mu, double sigma,
                                 std::size_t class_id, RngState& rng) {
    const std::size_t d = mu.size();
    for (std::size_t s = 0; s < count; ++s) {
        double* row = set.features.row(row0 + s);
        fill_gaussian(rng, row, d);
        for (std::size_t i = 0; i < d; ++i) row[i] = mu[i] + sigma * row[i];
        set.labels[row0 + s] = class_id;
    }
}

}  // namespace detail

// Draw order is fixed: class means first (when the dimension needs them),
// then per class in global index order its train samples followed by its
// test samples. Identical configs produce identical streams.
inline std::vector<TaskDataset> generate_stream(const StreamConfig& cfg) {
    cfg.validate();
    RngState rng{cfg.seed, 0};
    const auto means = detail::class_means(cfg, rng);
    const std::size_t classes_per_task = cfg.num_classes / cfg.num_tasks;

    std::vector<TaskDataset> stream(cfg.num_tasks);
    for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
        TaskDataset& task = stream[t];
        task.task_index = t;
        task.train.features = DenseMatrix(classes_per_task * cfg.samples_per_class_train, cfg.input_dim);
        task.train.labels.resize(classes_per_task * cfg.samples_per_class_train);
        task.test.features = DenseMatrix(classes_per_task * cfg.samples_per_class_test, cfg.input_dim);
        task.test.labels.resize(classes_per_task * cfg.samples_per_class_test);
        for (std::size_t k = 0; k < classes_per_task; ++k) {
            const std::size_t c = t * classes_per_task + k;
            task.class_ids.push_back(c);
            detail::append_class_samples(task.train, k * cfg.samples_per_class_train,
                                         cfg.samples_per_class_train, means[c], cfg.noise_sigma,
                                         c, rng);
            detail::append_class_samples(task.test, k * cfg.samples_per_class_test,
                                         cfg.samples_per_class_test, means[c], cfg.noise_sigma,
                                         c, rng);
        }
    }
    return stream;
}

// Concatenated test splits of tasks 1..upto_t (1-based), in stream order.
inline LabeledSet joint_testset(const std::vector<TaskDataset>& stream, std::size_t upto_t) {
    if (upto_t < 1 || upto_t > stream.size())
        throw ContractViolation("joint_testset: upto_t out of range");
    std::size_t total = 0;
    for (std::size_t t = 0; t < upto_t; ++t) total += stream[t].test.size();

    LabeledSet joint;
    const std::size_t d = stream.front().test.features.cols;
    joint.features = DenseMatrix(total, d);
    joint.labels.resize(total);
    std::size_t row = 0;
    for (std::size_t t = 0; t < upto_t; ++t) {
        const LabeledSet& src = stream[t].test;
        std::copy(src.features.data.begin(), src.features.data.end(),
                  joint.features.data.begin() + row * d);
        std::copy(src.labels.begin(), src.labels.end(), joint.labels.begin() + row);
        row += src.size();
    }
    return joint;
}

// One row per sample: task,split,class,feature_0..feature_{d-1}.
template <typename DoubleFormatter>
void dump_stream_csv(std::ostream& out, const std::vector<TaskDataset>& stream,
                     DoubleFormatter&& fmt) {
    const std::size_t d = stream.empty() ? 0 : stream.front().train.features.cols;
    out << "task,split,class";
    for (std::size_t i = 0; i < d; ++i) out << ",feature_" << i;
    out << "\n";
    auto emit = [&](const TaskDataset& task, const LabeledSet& set, const char* split) {
        for (std::size_t r = 0; r < set.size(); ++r) {
            out << (task.task_index + 1) << ',' << split << ',' << set.labels[r];
            const double* row = set.features.row(r);
            for (std::size_t i = 0; i < d; ++i) out << ',' << fmt(row[i]);
            out << "\n";
        }
    };
    for (const TaskDataset& task : stream) {
        emit(task, task.train, "train");
        emit(task, task.test, "test");
    }
}

}  // namespace trmlab
