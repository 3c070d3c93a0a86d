#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "trmlab/datastream.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/evaluate.hpp"
#include "trmlab/io.hpp"
#include "trmlab/merging.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/trainer.hpp"

namespace trmlab {

// Experiment description loaded from a versioned JSON file. Sections carry
// defaults; the fields listed in kRequiredKeys must be present. All
// randomness flows from the seeds recorded here.
struct ExperimentConfig {
    StreamConfig stream;
    TrainConfig train;
    TrmConfig trm;
    std::vector<std::size_t> hidden_sizes{64, 64};
    // tanh keeps hidden states and gradient norms bounded, which holds the
    // three merge-objective terms on comparable scales at this model size
    Activation activation = Activation::tanh;
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;

    MlpSpec model_spec() const {
        MlpSpec spec;
        spec.layer_sizes.push_back(stream.input_dim);
        for (std::size_t h : hidden_sizes) spec.layer_sizes.push_back(h);
        spec.layer_sizes.push_back(stream.num_classes);
        spec.activation = activation;
        return spec;
    }

    void validate() const {
        stream.validate();
        train.validate();
        trm.validate();
        model_spec().validate();
        if (strategies.empty()) throw ContractViolation("config: strategies must be nonempty");
        if (seeds.empty()) throw ContractViolation("config: seeds must be nonempty");
        if (output_dir.empty()) throw ContractViolation("config: output_dir must be set");
    }
};

namespace detail {

using json = nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ContractViolation("config: " + where + " must be an object");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ContractViolation("config: field '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& section) {
    if (!j.contains(key))
        throw ContractViolation("config: missing required field '" + section + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ContractViolation("config: field '" + section + key + "' has the wrong type");
    }
}

inline std::size_t line_of_byte_offset(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    using detail::get_or;
    using detail::get_required;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractViolation("config: JSON parse error at line " +
                                std::to_string(detail::line_of_byte_offset(text, e.byte)) + ": " +
                                e.what());
    }
    detail::require_object(j, "document root");

    const auto version = get_required<int>(j, "schema_version", "");
    if (version != 1) throw ContractViolation("config: unsupported schema_version");

    ExperimentConfig cfg;

    const nlohmann::json stream = get_or<nlohmann::json>(j, "stream", nlohmann::json::object());
    detail::require_object(stream, "stream");
    cfg.stream.num_classes = get_or<std::size_t>(stream, "num_classes", cfg.stream.num_classes);
    cfg.stream.num_tasks = get_or<std::size_t>(stream, "num_tasks", cfg.stream.num_tasks);
    cfg.stream.samples_per_class_train =
        get_or<std::size_t>(stream, "samples_per_class_train", cfg.stream.samples_per_class_train);
    cfg.stream.samples_per_class_test =
        get_or<std::size_t>(stream, "samples_per_class_test", cfg.stream.samples_per_class_test);
    cfg.stream.input_dim = get_or<std::size_t>(stream, "input_dim", cfg.stream.input_dim);
    cfg.stream.cluster_radius = get_or<double>(stream, "cluster_radius", cfg.stream.cluster_radius);
    cfg.stream.noise_sigma = get_or<double>(stream, "noise_sigma", cfg.stream.noise_sigma);
    cfg.stream.seed = get_or<std::uint64_t>(stream, "seed", cfg.stream.seed);

    const nlohmann::json train = get_or<nlohmann::json>(j, "train", nlohmann::json::object());
    detail::require_object(train, "train");
    cfg.train.epochs = get_or<std::size_t>(train, "epochs", cfg.train.epochs);
    cfg.train.batch_size = get_or<std::size_t>(train, "batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = get_or<double>(train, "learning_rate", cfg.train.learning_rate);
    cfg.train.weight_decay = get_or<double>(train, "weight_decay", cfg.train.weight_decay);
    cfg.train.beta1 = get_or<double>(train, "beta1", cfg.train.beta1);
    cfg.train.beta2 = get_or<double>(train, "beta2", cfg.train.beta2);
    cfg.train.eps_adam = get_or<double>(train, "eps_adam", cfg.train.eps_adam);
    cfg.train.cosine_anneal = get_or<bool>(train, "cosine_anneal", cfg.train.cosine_anneal);
    cfg.train.seed = get_or<std::uint64_t>(train, "seed", cfg.train.seed);

    const nlohmann::json trm = get_or<nlohmann::json>(j, "trm", nlohmann::json::object());
    detail::require_object(trm, "trm");
    cfg.trm.lambda1 = get_or<double>(trm, "lambda1", cfg.trm.lambda1);
    cfg.trm.lambda2 = get_or<double>(trm, "lambda2", cfg.trm.lambda2);
    cfg.trm.layer_pivot = get_or<std::size_t>(trm, "layer_pivot", cfg.trm.layer_pivot);
    cfg.trm.crossover_ratio = get_or<double>(trm, "crossover_ratio", cfg.trm.crossover_ratio);
    cfg.trm.merge_epochs = get_or<std::size_t>(trm, "merge_epochs", cfg.trm.merge_epochs);
    cfg.trm.coeff_lr = get_or<double>(trm, "coeff_lr", cfg.trm.coeff_lr);
    cfg.trm.beta_max = get_or<double>(trm, "beta_max", cfg.trm.beta_max);
    cfg.trm.merge_batch_size = get_or<std::size_t>(trm, "merge_batch_size", cfg.trm.merge_batch_size);
    cfg.trm.num_perturbations =
        get_or<std::size_t>(trm, "num_perturbations", cfg.trm.num_perturbations);
    cfg.trm.clamp_alpha = get_or<bool>(trm, "clamp_alpha", cfg.trm.clamp_alpha);
    cfg.trm.span_orthogonal = get_or<bool>(trm, "span_orthogonal", cfg.trm.span_orthogonal);
    cfg.trm.seed = get_or<std::uint64_t>(trm, "seed", cfg.trm.seed);

    const nlohmann::json model = get_or<nlohmann::json>(j, "model", nlohmann::json::object());
    detail::require_object(model, "model");
    cfg.hidden_sizes = get_or<std::vector<std::size_t>>(model, "hidden", cfg.hidden_sizes);
    const std::string act = get_or<std::string>(model, "activation", "tanh");
    if (act == "relu")
        cfg.activation = Activation::relu;
    else if (act == "tanh")
        cfg.activation = Activation::tanh;
    else
        throw ContractViolation("config: model.activation must be 'relu' or 'tanh'");

    for (const std::string& name :
         get_required<std::vector<std::string>>(j, "strategies", ""))
        cfg.strategies.push_back(parse_strategy(name));
    cfg.seeds = get_required<std::vector<std::uint64_t>>(j, "seeds", "");
    cfg.output_dir = get_or<std::string>(j, "output_dir", "");

    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_file(path));
}

}  // namespace trmlab
