#pragma once

#include <optional>
#include <string>

#include "hypersci/simulate.hpp"
#include "hypersci/train.hpp"

namespace hypersci {

// A declarative experiment: what to simulate (or load), how to train, which
// methods/seeds to run, and where outputs go. Parsed from a JSON document;
// unknown keys are rejected before any work starts.
struct ExperimentConfig {
    SimConfig sim;
    GeneratorSpec generator;
    bool has_generator = true;

    struct DataPaths {
        std::string features;
        std::string treatments;
        std::string outcomes;  // optional, may be empty
        std::string hypergraph;
        bool standardize = false;
    };
    std::optional<DataPaths> paths;

    TrainConfig train;
    std::vector<Method> methods{Method::HyperSci, Method::HyperSciG, Method::LeastSquares};
    std::vector<std::uint64_t> seeds{1};

    std::optional<SweepKind> sweep_kind;
    std::vector<double> sweep_grid;

    std::string out_dir = "out";
    int case_study_bins = 6;
};

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);

// Resolved-config serialization written into every run directory.
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// The dataset generator the config describes (random hypergraph or CSV paths).
DatasetGenerator make_dataset_generator(const ExperimentConfig& cfg);

}  // namespace hypersci
