#pragma once

#include <string>
#include <vector>

#include "cora/extraction.hpp"
#include "cora/fixture.hpp"
#include "cora/model.hpp"
#include "cora/tasks.hpp"
#include "cora/train.hpp"

namespace cora {

struct ExtractionSettings {
    BasisMethod method = BasisMethod::svd;
    std::size_t rank = 8;
    std::vector<double> thresholds{0.9, 0.99, 0.999};

    bool operator==(const ExtractionSettings&) const = default;
};

// One document that drives every tool. The task's vocab_size and the
// fixture's dims are implied by `dims` and never appear in the JSON.
struct ExperimentConfig {
    ModelDims dims{16, 16, 32, 32, 8};
    TaskSpec task;
    TrainConfig train;
    ExtractionSettings extraction;
    FixtureConfig fixture;

    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig default_experiment_config();

// Consistency of implied fields; throws with the offending field named.
void validate_config(const ExperimentConfig& cfg);

// Strict parse: unknown keys are rejected, missing keys take defaults.
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const ExperimentConfig& cfg);

}  // namespace cora
