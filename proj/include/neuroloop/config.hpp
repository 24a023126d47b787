#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neuroloop/elm.hpp"
#include "neuroloop/engine.hpp"

namespace neuroloop {

struct EncoderParams {
    std::size_t channels = 64;
    double r0 = 5.0;
    double dr = 45.0;
    bool deterministic = false;
    int reaction_lag_ticks = 1;
    std::optional<int> rest_ticks;
    std::vector<std::size_t> permutation;
};

struct ModelParams {
    std::optional<std::size_t> inputs;  // must equal encoder channels when given
    std::size_t hidden = 50;
    double lambda = 0.1;
    std::optional<AnalogConfig> analog = AnalogConfig{0.5, 8, 1.0, true};
};

struct RunConfig {
    std::uint64_t seed = 1;
    EncoderParams encoder;
    FeatureConfig features;
    ModelParams model;
    TrialConfig task;
    PipelinePlan training;
    int benchmark_trials = 60;
    std::string out = "out";

    /// Cross-module consistency. Throws ConfigError.
    void validate() const;

    EngineConfig engine() const;
    ElmModel fresh_model() const;
};

/// Parse and validate a JSON config. Accepts either a bare config document
/// or a run manifest carrying one under "config". Errors are ConfigError
/// with "line L:" prefixes pointing into `text`.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON of every field that affects the run (the output
/// directory is excluded).
std::string config_to_json(const RunConfig& config);

}  // namespace neuroloop
