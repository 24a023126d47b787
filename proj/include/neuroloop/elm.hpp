#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neuroloop/common.hpp"

namespace neuroloop {

/// Behavioural model of the analog co-processor: log-normal current-mirror
/// weights and a saturating counter behind each hidden oscillator.
struct AnalogConfig {
    double sigma_m = 0.5;     // log-domain std of mirror mismatch
    int counter_bits = 8;
    double gain = 1.0;        // K, counts per unit pre-activation; set by calibration
    bool signed_weights = false;

    double saturation() const;
    /// Count the median positive drive is calibrated to: mid-range of an 8-bit
    /// counter; wider counters only add headroom above it.
    double calibration_target() const;
    void validate() const;
};

struct ElmModel {
    std::size_t inputs = 0;   // D
    std::size_t hidden = 0;   // L
    std::size_t classes = 0;  // C
    std::uint64_t seed = 0;
    double lambda = 0.1;
    Eigen::MatrixXd weights;  // D x L, fixed after init
    Eigen::VectorXd bias;     // L, fixed after init
    Eigen::MatrixXd beta;     // L x C
    std::optional<AnalogConfig> analog;

    bool trained() const { return beta.size() > 0 && !beta.isZero(0.0); }
};

struct HiddenActivation {
    std::vector<double> values;
    bool quantized = false;
};

struct TrainingSet {
    Eigen::MatrixXd hidden;   // N x L
    Eigen::MatrixXd targets;  // N x C, one-hot rows
    double lambda = 0.1;
};

ElmModel init_model(std::size_t inputs, std::size_t hidden, std::size_t classes,
                    std::uint64_t seed, std::optional<AnalogConfig> analog = std::nullopt);

/// Summed first-layer input per hidden node, bias included.
Eigen::VectorXd pre_activation(const ElmModel& model, std::span<const double> x);

/// Float path: ReLU. Analog path: floor(K * max(0, pre)) clipped at the
/// counter's saturation value.
HiddenActivation hidden(const ElmModel& model, std::span<const double> x);

/// Analog path without the counter: K * max(0, pre). Equals hidden() for
/// float-path models.
HiddenActivation hidden_unquantized(const ElmModel& model, std::span<const double> x);

std::vector<double> decode(const ElmModel& model, const HiddenActivation& h,
                           bool allow_untrained = false);

/// Argmax with ties going to the lowest class index.
std::size_t classify_index(std::span<const double> o);
Command classify(std::span<const double> o);

/// Ridge solution of min |H beta - T|^2 + lambda |beta|^2. Weights and bias
/// are carried over untouched.
ElmModel train(const ElmModel& model, const TrainingSet& data);

/// Sets the counter gain so the median positive pre-activation over
/// `features` lands at calibration_target(). No-op for float-path models.
ElmModel calibrate(const ElmModel& model, std::span<const std::vector<double>> features);

/// Calibrate, build one-hot targets from `labels`, and train.
ElmModel fit(const ElmModel& model, std::span<const std::vector<double>> features,
             std::span<const Command> labels, double lambda);

Command predict(const ElmModel& model, std::span<const double> x);

double offline_accuracy(const ElmModel& model, std::span<const std::vector<double>> features,
                        std::span<const Command> labels);

// Persistence: a single JSON document.
std::string model_to_json(const ElmModel& model);
ElmModel model_from_json(const std::string& text);
void save_model(const ElmModel& model, const std::string& path);
ElmModel load_model(const std::string& path);

}  // namespace neuroloop
