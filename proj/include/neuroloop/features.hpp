#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "neuroloop/frontend.hpp"

namespace neuroloop {

struct FeatureConfig {
    std::size_t channels = 64;  // D
    double window = 0.5;        // T_w, seconds
    double decoder_hz = 10.0;   // d_f

    double period() const { return 1.0 / decoder_hz; }  // T_s
    void validate() const;
};

/// Spike counts per channel over the half-open window (t - T_w, t].
struct FeatureVector {
    std::int64_t tick = 0;
    double t = 0.0;
    std::vector<double> rates;
};

/// Sliding-window spike counter. Single owner; emit() must be called on the
/// tick grid t = n * T_s with strictly increasing n.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig config);

    void push_events(std::span<const SpikeEvent> events);
    FeatureVector emit(double t);

    const FeatureConfig& config() const { return config_; }
    std::size_t buffered() const;

private:
    FeatureConfig config_;
    std::vector<std::deque<double>> buffers_;
    std::vector<double> last_pushed_;
    std::optional<std::int64_t> last_tick_;
};

/// CSV with header `tick_index,t,r_1,...,r_D`.
void write_features_csv(std::ostream& out, std::span<const FeatureVector> rows,
                        std::size_t channels);

}  // namespace neuroloop
