#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "neuroloop/common.hpp"

namespace neuroloop {

struct SpikeEvent {
    std::uint32_t channel = 0;
    double timestamp = 0.0;  // seconds

    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

using SpikeGenerator = std::mt19937_64;

/// Synthetic subject: every channel is tuned to one preferred command and
/// fires as a Poisson process at r0, or r0 + dr while the intent matches.
struct EncoderModel {
    std::vector<Command> preferred;  // one entry per channel
    double r0 = 5.0;                 // Hz
    double dr = 45.0;                // Hz
    std::uint64_t seed = 0;
    bool deterministic = false;

    std::size_t channels() const { return preferred.size(); }

    /// Partition `channels` contiguously and evenly across the four
    /// commands. `permutation`, when non-empty, remaps channel k to the class
    /// of channel permutation[k].
    static EncoderModel partitioned(std::size_t channels, double r0, double dr,
                                    std::uint64_t seed, bool deterministic = false,
                                    std::span<const std::size_t> permutation = {});

    void validate() const;
    SpikeGenerator make_generator() const { return SpikeGenerator(seed); }
};

struct NoiseTrace {
    std::uint32_t channel = 0;
    double fs = 30000.0;  // Hz
    std::vector<double> samples;  // µV

    double duration() const { return static_cast<double>(samples.size()) / fs; }
};

/// Noise sigma from the median absolute deviation: median(|x|) / 0.6745.
double mad_sigma(std::span<const double> samples);

inline double detect_threshold(double sigma) { return -5.0 * sigma; }

inline constexpr double kDefaultRefractory = 1e-3;

/// Negative-going threshold crossing detector.
///
/// The detector re-arms only after the trace returns to >= 0, so each
/// negative lobe yields at most one event; within a lobe the event is the
/// first sample below `threshold` that is at least `refractory` seconds
/// after the previous event. With this rule the event count is monotone in
/// |threshold|.
std::vector<SpikeEvent> detect_spikes(const NoiseTrace& trace, double threshold,
                                      double refractory = kDefaultRefractory);

/// Events in (t0, t1] for every channel, sorted by (timestamp, channel).
std::vector<SpikeEvent> encode_intent(const EncoderModel& model, Command intent, double t0,
                                      double t1, SpikeGenerator& gen);

/// Baseline-only activity (no intent): every channel fires at r0.
std::vector<SpikeEvent> encode_rest(const EncoderModel& model, double t0, double t1,
                                    SpikeGenerator& gen);

/// Gaussian noise plus a biphasic negative spike template starting at each of
/// `spike_times`. Sample count is round(duration * fs).
NoiseTrace synthesize_trace(std::uint32_t channel, double duration, double fs,
                            double noise_sigma, std::span<const double> spike_times,
                            double spike_amplitude, SpikeGenerator& gen);

// JSON-lines spike streams: {"ch": int, "t": seconds}
void write_spikes_jsonl(std::ostream& out, std::span<const SpikeEvent> events);
std::vector<SpikeEvent> read_spikes_jsonl(std::istream& in);

}  // namespace neuroloop
