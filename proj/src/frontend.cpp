#include "neuroloop/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace neuroloop {

EncoderModel EncoderModel::partitioned(std::size_t channels, double r0, double dr,
                                       std::uint64_t seed, bool deterministic,
                                       std::span<const std::size_t> permutation) {
    if (channels == 0) throw InvalidArgument("encoder needs at least one channel");
    if (!permutation.empty() && permutation.size() != channels) {
        throw InvalidArgument("channel permutation length must equal channel count");
    }
    std::vector<Command> base(channels);
    for (std::size_t k = 0; k < channels; ++k) {
        base[k] = command_from_index(k * kNumCommands / channels);
    }
    EncoderModel m;
    m.preferred.resize(channels);
    for (std::size_t k = 0; k < channels; ++k) {
        std::size_t src = permutation.empty() ? k : permutation[k];
        if (src >= channels) throw InvalidArgument("channel permutation entry out of range");
        m.preferred[k] = base[src];
    }
    m.r0 = r0;
    m.dr = dr;
    m.seed = seed;
    m.deterministic = deterministic;
    m.validate();
    return m;
}

void EncoderModel::validate() const {
    if (preferred.empty()) throw InvalidArgument("encoder needs at least one channel");
    if (!(r0 >= 0.0)) throw InvalidArgument("baseline rate r0 must be >= 0");
    if (!(r0 + dr >= 0.0)) throw InvalidArgument("r0 + dr must be >= 0");
}

double mad_sigma(std::span<const double> samples) {
    if (samples.empty()) throw InvalidArgument("mad_sigma: empty sample set");
    std::vector<double> mag(samples.size());
    std::transform(samples.begin(), samples.end(), mag.begin(),
                   [](double v) { return std::abs(v); });
    const std::size_t n = mag.size();
    auto mid = mag.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(mag.begin(), mid, mag.end());
    double median = *mid;
    if (n % 2 == 0) {
        double lower = *std::max_element(mag.begin(), mid);
        median = 0.5 * (median + lower);
    }
    return median / 0.6745;
}

std::vector<SpikeEvent> detect_spikes(const NoiseTrace& trace, double threshold,
                                      double refractory) {
    if (threshold > 0.0) throw InvalidArgument("detect_spikes: threshold must be <= 0");
    if (refractory < 0.0) throw InvalidArgument("detect_spikes: refractory must be >= 0");

    std::vector<SpikeEvent> events;
    bool armed = true;
    bool have_last = false;
    double last_t = 0.0;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const double v = trace.samples[i];
        if (v >= 0.0) {
            armed = true;
            continue;
        }
        if (!armed || !(v < threshold)) continue;
        const double t = static_cast<double>(i) / trace.fs;
        if (have_last && t - last_t < refractory) continue;
        events.push_back({trace.channel, t});
        last_t = t;
        have_last = true;
        armed = false;
    }
    return events;
}

namespace {

std::vector<SpikeEvent> encode_rates(const EncoderModel& model, std::optional<Command> intent,
                                     double t0, double t1, SpikeGenerator& gen) {
    if (!(t1 > t0)) throw InvalidArgument("encode_intent: window must satisfy t1 > t0");
    const double span = t1 - t0;
    std::vector<SpikeEvent> out;
    for (std::size_t k = 0; k < model.channels(); ++k) {
        const double rate = model.r0 + (intent && model.preferred[k] == *intent ? model.dr : 0.0);
        const auto ch = static_cast<std::uint32_t>(k);
        if (model.deterministic) {
            const auto n = static_cast<std::size_t>(std::llround(rate * span));
            for (std::size_t i = 0; i < n; ++i) {
                out.push_back({ch, t0 + span * static_cast<double>(i + 1) / static_cast<double>(n)});
            }
            continue;
        }
        if (rate <= 0.0) continue;
        std::exponential_distribution<double> gap(rate);
        for (double t = t0 + gap(gen); t <= t1; t += gap(gen)) out.push_back({ch, t});
    }
    std::sort(out.begin(), out.end(), [](const SpikeEvent& a, const SpikeEvent& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.channel < b.channel;
    });
    return out;
}

}  // namespace

std::vector<SpikeEvent> encode_intent(const EncoderModel& model, Command intent, double t0,
                                      double t1, SpikeGenerator& gen) {
    return encode_rates(model, intent, t0, t1, gen);
}

std::vector<SpikeEvent> encode_rest(const EncoderModel& model, double t0, double t1,
                                    SpikeGenerator& gen) {
    return encode_rates(model, std::nullopt, t0, t1, gen);
}

NoiseTrace synthesize_trace(std::uint32_t channel, double duration, double fs,
                            double noise_sigma, std::span<const double> spike_times,
                            double spike_amplitude, SpikeGenerator& gen) {
    if (!(fs > 0.0) || duration < 0.0) throw InvalidArgument("synthesize_trace: bad timing");
    NoiseTrace trace;
    trace.channel = channel;
    trace.fs = fs;
    trace.samples.resize(static_cast<std::size_t>(std::llround(duration * fs)));
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& s : trace.samples) s = noise(gen);

    // Trough 0.2 ms after onset, small positive rebound at 0.6 ms.
    const auto n = static_cast<std::ptrdiff_t>(trace.samples.size());
    for (double onset : spike_times) {
        const auto first = static_cast<std::ptrdiff_t>(std::floor(onset * fs));
        const auto last = first + static_cast<std::ptrdiff_t>(std::ceil(1.2e-3 * fs));
        for (auto i = std::max<std::ptrdiff_t>(first, 0); i < std::min(last, n); ++i) {
            const double dt = static_cast<double>(i) / fs - onset;
            const double trough = std::exp(-std::pow((dt - 0.2e-3) / 0.1e-3, 2));
            const double rebound = std::exp(-std::pow((dt - 0.6e-3) / 0.2e-3, 2));
            trace.samples[static_cast<std::size_t>(i)] +=
                spike_amplitude * (-trough + 0.3 * rebound);
        }
    }
    return trace;
}

void write_spikes_jsonl(std::ostream& out, std::span<const SpikeEvent> events) {
    for (const auto& e : events) {
        nlohmann::json j = {{"ch", e.channel}, {"t", e.timestamp}};
        out << j.dump() << '\n';
    }
}

std::vector<SpikeEvent> read_spikes_jsonl(std::istream& in) {
    std::vector<SpikeEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            events.push_back({j.at("ch").get<std::uint32_t>(), j.at("t").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("spike stream line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return events;
}

}  // namespace neuroloop
