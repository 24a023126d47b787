#include "neuroloop/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace neuroloop {

void FeatureConfig::validate() const {
    if (channels < 1) throw InvalidArgument("feature config: D must be >= 1");
    if (!(decoder_hz > 0.0)) throw InvalidArgument("feature config: d_f must be > 0");
    if (!(window >= period() - 1e-12)) throw InvalidArgument("feature config: T_w must be >= T_s");
}

FeatureExtractor::FeatureExtractor(FeatureConfig config)
    : config_(config),
      buffers_(config.channels),
      last_pushed_(config.channels, -std::numeric_limits<double>::infinity()) {
    config_.validate();
}

void FeatureExtractor::push_events(std::span<const SpikeEvent> events) {
    // Validate the whole batch first so a rejected batch leaves state untouched.
    std::vector<double> last = last_pushed_;
    for (const auto& e : events) {
        if (e.channel >= config_.channels) {
            throw InvalidArgument("spike on channel " + std::to_string(e.channel) +
                                  " outside [0, " + std::to_string(config_.channels) + ")");
        }
        if (e.timestamp < last[e.channel]) {
            throw OrderingError("out-of-order spike on channel " + std::to_string(e.channel));
        }
        last[e.channel] = e.timestamp;
    }
    for (const auto& e : events) buffers_[e.channel].push_back(e.timestamp);
    last_pushed_ = std::move(last);
}

FeatureVector FeatureExtractor::emit(double t) {
    const double ts = config_.period();
    const double n_real = t / ts;
    const auto n = static_cast<std::int64_t>(std::llround(n_real));
    if (std::abs(n_real - static_cast<double>(n)) > 1e-6) {
        throw InvalidArgument("emit time is not on the tick grid");
    }
    if (last_tick_ && n <= *last_tick_) {
        throw InvalidArgument("emit time must advance by at least one tick");
    }

    // Whole-tick windows put the left edge on the grid, computed the way
    // callers compute tick times, so boundary spikes land consistently.
    const double m_real = config_.window / ts;
    const double m = std::round(m_real);
    const double lower = std::abs(m_real - m) <= 1e-9 * std::max(1.0, m)
                             ? static_cast<double>(n - static_cast<std::int64_t>(m)) * ts
                             : t - config_.window;
    FeatureVector fv;
    fv.tick = n;
    fv.t = t;
    fv.rates.resize(config_.channels);
    for (std::size_t k = 0; k < config_.channels; ++k) {
        auto& buf = buffers_[k];
        while (!buf.empty() && buf.front() <= lower) buf.pop_front();
        auto end = std::upper_bound(buf.begin(), buf.end(), t);
        fv.rates[k] = static_cast<double>(std::distance(buf.begin(), end));
    }
    last_tick_ = n;
    return fv;
}

std::size_t FeatureExtractor::buffered() const {
    std::size_t total = 0;
    for (const auto& b : buffers_) total += b.size();
    return total;
}

void write_features_csv(std::ostream& out, std::span<const FeatureVector> rows,
                        std::size_t channels) {
    const auto old = out.precision(17);
    out << "tick_index,t";
    for (std::size_t k = 1; k <= channels; ++k) out << ",r_" << k;
    out << '\n';
    for (const auto& row : rows) {
        out << row.tick << ',' << row.t;
        for (double r : row.rates) out << ',' << r;
        out << '\n';
    }
    out.precision(old);
}

}  // namespace neuroloop
