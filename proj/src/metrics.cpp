#include "neuroloop/metrics.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace neuroloop {

ChanceLevel chance_trial_success(int n_classes, double match_fraction, int n_steps) {
    if (n_classes < 2) throw InvalidArgument("chance: n_classes must be >= 2");
    if (!(match_fraction >= 0.0 && match_fraction <= 1.0)) {
        throw InvalidArgument("chance: match_fraction must lie in [0, 1]");
    }
    if (n_steps < 1) throw InvalidArgument("chance: n_steps must be >= 1");
    ChanceLevel c;
    c.log10 = -match_fraction * n_steps * std::log10(static_cast<double>(n_classes));
    c.probability = c.log10 < -300.0 ? 0.0 : std::pow(10.0, c.log10);
    return c;
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // unbiased
};

Moments moments(std::span<const double> x) {
    Moments m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.var = x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
    return m;
}

}  // namespace

TTestResult t_test_unpaired(std::span<const double> a, std::span<const double> b, bool welch) {
    if (a.size() < 2 || b.size() < 2) {
        throw InvalidArgument("t-test: each sample needs at least two values");
    }
    const auto ma = moments(a);
    const auto mb = moments(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    double se2 = 0.0;
    double dof = 0.0;
    if (welch) {
        const double va = ma.var / na;
        const double vb = mb.var / nb;
        se2 = va + vb;
        dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    } else {
        dof = na + nb - 2.0;
        const double pooled = ((na - 1.0) * ma.var + (nb - 1.0) * mb.var) / dof;
        se2 = pooled * (1.0 / na + 1.0 / nb);
    }
    if (!(se2 > 0.0)) throw NumericError("t-test: zero variance in both samples");

    TTestResult r;
    r.t = (ma.mean - mb.mean) / std::sqrt(se2);
    r.dof = dof;
    boost::math::students_t dist(dof);
    r.p = std::min(1.0, 2.0 * boost::math::cdf(dist, -std::abs(r.t)));
    return r;
}

std::optional<double> match_fraction(const TrialRecord& trial) {
    std::size_t n = 0;
    std::size_t hits = 0;
    for (const auto& e : trial.ticks) {
        if (!e.decoded) continue;
        ++n;
        if (*e.decoded == e.oracle) ++hits;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

std::size_t direction_slot(Command d) {
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        if (kDirections[i] == d) return i;
    }
    throw InvalidArgument("trial record has no valid target direction");
}

void finalize(DirectionStats& s) {
    if (s.durations.empty()) return;
    const auto m = moments(s.durations);
    s.mean_duration = m.mean;
    if (s.durations.size() >= 2) s.std_duration = std::sqrt(m.var);
}

void add(DirectionStats& s, const TrialRecord& t, double decoder_hz) {
    ++s.n_trials;
    if (t.succeeded()) {
        ++s.n_success;
        s.durations.push_back(t.duration_ticks / decoder_hz);
    }
}

ModeSummary summarize_mode(const std::vector<TrialRecord>& trials, double decoder_hz,
                           const char* mode) {
    ModeSummary m;
    for (const auto& t : trials) {
        add(m.by_direction[direction_slot(t.direction)], t, decoder_hz);
        add(m.overall, t, decoder_hz);
    }
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        if (m.by_direction[i].n_trials == 0) {
            throw InvalidArgument(std::string("summarize: ") + mode + " mode has no " +
                                  std::string(to_string(kDirections[i])) + " trials");
        }
        finalize(m.by_direction[i]);
    }
    finalize(m.overall);
    return m;
}

Comparison compare(std::span<const double> a, std::span<const double> b) {
    Comparison c;
    if (a.size() < 2 || b.size() < 2) {
        c.note = "insufficient";
        return c;
    }
    try {
        c.test = t_test_unpaired(a, b);
    } catch (const NumericError&) {
        if (moments(a).mean == moments(b).mean) {
            c.test = TTestResult{0.0, 1.0, static_cast<double>(a.size() + b.size() - 2)};
            c.note = "identical";
        } else {
            c.note = "degenerate";
        }
    }
    return c;
}

std::optional<double> ratio(std::optional<double> num, std::optional<double> den) {
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
}

std::vector<double> success_indicators(const std::vector<TrialRecord>& trials) {
    std::vector<double> v;
    v.reserve(trials.size());
    for (const auto& t : trials) v.push_back(t.succeeded() ? 1.0 : 0.0);
    return v;
}

}  // namespace

BenchmarkSummary summarize(const std::vector<TrialRecord>& hand,
                           const std::vector<TrialRecord>& neural, double decoder_hz,
                           double match_frac, int max_ticks) {
    BenchmarkSummary s;
    s.hand = summarize_mode(hand, decoder_hz, "hand");
    s.neural = summarize_mode(neural, decoder_hz, "neural");
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        const auto& h = s.hand.by_direction[i];
        const auto& n = s.neural.by_direction[i];
        s.speed_ratio[i] = ratio(h.mean_duration, n.mean_duration);
        s.success_ratio[i] = ratio(n.success_rate(), h.success_rate());
        s.duration_tests[i] = compare(n.durations, h.durations);
    }
    s.overall_speed_ratio = ratio(s.hand.overall.mean_duration, s.neural.overall.mean_duration);
    s.overall_success_ratio = ratio(s.neural.overall.success_rate(), s.hand.overall.success_rate());
    s.success_test = compare(success_indicators(neural), success_indicators(hand));
    s.chance = chance_trial_success(static_cast<int>(kNumCommands), match_frac, max_ticks);
    return s;
}

namespace {

template <typename Json>
Json opt(std::optional<double> v) {
    return v ? Json(*v) : Json(nullptr);
}

nlohmann::ordered_json stats_json(const DirectionStats& d) {
    nlohmann::ordered_json j;
    j["n_trials"] = d.n_trials;
    j["n_success"] = d.n_success;
    j["success_rate"] = d.success_rate();
    j["mean_duration_s"] = opt<nlohmann::ordered_json>(d.mean_duration);
    j["std_duration_s"] = opt<nlohmann::ordered_json>(d.std_duration);
    return j;
}

nlohmann::ordered_json comparison_json(const Comparison& c) {
    nlohmann::ordered_json j;
    if (c.test) {
        j["t"] = c.test->t;
        j["p"] = c.test->p;
        j["dof"] = c.test->dof;
        j["significant"] = c.significant();
    } else {
        j["t"] = nullptr;
        j["p"] = nullptr;
        j["dof"] = nullptr;
        j["significant"] = nullptr;
    }
    j["note"] = c.note;
    return j;
}

nlohmann::ordered_json mode_json(const ModeSummary& m) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        j[std::string(to_string(kDirections[i]))] = stats_json(m.by_direction[i]);
    }
    j["overall"] = stats_json(m.overall);
    return j;
}

void csv_field(std::ostream& out, std::optional<double> v) {
    if (v) out << *v;
}

void csv_row(std::ostream& out, const char* mode, std::string_view dir, const DirectionStats& d) {
    out << mode << ',' << dir << ',' << d.n_trials << ',' << d.n_success << ','
        << d.success_rate() << ',';
    csv_field(out, d.mean_duration);
    out << ',';
    csv_field(out, d.std_duration);
    out << '\n';
}

}  // namespace

void write_summary_csv(std::ostream& out, const BenchmarkSummary& s) {
    const auto old = out.precision(17);
    out << "mode,direction,n_trials,n_success,success_rate,mean_duration_s,std_duration_s\n";
    for (auto [name, mode] : {std::pair{"hand", &s.hand}, std::pair{"neural", &s.neural}}) {
        for (std::size_t i = 0; i < kDirections.size(); ++i) {
            csv_row(out, name, to_string(kDirections[i]), mode->by_direction[i]);
        }
        csv_row(out, name, "overall", mode->overall);
    }
    out.precision(old);
}

std::string summary_to_json(const BenchmarkSummary& s) {
    using J = nlohmann::ordered_json;
    J j;
    j["hand"] = mode_json(s.hand);
    j["neural"] = mode_json(s.neural);
    J ratios;
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        J r;
        r["speed"] = opt<J>(s.speed_ratio[i]);
        r["success"] = opt<J>(s.success_ratio[i]);
        ratios[std::string(to_string(kDirections[i]))] = r;
    }
    ratios["overall"] = J{{"speed", opt<J>(s.overall_speed_ratio)},
                          {"success", opt<J>(s.overall_success_ratio)}};
    j["ratios"] = ratios;
    J tests;
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        tests["duration_" + std::string(to_string(kDirections[i]))] =
            comparison_json(s.duration_tests[i]);
    }
    tests["success"] = comparison_json(s.success_test);
    j["t_tests"] = tests;
    j["chance"] = J{{"log10", s.chance.log10}, {"probability", s.chance.probability}};
    return j.dump(2) + "\n";
}

void write_duration_table(std::ostream& out, const std::vector<TrialRecord>& hand,
                          const std::vector<TrialRecord>& neural, double decoder_hz) {
    const auto old = out.precision(17);
    out << "mode,trial_id,direction,outcome,duration_s\n";
    for (auto [name, trials] : {std::pair{"hand", &hand}, std::pair{"neural", &neural}}) {
        for (const auto& t : *trials) {
            out << name << ',' << t.id << ',' << to_string(t.direction) << ','
                << to_string(t.outcome) << ',' << t.duration_ticks / decoder_hz << '\n';
        }
    }
    out.precision(old);
}

BudgetResult budget(const BudgetSpec& spec) {
    BudgetResult r;
    r.raw_bps = spec.electrodes * spec.sampling_hz * spec.adc_bits;
    r.decoded_bps = spec.dof * spec.cmd_bits * spec.cmd_rate_hz;
    // Sum in nW so the total is a single correctly rounded division.
    const double feature_nw = spec.electrodes * spec.feature_nw_per_channel;
    r.feature_uw = feature_nw / 1000.0;
    r.total_added_uw = (feature_nw + spec.decoder_uw * 1000.0) / 1000.0;
    if (r.raw_bps > 0.0 && r.decoded_bps > 0.0) r.ratio = r.raw_bps / r.decoded_bps;
    return r;
}

}  // namespace neuroloop
