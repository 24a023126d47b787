#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neuroloop/task.hpp"

namespace neuroloop {

struct ChanceLevel {
    double log10 = 0.0;
    double probability = 1.0;  // clamped to 0 below 1e-300
};

/// (1 / n_classes)^(match_fraction * n_steps): the probability that uniform
/// random decoding matches ground truth on the required share of ticks.
ChanceLevel chance_trial_success(int n_classes, double match_fraction, int n_steps);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double dof = 0.0;
};

/// Unpaired two-sample t-test, two-sided. Pooled variance by default,
/// Welch's unequal-variance form when `welch` is set. Throws NumericError
/// when the pooled variance is zero.
TTestResult t_test_unpaired(std::span<const double> a, std::span<const double> b,
                            bool welch = false);

inline constexpr double kSignificanceLevel = 0.01;

struct DirectionStats {
    int n_trials = 0;
    int n_success = 0;
    std::optional<double> mean_duration;  // seconds, successful trials only
    std::optional<double> std_duration;   // sample std, needs >= 2 successes
    std::vector<double> durations;        // seconds, successful trials only

    double success_rate() const { return n_trials ? double(n_success) / n_trials : 0.0; }
};

struct Comparison {
    std::optional<TTestResult> test;
    std::string note;  // "identical", "degenerate", "insufficient" or empty

    bool significant() const { return test && test->p <= kSignificanceLevel; }
};

inline constexpr std::array<Command, 3> kDirections{Command::Forward, Command::Left,
                                                    Command::Right};

struct ModeSummary {
    std::array<DirectionStats, 3> by_direction;  // ordered as kDirections
    DirectionStats overall;
};

struct BenchmarkSummary {
    ModeSummary hand;
    ModeSummary neural;
    std::array<std::optional<double>, 3> speed_ratio;    // hand mean / neural mean
    std::array<std::optional<double>, 3> success_ratio;  // neural rate / hand rate
    std::optional<double> overall_speed_ratio;
    std::optional<double> overall_success_ratio;
    std::array<Comparison, 3> duration_tests;
    Comparison success_test;
    ChanceLevel chance;
};

/// Requires at least one trial per direction in each mode.
BenchmarkSummary summarize(const std::vector<TrialRecord>& hand,
                           const std::vector<TrialRecord>& neural, double decoder_hz = 10.0,
                           double match_fraction = 0.7, int max_ticks = 130);

/// Share of ticks whose decoded command equals the oracle command. Empty
/// when the trial has no decoded commands.
std::optional<double> match_fraction(const TrialRecord& trial);

void write_summary_csv(std::ostream& out, const BenchmarkSummary& s);
std::string summary_to_json(const BenchmarkSummary& s);
void write_duration_table(std::ostream& out, const std::vector<TrialRecord>& hand,
                          const std::vector<TrialRecord>& neural, double decoder_hz = 10.0);

struct BudgetSpec {
    double electrodes = 100;
    double sampling_hz = 20000;
    double adc_bits = 12;
    double dof = 6;
    double cmd_bits = 10;
    double cmd_rate_hz = 50;
    double feature_nw_per_channel = 40;
    double decoder_uw = 0.71;
};

struct BudgetResult {
    double raw_bps = 0;
    double decoded_bps = 0;
    double feature_uw = 0;
    double total_added_uw = 0;
    std::optional<double> ratio;  // raw / decoded; empty when either is zero
};

BudgetResult budget(const BudgetSpec& spec);

}  // namespace neuroloop
