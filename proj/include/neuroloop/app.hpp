#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neuroloop/config.hpp"
#include "neuroloop/metrics.hpp"

namespace neuroloop {

struct SessionOutcome {
    std::string name;
    SessionMode mode = SessionMode::PassiveObservation;
    int trials = 0;
    int successes = 0;
};

struct TrainOutputs {
    std::vector<SessionOutcome> sessions;
    std::filesystem::path manifest;
};

/// Run the training paradigm and write into `out`:
/// model_int.json, model_f.json, session_<i>.jsonl and manifest.json.
TrainOutputs run_train(const RunConfig& config, const std::filesystem::path& out,
                       bool realtime = false);

struct BenchmarkOutputs {
    std::vector<SessionOutcome> sessions;
    BenchmarkSummary summary;
};

/// Hand (scripted) and neural sessions of `config.benchmark_trials` trials
/// each. Writes hand.jsonl, neural.jsonl, benchmark_manifest.json and the
/// report files (see write_report).
BenchmarkOutputs run_benchmark(const RunConfig& config, const ElmModel& model,
                               const std::string& model_path, const std::filesystem::path& out,
                               bool realtime = false);

/// summary.csv, summary.json and durations.csv.
BenchmarkSummary write_report(const std::vector<TrialRecord>& hand,
                              const std::vector<TrialRecord>& neural, const TrialConfig& task,
                              const std::filesystem::path& out);

std::vector<TrialRecord> load_trials(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

std::string budget_table(const BudgetSpec& spec, const BudgetResult& result);

}  // namespace neuroloop
