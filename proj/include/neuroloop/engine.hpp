#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neuroloop/elm.hpp"
#include "neuroloop/features.hpp"
#include "neuroloop/frontend.hpp"
#include "neuroloop/task.hpp"

namespace neuroloop {

enum class SessionMode : std::uint8_t {
    PassiveObservation,
    Assisted,
    NeuralControl,
    HandScripted,
    HandInteractive,
};

std::string_view to_string(SessionMode m);
std::optional<SessionMode> session_mode_from_string(std::string_view s);

struct SessionConfig {
    SessionMode mode = SessionMode::PassiveObservation;
    int trials = 20;
    double assistance = 0.5;  // only read in Assisted mode
    std::uint64_t seed = 0;
    bool allow_untrained = false;

    void validate() const;
};

/// Everything about the simulated subject and arena that stays fixed across
/// sessions.
struct EngineConfig {
    EncoderModel encoder;
    FeatureConfig features;
    TrialConfig task;
    int reaction_lag_ticks = 1;
    /// Baseline-only activity between trials; defaults to one look-back
    /// window so a new trial never sees the previous trial's hold.
    std::optional<int> rest_ticks_between_trials;

    int rest_ticks() const;
    void validate() const;
};

/// Joystick surrogate for HandInteractive sessions.
class OperatorInput {
public:
    virtual ~OperatorInput() = default;
    virtual bool connected() const = 0;
    /// Command held at the sampling point of the current tick.
    virtual Command sample() = 0;
};

struct TickSnapshot {
    SessionMode mode = SessionMode::PassiveObservation;
    int trial_index = 0;
    ArenaState state;
    std::optional<Command> decoded;
    std::optional<Command> executed;
    std::optional<Command> oracle;
    int successes = 0;
    int trials_done = 0;
};

struct SessionHooks {
    OperatorInput* input = nullptr;
    std::function<void(const TickSnapshot&)> on_tick;  // also called once at each spawn
    std::optional<std::chrono::nanoseconds> pacing;    // wall-clock tick period
    std::function<bool()> aborted;
    std::function<void()> wait_while_paused;
};

using AssistSource = std::mt19937_64;

/// Oracle with probability p, else the decoded command. Always consumes
/// exactly one uniform draw.
Command blend_assist(Command decoded, Command oracle, double p, AssistSource& draw);

/// One session's closed loop: encode -> extract -> decode -> act, at d_f.
class ClosedLoop {
public:
    ClosedLoop(const EngineConfig& engine, const SessionConfig& session,
               const ElmModel* model, OperatorInput* input = nullptr);

    /// Spawn the next trial; the previous one must be finished.
    void begin_trial(int id);
    /// Run one full pipeline pass and return the executed command.
    Command run_tick();

    bool trial_running() const { return state_.phase == Phase::Running && started_; }
    const ArenaState& state() const { return state_; }
    const TrialRecord& record() const { return record_; }
    TrialRecord finish_trial();
    std::int64_t session_tick() const { return session_tick_; }

    /// Mark the running trial Failed (abort or runtime error).
    void abort_trial(const std::string& reason);

private:
    std::optional<Command> intent_for_tick(int n) const;
    int warmup_ticks() const;
    FeatureVector advance_subject(std::optional<Command> intent);

    const EngineConfig& engine_;
    SessionConfig session_;
    const ElmModel* model_;
    OperatorInput* input_;
    SpikeGenerator spikes_;
    AssistSource assist_;
    DirectionSource directions_;
    FeatureExtractor extractor_;
    std::int64_t session_tick_ = 0;
    ArenaState state_;
    TrialRecord record_;
    std::vector<Command> oracle_history_;
    bool started_ = false;
    int trials_begun_ = 0;
};

std::vector<TrialRecord> run_session(const EngineConfig& engine, const SessionConfig& session,
                                     const ElmModel* model, const SessionHooks& hooks = {});

struct TrainingRows {
    std::vector<std::vector<double>> features;
    std::vector<Command> labels;
};

/// Per-tick (features, oracle label) rows from successful trials only.
TrainingRows collect_training_rows(const std::vector<TrialRecord>& trials);

struct TrainingPipelineState {
    std::vector<std::vector<TrialRecord>> sessions;
    std::optional<ElmModel> intermediate;  // M_int, sessions 1-2
    std::optional<ElmModel> final_model;   // M_f, sessions 1-3
};

struct PipelinePlan {
    int passive_sessions = 2;
    int trials_per_session = 20;
    double assistance = 0.5;
    double lambda = 0.1;
};

TrainingPipelineState train_pipeline(const EngineConfig& engine, const ElmModel& fresh,
                                     std::uint64_t master_seed, const PipelinePlan& plan = {},
                                     const SessionHooks& hooks = {});

}  // namespace neuroloop
