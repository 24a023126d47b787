#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neuroloop/common.hpp"

namespace neuroloop {

enum class Phase : std::uint8_t { Running, Succeeded, Failed };

std::string_view to_string(Phase p);
std::optional<Phase> phase_from_string(std::string_view s);

struct TrialConfig {
    double decoder_hz = 10.0;
    double timeout = 13.0;        // s
    double hold = 1.5;            // s
    double target_side = 2.0;     // cm
    double target_distance = 10.0;  // cm
    double step = 1.0;            // cm per tick
    bool rotation = false;        // Left/Right turn the heading instead of translating

    int max_ticks() const;
    int hold_ticks_required() const;
    void validate() const;
};

struct ArenaState {
    double x = 0.0;
    double y = 0.0;
    double target_x = 0.0;
    double target_y = 0.0;
    double target_side = 2.0;
    Command direction = Command::Forward;  // which of the three placements
    int heading = 0;                       // quarter turns clockwise from +y (rotation mode)
    int tick = 0;
    int hold_ticks = 0;
    Phase phase = Phase::Running;

    bool inside_target() const;
};

using DirectionSource = std::mt19937_64;

/// Target centre for one of the three placements (Forward 90 deg,
/// Right 0 deg, Left 180 deg).
ArenaState place_target(const TrialConfig& config, Command direction);

/// Avatar at the origin, target direction drawn uniformly from the source.
ArenaState spawn_trial(const TrialConfig& config, DirectionSource& source);

ArenaState step(const ArenaState& state, Command cmd, const TrialConfig& config);

Command oracle_policy(const ArenaState& state, const TrialConfig& config);

struct TickEntry {
    int k = 0;
    std::vector<double> features;  // in-memory only, not serialized
    std::optional<Command> decoded;
    Command executed = Command::Stop;
    Command oracle = Command::Stop;
    std::optional<Command> intent;  // in-memory only; empty while the subject rests
    double x = 0.0;
    double y = 0.0;
};

struct TrialRecord {
    int id = 0;
    Command direction = Command::Forward;
    std::vector<TickEntry> ticks;
    Phase outcome = Phase::Running;
    int duration_ticks = 0;
    std::string diagnostic;  // set when the trial was aborted by an error

    bool succeeded() const { return outcome == Phase::Succeeded; }
};

/// Re-run the executed commands from the recorded spawn.
ArenaState replay(const TrialRecord& record, const TrialConfig& config);

std::string trial_to_json(const TrialRecord& record);
TrialRecord trial_from_json(const std::string& line);
void write_trials_jsonl(std::ostream& out, const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> read_trials_jsonl(std::istream& in);

}  // namespace neuroloop
