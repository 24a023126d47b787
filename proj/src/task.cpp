#include "neuroloop/task.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace neuroloop {

namespace {

constexpr double kEps = 1e-9;

int integral_ticks(double seconds, double hz, const char* what) {
    const double ticks = seconds * hz;
    const double rounded = std::round(ticks);
    if (std::abs(ticks - rounded) > 1e-9) {
        throw InvalidArgument(std::string("trial config: ") + what +
                              " x d_f must be an integer tick count");
    }
    return static_cast<int>(rounded);
}

}  // namespace

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Running: return "Running";
        case Phase::Succeeded: return "Succeeded";
        case Phase::Failed: return "Failed";
    }
    return "Running";
}

std::optional<Phase> phase_from_string(std::string_view s) {
    if (s == "Running") return Phase::Running;
    if (s == "Succeeded") return Phase::Succeeded;
    if (s == "Failed") return Phase::Failed;
    return std::nullopt;
}

int TrialConfig::max_ticks() const { return integral_ticks(timeout, decoder_hz, "timeout"); }

int TrialConfig::hold_ticks_required() const {
    return integral_ticks(hold, decoder_hz, "hold");
}

void TrialConfig::validate() const {
    if (!(decoder_hz > 0.0)) throw InvalidArgument("trial config: d_f must be > 0");
    if (!(target_side > 0.0) || !(step > 0.0) || !(target_distance >= 0.0)) {
        throw InvalidArgument("trial config: geometry must be positive");
    }
    if (max_ticks() < 1) throw InvalidArgument("trial config: timeout must span >= 1 tick");
    if (hold_ticks_required() < 1) throw InvalidArgument("trial config: hold must span >= 1 tick");
}

bool ArenaState::inside_target() const {
    const double half = target_side / 2.0 + kEps;
    return std::abs(x - target_x) <= half && std::abs(y - target_y) <= half;
}

ArenaState place_target(const TrialConfig& config, Command direction) {
    ArenaState s;
    s.target_side = config.target_side;
    s.direction = direction;
    switch (direction) {
        case Command::Forward: s.target_y = config.target_distance; break;
        case Command::Right: s.target_x = config.target_distance; break;
        case Command::Left: s.target_x = -config.target_distance; break;
        case Command::Stop: throw InvalidArgument("Stop is not a target direction");
    }
    return s;
}

ArenaState spawn_trial(const TrialConfig& config, DirectionSource& source) {
    static constexpr Command kPlacements[] = {Command::Forward, Command::Right, Command::Left};
    std::uniform_int_distribution<int> pick(0, 2);
    return place_target(config, kPlacements[pick(source)]);
}

ArenaState step(const ArenaState& state, Command cmd, const TrialConfig& config) {
    if (state.phase != Phase::Running) throw InvalidStateError("step: trial already finished");
    ArenaState next = state;
    if (config.rotation) {
        switch (cmd) {
            case Command::Forward: {
                static constexpr int dx[] = {0, 1, 0, -1};
                static constexpr int dy[] = {1, 0, -1, 0};
                next.x += dx[next.heading] * config.step;
                next.y += dy[next.heading] * config.step;
                break;
            }
            case Command::Right: next.heading = (next.heading + 1) % 4; break;
            case Command::Left: next.heading = (next.heading + 3) % 4; break;
            case Command::Stop: break;
        }
    } else {
        switch (cmd) {
            case Command::Forward: next.y += config.step; break;
            case Command::Right: next.x += config.step; break;
            case Command::Left: next.x -= config.step; break;
            case Command::Stop: break;
        }
    }
    ++next.tick;
    next.hold_ticks = next.inside_target() ? next.hold_ticks + 1 : 0;
    if (next.hold_ticks >= config.hold_ticks_required()) {
        next.phase = Phase::Succeeded;
    } else if (next.tick >= config.max_ticks()) {
        next.phase = Phase::Failed;
    }
    return next;
}

Command oracle_policy(const ArenaState& state, const TrialConfig& config) {
    if (state.inside_target()) return Command::Stop;
    const double dx = state.target_x - state.x;
    const double dy = state.target_y - state.y;

    // The avatar cannot move backwards, so a y overshoot is unrecoverable
    // and only the x axis is worth resolving.
    Command want = Command::Stop;
    if (dy > kEps && std::abs(dy) >= std::abs(dx)) {
        want = Command::Forward;
    } else if (std::abs(dx) > kEps) {
        want = dx > 0 ? Command::Right : Command::Left;
    } else if (dy > kEps) {
        want = Command::Forward;
    }
    if (!config.rotation || want == Command::Stop) return want;

    const int goal = want == Command::Forward ? 0 : want == Command::Right ? 1 : 3;
    if (state.heading == goal) return Command::Forward;
    return (goal - state.heading + 4) % 4 == 1 ? Command::Right : Command::Left;
}

ArenaState replay(const TrialRecord& record, const TrialConfig& config) {
    ArenaState s = place_target(config, record.direction);
    for (const auto& e : record.ticks) {
        if (s.phase != Phase::Running) break;
        s = step(s, e.executed, config);
    }
    return s;
}

std::string trial_to_json(const TrialRecord& record) {
    nlohmann::ordered_json j;
    j["id"] = record.id;
    j["dir"] = to_string(record.direction);
    auto ticks = nlohmann::ordered_json::array();
    for (const auto& e : record.ticks) {
        nlohmann::ordered_json t;
        t["k"] = e.k;
        if (e.decoded) {
            t["cmd_dec"] = to_string(*e.decoded);
        } else {
            t["cmd_dec"] = nullptr;
        }
        t["cmd_exec"] = to_string(e.executed);
        t["cmd_oracle"] = to_string(e.oracle);
        t["x"] = e.x;
        t["y"] = e.y;
        ticks.push_back(std::move(t));
    }
    j["ticks"] = std::move(ticks);
    j["outcome"] = to_string(record.outcome);
    j["dur"] = record.duration_ticks;
    return j.dump();
}

namespace {

Command parse_command(const nlohmann::json& j, const char* field) {
    auto c = command_from_string(j.at(field).get<std::string>());
    if (!c) throw InvalidArgument(std::string("trial log: bad command in '") + field + "'");
    return *c;
}

}  // namespace

TrialRecord trial_from_json(const std::string& line) {
    try {
        auto j = nlohmann::json::parse(line);
        TrialRecord r;
        r.id = j.at("id").get<int>();
        r.direction = parse_command(j, "dir");
        for (const auto& t : j.at("ticks")) {
            TickEntry e;
            e.k = t.at("k").get<int>();
            if (!t.at("cmd_dec").is_null()) e.decoded = parse_command(t, "cmd_dec");
            e.executed = parse_command(t, "cmd_exec");
            e.oracle = parse_command(t, "cmd_oracle");
            e.x = t.at("x").get<double>();
            e.y = t.at("y").get<double>();
            r.ticks.push_back(std::move(e));
        }
        auto outcome = phase_from_string(j.at("outcome").get<std::string>());
        if (!outcome) throw InvalidArgument("trial log: bad outcome");
        r.outcome = *outcome;
        r.duration_ticks = j.at("dur").get<int>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("trial log: ") + e.what());
    }
}

void write_trials_jsonl(std::ostream& out, const std::vector<TrialRecord>& trials) {
    for (const auto& t : trials) out << trial_to_json(t) << '\n';
}

std::vector<TrialRecord> read_trials_jsonl(std::istream& in) {
    std::vector<TrialRecord> trials;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            trials.push_back(trial_from_json(line));
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return trials;
}

}  // namespace neuroloop
