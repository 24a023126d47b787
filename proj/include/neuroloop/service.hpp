#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "neuroloop/engine.hpp"

namespace neuroloop {

/// {"type":"state", ...} text for one snapshot.
std::string state_frame_json(const TickSnapshot& snap, std::uint64_t session_id);
std::string error_frame_json(const std::string& msg);

/// Required fields and types of a server frame ("state", "role" or "error").
/// Unknown extra fields are accepted.
bool frame_schema_check(const std::string& frame);

/// Held-key command store shared by the network side (writer) and the
/// session loop (reader, once per tick).
class CommandMailbox : public OperatorInput {
public:
    bool connected() const override;
    Command sample() override;

    void set_connected(bool c);
    void hold(Command c);
    void release() { hold(Command::Stop); }

private:
    mutable std::mutex mu_;
    bool connected_ = false;
    Command held_ = Command::Stop;
};

struct ServiceOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8090;  // 0 picks a free port
    std::size_t send_queue_limit = 64;
};

struct ServedSession {
    SessionConfig session;
    const ElmModel* model = nullptr;
    std::uint64_t id = 1;
    std::optional<std::chrono::nanoseconds> tick_period;  // defaults to 1 / d_f
    /// Block until the operator sends {"type":"control","op":"start"}.
    /// Interactive sessions always wait.
    bool wait_for_start = false;
};

/// WebSocket bridge: broadcasts one state frame per tick and routes operator
/// commands to the running session. Network I/O runs on an internal thread;
/// run() drives the session loop on the calling thread.
class LoopService {
public:
    /// Binds immediately; throws std::runtime_error if the port is taken.
    explicit LoopService(ServiceOptions options = {});
    ~LoopService();
    LoopService(const LoopService&) = delete;
    LoopService& operator=(const LoopService&) = delete;

    unsigned short port() const;
    std::size_t clients() const;

    std::vector<TrialRecord> run(const EngineConfig& engine, const ServedSession& served);

    /// Unblocks any wait and aborts the running session.
    void shutdown();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace neuroloop
