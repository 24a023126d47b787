#include "neuroloop/service.hpp"

#include <algorithm>
#include <deque>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace neuroloop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

namespace {

OJson command_or_null(const std::optional<Command>& c) {
    return c ? OJson(std::string(to_string(*c))) : OJson(nullptr);
}

}  // namespace

std::string state_frame_json(const TickSnapshot& s, std::uint64_t session_id) {
    OJson j;
    j["type"] = "state";
    j["session"] = session_id;
    j["mode"] = to_string(s.mode);
    j["trial"] = s.trial_index;
    j["tick"] = s.state.tick;
    j["avatar"] = OJson{{"x", s.state.x}, {"y", s.state.y}};
    j["target"] =
        OJson{{"x", s.state.target_x}, {"y", s.state.target_y}, {"side", s.state.target_side}};
    j["phase"] = to_string(s.state.phase);
    j["hold_ticks"] = s.state.hold_ticks;
    j["cmd_exec"] = command_or_null(s.executed);
    j["cmd_dec"] = command_or_null(s.decoded);
    j["cmd_oracle"] = command_or_null(s.oracle);
    j["successes"] = s.successes;
    j["trials_done"] = s.trials_done;
    return j.dump();
}

std::string error_frame_json(const std::string& msg) {
    return OJson{{"type", "error"}, {"msg", msg}}.dump();
}

bool frame_schema_check(const std::string& frame) {
    const Json j = Json::parse(frame, nullptr, false);
    if (!j.is_object()) return false;
    auto has = [&](const Json& obj, const char* key, auto pred) {
        auto it = obj.find(key);
        return it != obj.end() && pred(*it);
    };
    auto is_int = [](const Json& v) { return v.is_number_integer(); };
    auto is_num = [](const Json& v) { return v.is_number(); };
    auto is_str = [](const Json& v) { return v.is_string(); };
    auto is_cmd = [](const Json& v) {
        return v.is_null() || (v.is_string() && command_from_string(v.get<std::string>()));
    };
    if (!has(j, "type", is_str)) return false;
    const auto type = j["type"].get<std::string>();
    if (type == "error") return has(j, "msg", is_str);
    if (type == "role") {
        return has(j, "role", [](const Json& v) {
            return v == "operator" || v == "observer";
        });
    }
    if (type != "state") return false;

    const bool point_ok =
        has(j, "avatar", [&](const Json& a) {
            return a.is_object() && has(a, "x", is_num) && has(a, "y", is_num);
        }) &&
        has(j, "target", [&](const Json& t) {
            return t.is_object() && has(t, "x", is_num) && has(t, "y", is_num) &&
                   has(t, "side", is_num);
        });
    return point_ok && has(j, "session", is_int) &&
           has(j, "mode", [](const Json& v) {
               return v.is_string() && session_mode_from_string(v.get<std::string>());
           }) &&
           has(j, "trial", is_int) && has(j, "tick", is_int) &&
           has(j, "phase", [](const Json& v) {
               return v.is_string() && phase_from_string(v.get<std::string>());
           }) &&
           has(j, "hold_ticks", is_int) && has(j, "cmd_exec", is_cmd) &&
           has(j, "cmd_dec", is_cmd) && has(j, "cmd_oracle", is_cmd) &&
           has(j, "successes", is_int) && has(j, "trials_done", is_int);
}

bool CommandMailbox::connected() const {
    std::lock_guard lock(mu_);
    return connected_;
}

Command CommandMailbox::sample() {
    std::lock_guard lock(mu_);
    return held_;
}

void CommandMailbox::set_connected(bool c) {
    std::lock_guard lock(mu_);
    connected_ = c;
    if (!c) held_ = Command::Stop;
}

void CommandMailbox::hold(Command c) {
    std::lock_guard lock(mu_);
    held_ = c;
}

namespace {

class Connection;

}  // namespace

struct LoopService::Impl {
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    ServiceOptions options;
    std::thread io_thread;

    // io thread only
    std::vector<std::shared_ptr<Connection>> conns;
    Connection* operator_conn = nullptr;
    std::atomic<std::size_t> n_clients{0};

    CommandMailbox mailbox;

    std::mutex ctl_mu;
    std::condition_variable ctl_cv;
    bool started = false;
    bool paused = false;
    bool aborted = false;
    bool stopping = false;
    std::atomic<bool> interactive{false};

    void accept();
    void add(const std::shared_ptr<Connection>& c);
    void remove(Connection* c);
    void handle(Connection& c, const std::string& text);
    void publish(std::string frame);
    void control(const std::string& op);
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, LoopService::Impl& svc)
        : ws_(std::move(socket)), svc_(svc) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->svc_.add(self);
            self->read();
        });
    }

    void send(std::shared_ptr<const std::string> msg) {
        if (closed_) return;
        if (queue_.size() >= svc_.options.send_queue_limit) {
            // Drop the oldest frame that is not already on the wire.
            queue_.erase(queue_.begin() + (writing_ ? 1 : 0));
        }
        queue_.push_back(std::move(msg));
        if (!writing_) write();
    }

    void close() {
        closed_ = true;
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->fail();
                return;
            }
            auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->svc_.handle(*self, text);
            self->read();
        });
    }

    void write() {
        if (queue_.empty() || closed_) return;
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            self->writing_ = false;
                            if (ec) {
                                self->fail();
                                return;
                            }
                            self->queue_.pop_front();
                            self->write();
                        });
    }

    void fail() {
        if (closed_) return;
        closed_ = true;
        svc_.remove(this);
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    LoopService::Impl& svc_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool writing_ = false;
    bool closed_ = false;
};

std::shared_ptr<const std::string> role_frame(bool op) {
    return std::make_shared<const std::string>(
        OJson{{"type", "role"}, {"role", op ? "operator" : "observer"}}.dump());
}

}  // namespace

void LoopService::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<Connection>(std::move(socket), *this)->start();
        accept();
    });
}

void LoopService::Impl::add(const std::shared_ptr<Connection>& c) {
    conns.push_back(c);
    n_clients = conns.size();
    const bool op = operator_conn == nullptr;
    if (op) {
        operator_conn = c.get();
        mailbox.set_connected(true);
    }
    spdlog::info("client connected as {}", op ? "operator" : "observer");
    c->send(role_frame(op));
}

void LoopService::Impl::remove(Connection* c) {
    auto it = std::find_if(conns.begin(), conns.end(),
                           [&](const auto& p) { return p.get() == c; });
    if (it == conns.end()) return;
    conns.erase(it);
    n_clients = conns.size();
    if (operator_conn == c) {
        operator_conn = nullptr;
        mailbox.set_connected(false);
        if (!conns.empty()) {
            operator_conn = conns.front().get();
            mailbox.set_connected(true);
            conns.front()->send(role_frame(true));
        }
        spdlog::info("operator disconnected");
    }
}

void LoopService::Impl::handle(Connection& c, const std::string& text) {
    auto reply = [&](const std::string& msg) {
        c.send(std::make_shared<const std::string>(error_frame_json(msg)));
    };
    const Json j = Json::parse(text, nullptr, false);
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        reply("malformed message: expected a JSON object with a string \"type\"");
        return;
    }
    const auto type = j["type"].get<std::string>();
    const bool is_operator = operator_conn == &c;

    if (type == "cmd" || type == "release") {
        std::optional<Command> cmd = Command::Stop;
        if (type == "cmd") {
            cmd = j.contains("cmd") && j["cmd"].is_string()
                      ? command_from_string(j["cmd"].get<std::string>())
                      : std::nullopt;
            if (!cmd) {
                reply("malformed message: \"cmd\" must be one of Forward, Right, Left, Stop");
                return;
            }
        }
        if (!is_operator) {
            reply("role denied: observers cannot send commands");
            return;
        }
        if (!interactive) {
            reply("commands are only honored in interactive hand-control sessions");
            return;
        }
        mailbox.hold(*cmd);
    } else if (type == "control") {
        const auto op = j.contains("op") && j["op"].is_string() ? j["op"].get<std::string>() : "";
        if (op != "start" && op != "pause" && op != "abort") {
            reply("malformed message: \"op\" must be start, pause or abort");
            return;
        }
        if (!is_operator) {
            reply("role denied: observers cannot control the session");
            return;
        }
        control(op);
    } else {
        reply("malformed message: unknown type \"" + type + "\"");
    }
}

void LoopService::Impl::control(const std::string& op) {
    {
        std::lock_guard lock(ctl_mu);
        if (op == "start") {
            started = true;
            paused = false;
        } else if (op == "pause") {
            paused = true;
        } else {
            aborted = true;
        }
    }
    ctl_cv.notify_all();
}

void LoopService::Impl::publish(std::string frame) {
    net::post(ioc, [this, msg = std::make_shared<const std::string>(std::move(frame))] {
        for (const auto& c : conns) c->send(msg);
    });
}

LoopService::LoopService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = options;
    if (impl_->options.send_queue_limit == 0) impl_->options.send_queue_limit = 1;
    try {
        const tcp::endpoint ep(net::ip::make_address(options.address), options.port);
        impl_->acceptor.open(ep.protocol());
        impl_->acceptor.set_option(net::socket_base::reuse_address(true));
        impl_->acceptor.bind(ep);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw std::runtime_error("cannot listen on " + options.address + ":" +
                                 std::to_string(options.port) + ": " + e.code().message());
    }
    impl_->accept();
    impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
}

LoopService::~LoopService() {
    shutdown();
    net::post(impl_->ioc, [impl = impl_.get()] {
        beast::error_code ec;
        impl->acceptor.close(ec);
        for (const auto& c : impl->conns) c->close();
        impl->conns.clear();
        impl->ioc.stop();
    });
    if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

unsigned short LoopService::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t LoopService::clients() const { return impl_->n_clients; }

void LoopService::shutdown() {
    {
        std::lock_guard lock(impl_->ctl_mu);
        impl_->stopping = true;
    }
    impl_->ctl_cv.notify_all();
}

std::vector<TrialRecord> LoopService::run(const EngineConfig& engine, const ServedSession& served) {
    auto& s = *impl_;
    const bool interactive = served.session.mode == SessionMode::HandInteractive;
    s.interactive = interactive;

    if (interactive || served.wait_for_start) {
        spdlog::info("waiting for the operator to start the session");
        std::unique_lock lock(s.ctl_mu);
        s.ctl_cv.wait(lock, [&] { return s.started || s.stopping; });
        if (s.stopping) return {};
    }

    SessionHooks hooks;
    hooks.input = interactive ? &s.mailbox : nullptr;
    hooks.pacing = served.tick_period.value_or(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(engine.features.period())));
    hooks.on_tick = [&](const TickSnapshot& snap) {
        s.publish(state_frame_json(snap, served.id));
    };
    hooks.aborted = [&] {
        std::lock_guard lock(s.ctl_mu);
        return s.aborted || s.stopping;
    };
    hooks.wait_while_paused = [&] {
        std::unique_lock lock(s.ctl_mu);
        s.ctl_cv.wait(lock, [&] { return !s.paused || s.aborted || s.stopping; });
    };

    std::vector<TrialRecord> records;
    try {
        records = run_session(engine, served.session, served.model, hooks);
    } catch (...) {
        s.interactive = false;
        throw;
    }

    s.interactive = false;
    s.mailbox.release();
    std::lock_guard lock(s.ctl_mu);
    s.started = false;
    s.paused = false;
    s.aborted = false;
    return records;
}

}  // namespace neuroloop
