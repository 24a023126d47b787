#include "neuroloop/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace neuroloop {

namespace {

using Json = nlohmann::json;

std::size_t line_at(const std::string& text, std::size_t pos) {
    pos = std::min(pos, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(),
                                                   text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// Walks the raw text key by key to find where a JSON path is spelled out.
std::optional<std::size_t> locate(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& key : path) {
        auto at = text.find('"' + key + '"', pos);
        if (at == std::string::npos) break;
        pos = at + key.size() + 2;
        found = true;
    }
    if (!found) return std::nullopt;
    return line_at(text, pos);
}

class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
        std::string pointer;
        for (const auto& p : path) pointer += "/" + p;
        auto line = locate(text_, path);
        throw ConfigError((line ? "line " + std::to_string(*line) + ": " : std::string()) +
                          (pointer.empty() ? "/" : pointer) + ": " + msg);
    }

    void allow_keys(const Json& obj, std::vector<std::string> path,
                    std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(path, "expected an object");
        for (const auto& [key, _] : obj.items()) {
            if (std::none_of(allowed.begin(), allowed.end(),
                             [&](const char* a) { return key == a; })) {
                path.push_back(key);
                fail(path, "unknown key");
            }
        }
    }

    template <typename T>
    void read(const Json& obj, std::vector<std::string> path, const char* key, T& out) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        path.emplace_back(key);
        check_type<T>(*it, path);
        try {
            out = it->get<T>();
        } catch (const Json::exception& e) {
            fail(path, e.what());
        }
    }

    template <typename T>
    void read_opt(const Json& obj, std::vector<std::string> path, const char* key,
                  std::optional<T>& out) const {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        T v{};
        read(obj, std::move(path), key, v);
        out = v;
    }

private:
    template <typename T>
    void check_type(const Json& v, const std::vector<std::string>& path) const {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(path, "expected a boolean");
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(path, "expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(path, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(path, "expected a string");
        }
    }

    const std::string& text_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("line " + std::to_string(line_at(text, e.byte > 0 ? e.byte - 1 : 0)) +
                          ": malformed JSON: " + e.what());
    }
    Reader rd(text);
    std::vector<std::string> root;
    if (doc.is_object() && doc.contains("config") && doc.contains("sessions")) {
        doc = doc["config"];
        root = {"config"};
    }
    rd.allow_keys(doc, root,
                  {"seed", "encoder", "features", "model", "task", "training", "benchmark", "out"});

    RunConfig c;
    rd.read(doc, root, "seed", c.seed);
    rd.read(doc, root, "out", c.out);

    auto sub = [&](const char* key) -> std::pair<const Json*, std::vector<std::string>> {
        auto path = root;
        path.emplace_back(key);
        auto it = doc.find(key);
        if (it == doc.end() || it->is_null()) return {nullptr, path};
        return {&*it, path};
    };

    if (auto [j, p] = sub("encoder"); j) {
        rd.allow_keys(*j, p, {"channels", "r0", "dr", "deterministic", "reaction_lag_ticks",
                              "rest_ticks", "permutation"});
        rd.read(*j, p, "channels", c.encoder.channels);
        rd.read(*j, p, "r0", c.encoder.r0);
        rd.read(*j, p, "dr", c.encoder.dr);
        rd.read(*j, p, "deterministic", c.encoder.deterministic);
        rd.read(*j, p, "reaction_lag_ticks", c.encoder.reaction_lag_ticks);
        rd.read_opt(*j, p, "rest_ticks", c.encoder.rest_ticks);
        if (j->contains("permutation") && !(*j)["permutation"].is_null()) {
            auto pp = p;
            pp.emplace_back("permutation");
            const auto& arr = (*j)["permutation"];
            if (!arr.is_array()) rd.fail(pp, "expected an array of channel indices");
            for (const auto& v : arr) {
                if (!v.is_number_unsigned()) rd.fail(pp, "expected non-negative integers");
                c.encoder.permutation.push_back(v.get<std::size_t>());
            }
        }
    }
    std::optional<std::size_t> feature_d;
    if (auto [j, p] = sub("features"); j) {
        rd.allow_keys(*j, p, {"D", "T_w", "d_f"});
        rd.read_opt(*j, p, "D", feature_d);
        rd.read(*j, p, "T_w", c.features.window);
        rd.read(*j, p, "d_f", c.features.decoder_hz);
    }
    if (auto [j, p] = sub("model"); j) {
        rd.allow_keys(*j, p, {"D", "L", "lambda", "analog"});
        rd.read_opt(*j, p, "D", c.model.inputs);
        rd.read(*j, p, "L", c.model.hidden);
        rd.read(*j, p, "lambda", c.model.lambda);
        auto it = j->find("analog");
        if (it != j->end()) {
            auto ap = p;
            ap.emplace_back("analog");
            if (it->is_null()) {
                c.model.analog.reset();
            } else {
                rd.allow_keys(*it, ap, {"enabled", "sigma_m", "counter_bits", "signed"});
                bool enabled = true;
                rd.read(*it, ap, "enabled", enabled);
                AnalogConfig a = c.model.analog.value_or(AnalogConfig{});
                rd.read(*it, ap, "sigma_m", a.sigma_m);
                rd.read(*it, ap, "counter_bits", a.counter_bits);
                rd.read(*it, ap, "signed", a.signed_weights);
                if (enabled) {
                    c.model.analog = a;
                } else {
                    c.model.analog.reset();
                }
            }
        }
    }
    if (auto [j, p] = sub("task"); j) {
        rd.allow_keys(*j, p, {"timeout", "hold", "target_side", "target_distance", "step",
                              "rotation"});
        rd.read(*j, p, "timeout", c.task.timeout);
        rd.read(*j, p, "hold", c.task.hold);
        rd.read(*j, p, "target_side", c.task.target_side);
        rd.read(*j, p, "target_distance", c.task.target_distance);
        rd.read(*j, p, "step", c.task.step);
        rd.read(*j, p, "rotation", c.task.rotation);
    }
    if (auto [j, p] = sub("training"); j) {
        rd.allow_keys(*j, p, {"passive_sessions", "trials_per_session", "assistance"});
        rd.read(*j, p, "passive_sessions", c.training.passive_sessions);
        rd.read(*j, p, "trials_per_session", c.training.trials_per_session);
        rd.read(*j, p, "assistance", c.training.assistance);
    }
    if (auto [j, p] = sub("benchmark"); j) {
        rd.allow_keys(*j, p, {"trials"});
        rd.read(*j, p, "trials", c.benchmark_trials);
    }

    c.features.channels = c.encoder.channels;
    c.task.decoder_hz = c.features.decoder_hz;
    c.training.lambda = c.model.lambda;

    auto at = [&](std::initializer_list<const char*> keys) {
        auto p = root;
        for (const char* k : keys) p.emplace_back(k);
        return p;
    };
    if (feature_d && *feature_d != c.encoder.channels) {
        rd.fail(at({"features", "D"}), "feature dimension D=" + std::to_string(*feature_d) +
                                           " does not match encoder channels=" +
                                           std::to_string(c.encoder.channels));
    }
    if (c.model.inputs && *c.model.inputs != c.encoder.channels) {
        rd.fail(at({"model", "D"}), "model input dimension D=" + std::to_string(*c.model.inputs) +
                                        " does not match encoder channels=" +
                                        std::to_string(c.encoder.channels));
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        // Messages starting with a JSON pointer get a line number attached.
        std::string msg = e.what();
        if (!msg.empty() && msg[0] == '/') {
            auto colon = msg.find(':');
            std::vector<std::string> path = root;
            std::stringstream ss(msg.substr(1, colon - 1));
            for (std::string part; std::getline(ss, part, '/');) path.push_back(part);
            if (auto line = locate(text, path)) {
                throw ConfigError("line " + std::to_string(*line) + ": " + msg);
            }
        }
        throw;
    }
    return c;
}

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    check(encoder.channels >= 1, "/encoder/channels: must be >= 1");
    check(model.hidden >= 1, "/model/L: must be >= 1");
    check(model.lambda >= 0.0, "/model/lambda: must be >= 0");
    check(training.passive_sessions >= 1, "/training/passive_sessions: must be >= 1");
    check(training.trials_per_session >= 1, "/training/trials_per_session: must be >= 1");
    check(training.assistance >= 0.0 && training.assistance <= 1.0,
          "/training/assistance: must lie in [0, 1]");
    check(benchmark_trials >= 1, "/benchmark/trials: must be >= 1");
    if (model.inputs) {
        check(*model.inputs == encoder.channels, "/model/D: does not match encoder channels");
    }
    auto section = [](const char* where, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(std::string(where) + ": " + e.what());
        }
    };
    const auto e = engine();
    section("/encoder", [&] { e.encoder.validate(); });
    section("/features", [&] { e.features.validate(); });
    section("/task", [&] { e.task.validate(); });
    section("/model/analog", [&] {
        if (model.analog) model.analog->validate();
    });
    section("/encoder", [&] { e.validate(); });
}

EngineConfig RunConfig::engine() const {
    EngineConfig e;
    e.encoder = EncoderModel::partitioned(encoder.channels, encoder.r0, encoder.dr,
                                          derive_seed(seed, "encoder"), encoder.deterministic,
                                          encoder.permutation);
    e.features = features;
    e.features.channels = encoder.channels;
    e.task = task;
    e.task.decoder_hz = features.decoder_hz;
    e.reaction_lag_ticks = encoder.reaction_lag_ticks;
    e.rest_ticks_between_trials = encoder.rest_ticks;
    return e;
}

ElmModel RunConfig::fresh_model() const {
    return init_model(encoder.channels, model.hidden, kNumCommands, derive_seed(seed, "model"),
                      model.analog);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    nlohmann::ordered_json enc;
    enc["channels"] = c.encoder.channels;
    enc["r0"] = c.encoder.r0;
    enc["dr"] = c.encoder.dr;
    enc["deterministic"] = c.encoder.deterministic;
    enc["reaction_lag_ticks"] = c.encoder.reaction_lag_ticks;
    enc["rest_ticks"] = c.encoder.rest_ticks ? nlohmann::ordered_json(*c.encoder.rest_ticks)
                                             : nlohmann::ordered_json(nullptr);
    enc["permutation"] = c.encoder.permutation.empty()
                             ? nlohmann::ordered_json(nullptr)
                             : nlohmann::ordered_json(c.encoder.permutation);
    j["encoder"] = enc;
    j["features"] = {{"D", c.encoder.channels}, {"T_w", c.features.window},
                     {"d_f", c.features.decoder_hz}};
    nlohmann::ordered_json model;
    model["D"] = c.encoder.channels;
    model["L"] = c.model.hidden;
    model["lambda"] = c.model.lambda;
    if (c.model.analog) {
        model["analog"] = {{"enabled", true},
                           {"sigma_m", c.model.analog->sigma_m},
                           {"counter_bits", c.model.analog->counter_bits},
                           {"signed", c.model.analog->signed_weights}};
    } else {
        model["analog"] = {{"enabled", false}};
    }
    j["model"] = model;
    j["task"] = {{"timeout", c.task.timeout},
                 {"hold", c.task.hold},
                 {"target_side", c.task.target_side},
                 {"target_distance", c.task.target_distance},
                 {"step", c.task.step},
                 {"rotation", c.task.rotation}};
    j["training"] = {{"passive_sessions", c.training.passive_sessions},
                     {"trials_per_session", c.training.trials_per_session},
                     {"assistance", c.training.assistance}};
    j["benchmark"] = {{"trials", c.benchmark_trials}};
    return j.dump(2);
}

}  // namespace neuroloop
