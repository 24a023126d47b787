#include "neuroloop/app.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace neuroloop {

namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<TrialRecord> load_trials(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read trial log " + path.string());
    try {
        return read_trials_jsonl(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

namespace {

std::string trials_text(const std::vector<TrialRecord>& trials) {
    std::ostringstream ss;
    write_trials_jsonl(ss, trials);
    return ss.str();
}

OJson encoder_json(const RunConfig& c, const EngineConfig& e) {
    OJson j;
    j["channels"] = c.encoder.channels;
    j["r0"] = c.encoder.r0;
    j["dr"] = c.encoder.dr;
    j["seed"] = e.encoder.seed;
    j["deterministic"] = c.encoder.deterministic;
    j["reaction_lag_ticks"] = e.reaction_lag_ticks;
    j["rest_ticks"] = e.rest_ticks();
    return j;
}

OJson feature_json(const FeatureConfig& f) {
    return OJson{{"D", f.channels}, {"T_w", f.window}, {"d_f", f.decoder_hz}};
}

OJson session_json(const RunConfig& c, const EngineConfig& e, const SessionConfig& s,
                   const std::string& model_path, const std::string& log_path) {
    OJson j;
    j["seed"] = s.seed;
    j["mode"] = to_string(s.mode);
    j["trials"] = s.trials;
    j["p"] = s.mode == SessionMode::Assisted ? OJson(s.assistance) : OJson(nullptr);
    j["decoder_model_path"] = model_path.empty() ? OJson(nullptr) : OJson(model_path);
    j["encoder_params"] = encoder_json(c, e);
    j["feature_params"] = feature_json(e.features);
    j["trial_log_path"] = log_path;
    return j;
}

int count_successes(const std::vector<TrialRecord>& trials) {
    int n = 0;
    for (const auto& t : trials) n += t.succeeded() ? 1 : 0;
    return n;
}

SessionHooks pacing_hooks(const EngineConfig& e, bool realtime) {
    SessionHooks h;
    if (realtime) {
        h.pacing = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(e.features.period()));
    }
    return h;
}

}  // namespace

TrainOutputs run_train(const RunConfig& config, const fs::path& out, bool realtime) {
    config.validate();
    fs::create_directories(out);
    const auto engine = config.engine();
    const auto fresh = config.fresh_model();

    spdlog::info("training: {} passive + 1 assisted session(s), {} trials each",
                 config.training.passive_sessions, config.training.trials_per_session);
    auto st = train_pipeline(engine, fresh, config.seed, config.training,
                             pacing_hooks(engine, realtime));

    write_text(out / "model_int.json", model_to_json(*st.intermediate) + "\n");
    write_text(out / "model_f.json", model_to_json(*st.final_model) + "\n");

    TrainOutputs result;
    OJson sessions = OJson::array();
    for (std::size_t i = 0; i < st.sessions.size(); ++i) {
        const bool assisted = i == st.sessions.size() - 1;
        SessionConfig s;
        s.mode = assisted ? SessionMode::Assisted : SessionMode::PassiveObservation;
        s.trials = config.training.trials_per_session;
        s.assistance = config.training.assistance;
        s.seed = derive_seed(config.seed, "session", i);
        const std::string log = "session_" + std::to_string(i + 1) + ".jsonl";
        write_text(out / log, trials_text(st.sessions[i]));
        sessions.push_back(
            session_json(config, engine, s, assisted ? "model_int.json" : "", log));
        result.sessions.push_back({"session_" + std::to_string(i + 1), s.mode, s.trials,
                                   count_successes(st.sessions[i])});
    }

    OJson manifest;
    manifest["config"] = OJson::parse(config_to_json(config));
    manifest["sessions"] = sessions;
    manifest["models"] = OJson{{"intermediate", "model_int.json"}, {"final", "model_f.json"}};
    result.manifest = out / "manifest.json";
    write_text(result.manifest, manifest.dump(2) + "\n");
    return result;
}

BenchmarkSummary write_report(const std::vector<TrialRecord>& hand,
                              const std::vector<TrialRecord>& neural, const TrialConfig& task,
                              const fs::path& out) {
    fs::create_directories(out);
    auto s = summarize(hand, neural, task.decoder_hz, 0.7, task.max_ticks());
    std::ostringstream csv;
    write_summary_csv(csv, s);
    write_text(out / "summary.csv", csv.str());
    write_text(out / "summary.json", summary_to_json(s));
    std::ostringstream table;
    write_duration_table(table, hand, neural, task.decoder_hz);
    write_text(out / "durations.csv", table.str());
    return s;
}

BenchmarkOutputs run_benchmark(const RunConfig& config, const ElmModel& model,
                               const std::string& model_path, const fs::path& out,
                               bool realtime) {
    config.validate();
    if (model.inputs != config.encoder.channels) {
        throw ConfigError("model input dimension D=" + std::to_string(model.inputs) +
                          " does not match encoder channels=" +
                          std::to_string(config.encoder.channels));
    }
    fs::create_directories(out);
    const auto engine = config.engine();
    const auto hooks = pacing_hooks(engine, realtime);

    SessionConfig hand_cfg;
    hand_cfg.mode = SessionMode::HandScripted;
    hand_cfg.trials = config.benchmark_trials;
    hand_cfg.seed = derive_seed(config.seed, "benchmark-hand");
    SessionConfig neural_cfg;
    neural_cfg.mode = SessionMode::NeuralControl;
    neural_cfg.trials = config.benchmark_trials;
    neural_cfg.seed = derive_seed(config.seed, "benchmark-neural");

    spdlog::info("benchmark: {} hand-scripted trials", hand_cfg.trials);
    auto hand = run_session(engine, hand_cfg, nullptr, hooks);
    spdlog::info("benchmark: {} neural-control trials", neural_cfg.trials);
    auto neural = run_session(engine, neural_cfg, &model, hooks);

    write_text(out / "hand.jsonl", trials_text(hand));
    write_text(out / "neural.jsonl", trials_text(neural));

    OJson manifest;
    manifest["config"] = OJson::parse(config_to_json(config));
    manifest["sessions"] = OJson::array(
        {session_json(config, engine, hand_cfg, "", "hand.jsonl"),
         session_json(config, engine, neural_cfg,
                      fs::path(model_path).lexically_proximate(out).generic_string(),
                      "neural.jsonl")});
    write_text(out / "benchmark_manifest.json", manifest.dump(2) + "\n");

    BenchmarkOutputs result;
    result.sessions.push_back({"hand", hand_cfg.mode, hand_cfg.trials, count_successes(hand)});
    result.sessions.push_back(
        {"neural", neural_cfg.mode, neural_cfg.trials, count_successes(neural)});
    result.summary = write_report(hand, neural, config.task, out);
    return result;
}

std::string budget_table(const BudgetSpec& spec, const BudgetResult& r) {
    std::ostringstream out;
    out << std::setprecision(12);
    out << "electrodes          " << spec.electrodes << "\n"
        << "sampling_hz         " << spec.sampling_hz << "\n"
        << "adc_bits            " << spec.adc_bits << "\n"
        << "dof                 " << spec.dof << "\n"
        << "cmd_bits            " << spec.cmd_bits << "\n"
        << "cmd_rate_hz         " << spec.cmd_rate_hz << "\n"
        << "raw_bps             " << r.raw_bps << "\n"
        << "decoded_bps         " << r.decoded_bps << "\n"
        << "feature_uw          " << r.feature_uw << "\n"
        << "total_added_uw      " << r.total_added_uw << "\n"
        << "raw/decoded ratio   ";
    if (r.ratio) {
        out << *r.ratio << "x\n";
    } else {
        out << "n/a\n";
    }
    return out.str();
}

}  // namespace neuroloop
