#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "neuroloop/app.hpp"
#include "neuroloop/service.hpp"

namespace fs = std::filesystem;
using namespace neuroloop;

namespace {

std::atomic<bool> g_interrupted{false};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("neuroloop");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("NEUROLOOP_LOG")) {
        auto lvl = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only honor it when asked for.
        if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
    }
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool realtime = false;

    RunConfig load() const {
        RunConfig c = config.empty() ? RunConfig{} : load_config(config);
        if (seed) c.seed = *seed;
        if (!out.empty()) c.out = out;
        c.validate();
        return c;
    }
};

void print_sessions(const std::vector<SessionOutcome>& sessions) {
    for (const auto& s : sessions) {
        std::cout << s.name << " (" << to_string(s.mode) << "): " << s.successes << "/"
                  << s.trials << " successful\n";
    }
}

void print_summary(const BenchmarkSummary& s) {
    auto fmt = [](std::optional<double> v) {
        return v ? std::to_string(*v) : std::string("n/a");
    };
    for (std::size_t i = 0; i < kDirections.size(); ++i) {
        std::cout << to_string(kDirections[i]) << ": speed ratio " << fmt(s.speed_ratio[i])
                  << ", success ratio " << fmt(s.success_ratio[i]) << "\n";
    }
    std::cout << "overall: speed ratio " << fmt(s.overall_speed_ratio) << ", success ratio "
              << fmt(s.overall_success_ratio) << "\n";
    std::cout << "chance trial success: 10^" << s.chance.log10 << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Closed-loop neural interface simulator with a spike-input ELM decoder"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--config", common.config, "JSON config or run manifest")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", common.seed, "Master seed (overrides the config)");
    app.add_option("--out", common.out, "Output directory (overrides the config)");
    app.add_flag("--realtime", common.realtime, "Pace sessions at the decoder rate");

    auto* train = app.add_subcommand("train", "Run the training paradigm and save the decoders");

    auto* bench = app.add_subcommand("benchmark", "Hand-scripted vs neural-control trials");
    std::string model_path;
    std::optional<int> bench_trials;
    bench->add_option("--model", model_path, "Decoder model (default <out>/model_f.json)");
    bench->add_option("--trials", bench_trials, "Trials per mode")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "Summaries from existing trial logs");
    std::string hand_log;
    std::string neural_log;
    report->add_option("--hand", hand_log, "Hand trial log (default <out>/hand.jsonl)");
    report->add_option("--neural", neural_log, "Neural trial log (default <out>/neural.jsonl)");

    auto* budget_cmd = app.add_subcommand("budget", "Bandwidth and power budget");
    BudgetSpec spec;
    budget_cmd->add_option("--electrodes", spec.electrodes)->capture_default_str();
    budget_cmd->add_option("--fs", spec.sampling_hz, "Sampling rate, Hz")->capture_default_str();
    budget_cmd->add_option("--bits", spec.adc_bits, "ADC bits")->capture_default_str();
    budget_cmd->add_option("--dof", spec.dof)->capture_default_str();
    budget_cmd->add_option("--cmd-bits", spec.cmd_bits)->capture_default_str();
    budget_cmd->add_option("--cmd-rate", spec.cmd_rate_hz, "Hz")->capture_default_str();
    budget_cmd->add_option("--feature-nw", spec.feature_nw_per_channel, "nW per channel")
        ->capture_default_str();
    budget_cmd->add_option("--decoder-uw", spec.decoder_uw)->capture_default_str();
    for (auto* opt : budget_cmd->get_options()) {
        if (opt->get_name() != "--help") opt->check(CLI::NonNegativeNumber);
    }

    auto* serve = app.add_subcommand("serve", "WebSocket loop service");
    ServiceOptions svc;
    std::string mode_name = "hand-interactive";
    int serve_trials = 10;
    int serve_sessions = 1;
    std::optional<int> tick_ms;
    std::string serve_model;
    serve->add_option("--bind", svc.address)->capture_default_str();
    serve->add_option("--port", svc.port)->capture_default_str();
    serve->add_option("--mode", mode_name)
        ->check(CLI::IsMember({"hand-interactive", "hand-scripted", "neural"}))
        ->capture_default_str();
    serve->add_option("--trials", serve_trials)->check(CLI::PositiveNumber)->capture_default_str();
    serve->add_option("--sessions", serve_sessions, "Sessions to run, 0 for no limit")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    serve->add_option("--tick-ms", tick_ms, "Tick period (default 1000 / d_f)")
        ->check(CLI::NonNegativeNumber);
    serve->add_option("--model", serve_model, "Decoder model, required for neural mode");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*budget_cmd) {
            std::cout << budget_table(spec, budget(spec));
            return 0;
        }
        auto config = common.load();
        const fs::path out = config.out;

        if (*train) {
            auto r = run_train(config, out, common.realtime);
            print_sessions(r.sessions);
            std::cout << "manifest: " << r.manifest.string() << "\n";
        } else if (*bench) {
            if (bench_trials) config.benchmark_trials = *bench_trials;
            if (model_path.empty()) model_path = (out / "model_f.json").string();
            auto model = load_model(model_path);
            auto r = run_benchmark(config, model, model_path, out, common.realtime);
            print_sessions(r.sessions);
            print_summary(r.summary);
        } else if (*report) {
            auto hand = load_trials(hand_log.empty() ? out / "hand.jsonl" : fs::path(hand_log));
            auto neural =
                load_trials(neural_log.empty() ? out / "neural.jsonl" : fs::path(neural_log));
            print_summary(write_report(hand, neural, config.task, out));
        } else if (*serve) {
            const auto engine = config.engine();
            std::optional<ElmModel> model;
            if (!serve_model.empty()) model = load_model(serve_model);
            ServedSession served;
            served.session.mode = *session_mode_from_string(mode_name);
            served.session.trials = serve_trials;
            if (served.session.mode == SessionMode::NeuralControl && !model) {
                throw ConfigError("serve --mode neural needs --model");
            }
            served.model = model ? &*model : nullptr;
            if (tick_ms) served.tick_period = std::chrono::milliseconds(*tick_ms);

            LoopService service(svc);
            std::signal(SIGINT, [](int) { g_interrupted = true; });
            std::signal(SIGTERM, [](int) { g_interrupted = true; });
            std::thread watcher([&] {
                while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
                service.shutdown();
            });
            spdlog::info("listening on ws://{}:{}", svc.address, service.port());
            fs::create_directories(out);
            for (int i = 0; !g_interrupted && (serve_sessions == 0 || i < serve_sessions); ++i) {
                served.id = static_cast<std::uint64_t>(i + 1);
                served.session.seed = derive_seed(config.seed, "serve", served.id);
                auto records = service.run(engine, served);
                if (records.empty()) break;
                std::ostringstream log;
                write_trials_jsonl(log, records);
                write_text(out / ("served_" + std::to_string(served.id) + ".jsonl"), log.str());
                int ok = 0;
                for (const auto& r : records) ok += r.succeeded() ? 1 : 0;
                std::cout << "session " << served.id << ": " << ok << "/" << records.size()
                          << " successful\n";
            }
            g_interrupted = true;
            watcher.join();
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
