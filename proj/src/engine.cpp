#include "neuroloop/engine.hpp"

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

namespace neuroloop {

std::string_view to_string(SessionMode m) {
    switch (m) {
        case SessionMode::PassiveObservation: return "passive";
        case SessionMode::Assisted: return "assisted";
        case SessionMode::NeuralControl: return "neural";
        case SessionMode::HandScripted: return "hand-scripted";
        case SessionMode::HandInteractive: return "hand-interactive";
    }
    return "passive";
}

std::optional<SessionMode> session_mode_from_string(std::string_view s) {
    for (auto m : {SessionMode::PassiveObservation, SessionMode::Assisted,
                   SessionMode::NeuralControl, SessionMode::HandScripted,
                   SessionMode::HandInteractive}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

void SessionConfig::validate() const {
    if (trials < 1) throw InvalidArgument("session: trials must be >= 1");
    if (!(assistance >= 0.0 && assistance <= 1.0)) {
        throw InvalidArgument("session: assistance must lie in [0, 1]");
    }
}

void EngineConfig::validate() const {
    encoder.validate();
    features.validate();
    task.validate();
    if (encoder.channels() != features.channels) {
        throw InvalidArgument("encoder channel count does not match feature dimension D");
    }
    if (std::abs(features.decoder_hz - task.decoder_hz) > 1e-12) {
        throw InvalidArgument("feature and task decoder frequencies differ");
    }
    if (reaction_lag_ticks < 0) throw InvalidArgument("reaction lag must be >= 0");
    if (rest_ticks_between_trials && *rest_ticks_between_trials < 0) {
        throw InvalidArgument("rest between trials must be >= 0 ticks");
    }
}

int EngineConfig::rest_ticks() const {
    if (rest_ticks_between_trials) return *rest_ticks_between_trials;
    return static_cast<int>(std::ceil(features.window / features.period() - 1e-9));
}

int ClosedLoop::warmup_ticks() const {
    return static_cast<int>(
        std::ceil(engine_.features.window / engine_.features.period() - 1e-9));
}

Command blend_assist(Command decoded, Command oracle, double p, AssistSource& draw) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("blend_assist: p must lie in [0, 1]");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(draw) < p ? oracle : decoded;
}

ClosedLoop::ClosedLoop(const EngineConfig& engine, const SessionConfig& session,
                       const ElmModel* model, OperatorInput* input)
    : engine_(engine),
      session_(session),
      model_(model),
      input_(input),
      spikes_(derive_seed(engine.encoder.seed, "spikes", session.seed)),
      assist_(derive_seed(session.seed, "assist")),
      directions_(derive_seed(session.seed, "directions")),
      extractor_(engine.features) {
    engine_.validate();
    session_.validate();

    const bool needs_model = session_.mode == SessionMode::Assisted ||
                             session_.mode == SessionMode::NeuralControl;
    if (needs_model && model_ == nullptr) {
        throw InvalidArgument(std::string("session mode '") + std::string(to_string(session_.mode)) +
                              "' requires a decoder model");
    }
    if (model_ != nullptr) {
        if (model_->inputs != engine_.features.channels) {
            throw InvalidArgument("decoder input dimension does not match feature dimension D");
        }
        if (model_->classes != kNumCommands) {
            throw InvalidArgument("decoder must have one output per command");
        }
        if (needs_model && !model_->trained() && !session_.allow_untrained) {
            throw NotTrainedError("decoder second layer has not been trained");
        }
    }
    if (session_.mode == SessionMode::HandInteractive && (input_ == nullptr || !input_->connected())) {
        throw InvalidStateError("interactive hand-control session needs a connected operator");
    }

    // Subject at rest before the first target appears, so the first trial
    // starts with a full look-back window.
    for (int i = 0; i < warmup_ticks(); ++i) advance_subject(std::nullopt);
}

FeatureVector ClosedLoop::advance_subject(std::optional<Command> intent) {
    const double ts = engine_.features.period();
    const double t0 = static_cast<double>(session_tick_) * ts;
    ++session_tick_;
    const double t1 = static_cast<double>(session_tick_) * ts;
    auto events = intent ? encode_intent(engine_.encoder, *intent, t0, t1, spikes_)
                         : encode_rest(engine_.encoder, t0, t1, spikes_);
    extractor_.push_events(events);
    return extractor_.emit(t1);
}

void ClosedLoop::begin_trial(int id) {
    if (trial_running()) throw InvalidStateError("begin_trial: previous trial still running");
    if (trials_begun_++ > 0) {
        for (int i = 0; i < engine_.rest_ticks(); ++i) advance_subject(std::nullopt);
    }
    state_ = spawn_trial(engine_.task, directions_);
    record_ = TrialRecord{};
    record_.id = id;
    record_.direction = state_.direction;
    oracle_history_.clear();
    started_ = true;
}

std::optional<Command> ClosedLoop::intent_for_tick(int n) const {
    const int seen = n - 1 - engine_.reaction_lag_ticks;
    if (seen < 0) return std::nullopt;
    return oracle_history_[static_cast<std::size_t>(seen)];
}

Command ClosedLoop::run_tick() {
    if (!trial_running()) throw InvalidStateError("run_tick: no running trial");

    const Command oracle = oracle_policy(state_, engine_.task);
    oracle_history_.push_back(oracle);
    const int n = state_.tick + 1;
    const std::optional<Command> intent = intent_for_tick(n);
    FeatureVector fv = advance_subject(intent);

    std::optional<Command> decoded;
    try {
        if (model_ != nullptr && (model_->trained() || session_.allow_untrained)) {
            decoded = classify(decode(*model_, hidden(*model_, fv.rates), true));
        }
    } catch (const NumericError& e) {
        abort_trial(e.what());
        return Command::Stop;
    }

    Command executed = oracle;
    switch (session_.mode) {
        case SessionMode::PassiveObservation:
        case SessionMode::HandScripted: executed = oracle; break;
        case SessionMode::Assisted:
            executed = blend_assist(*decoded, oracle, session_.assistance, assist_);
            break;
        case SessionMode::NeuralControl: executed = *decoded; break;
        case SessionMode::HandInteractive: executed = input_->sample(); break;
    }

    state_ = step(state_, executed, engine_.task);

    TickEntry e;
    e.k = state_.tick;
    e.features = std::move(fv.rates);
    e.decoded = decoded;
    e.executed = executed;
    e.oracle = oracle;
    e.intent = intent;
    e.x = state_.x;
    e.y = state_.y;
    record_.ticks.push_back(std::move(e));
    record_.outcome = state_.phase;
    record_.duration_ticks = state_.tick;
    return executed;
}

void ClosedLoop::abort_trial(const std::string& reason) {
    if (!trial_running()) return;
    spdlog::warn("trial {} aborted: {}", record_.id, reason);
    state_.phase = Phase::Failed;
    record_.outcome = Phase::Failed;
    record_.duration_ticks = state_.tick;
    record_.diagnostic = reason;
}

TrialRecord ClosedLoop::finish_trial() {
    if (trial_running()) throw InvalidStateError("finish_trial: trial still running");
    started_ = false;
    return std::move(record_);
}

std::vector<TrialRecord> run_session(const EngineConfig& engine, const SessionConfig& session,
                                     const ElmModel* model, const SessionHooks& hooks) {
    ClosedLoop loop(engine, session, model, hooks.input);
    std::vector<TrialRecord> records;
    records.reserve(static_cast<std::size_t>(session.trials));
    int successes = 0;

    using Clock = std::chrono::steady_clock;
    auto deadline = Clock::now();

    auto notify = [&](const TickEntry* last) {
        if (!hooks.on_tick) return;
        TickSnapshot snap;
        snap.mode = session.mode;
        snap.trial_index = static_cast<int>(records.size());
        snap.state = loop.state();
        if (last != nullptr) {
            snap.decoded = last->decoded;
            snap.executed = last->executed;
            snap.oracle = last->oracle;
        }
        snap.successes = successes + (loop.state().phase == Phase::Succeeded ? 1 : 0);
        snap.trials_done = static_cast<int>(records.size()) +
                           (loop.state().phase != Phase::Running ? 1 : 0);
        hooks.on_tick(snap);
    };

    for (int i = 0; i < session.trials; ++i) {
        if (hooks.aborted && hooks.aborted()) break;
        loop.begin_trial(i);
        notify(nullptr);
        while (loop.trial_running()) {
            if (hooks.wait_while_paused) hooks.wait_while_paused();
            if (hooks.aborted && hooks.aborted()) {
                loop.abort_trial("session aborted");
                break;
            }
            if (hooks.pacing) {
                // Re-anchor after a pause instead of bursting to catch up.
                deadline = std::max(deadline + *hooks.pacing, Clock::now());
                std::this_thread::sleep_until(deadline);
            }
            loop.run_tick();
            notify(loop.record().ticks.empty() ? nullptr : &loop.record().ticks.back());
        }
        auto rec = loop.finish_trial();
        if (rec.succeeded()) ++successes;
        records.push_back(std::move(rec));
    }
    return records;
}

TrainingRows collect_training_rows(const std::vector<TrialRecord>& trials) {
    TrainingRows rows;
    for (const auto& t : trials) {
        if (!t.succeeded()) continue;
        for (const auto& e : t.ticks) {
            rows.features.push_back(e.features);
            rows.labels.push_back(e.oracle);
        }
    }
    return rows;
}

namespace {

ElmModel fit_on(const ElmModel& fresh, const std::vector<std::vector<TrialRecord>>& sessions,
                double lambda, const char* name) {
    TrainingRows rows;
    for (const auto& s : sessions) {
        auto part = collect_training_rows(s);
        rows.features.insert(rows.features.end(), part.features.begin(), part.features.end());
        rows.labels.insert(rows.labels.end(), part.labels.begin(), part.labels.end());
    }
    if (rows.features.empty()) {
        throw TrainingError(std::string("no successful trials available to train ") + name);
    }
    spdlog::info("training {} on {} rows", name, rows.features.size());
    return fit(fresh, rows.features, rows.labels, lambda);
}

}  // namespace

TrainingPipelineState train_pipeline(const EngineConfig& engine, const ElmModel& fresh,
                                     std::uint64_t master_seed, const PipelinePlan& plan,
                                     const SessionHooks& hooks) {
    TrainingPipelineState st;
    for (int s = 0; s < plan.passive_sessions; ++s) {
        SessionConfig cfg;
        cfg.mode = SessionMode::PassiveObservation;
        cfg.trials = plan.trials_per_session;
        cfg.seed = derive_seed(master_seed, "session", static_cast<std::uint64_t>(s));
        st.sessions.push_back(run_session(engine, cfg, nullptr, hooks));
    }
    st.intermediate = fit_on(fresh, st.sessions, plan.lambda, "M_int");

    SessionConfig assisted;
    assisted.mode = SessionMode::Assisted;
    assisted.trials = plan.trials_per_session;
    assisted.assistance = plan.assistance;
    assisted.seed = derive_seed(master_seed, "session",
                                static_cast<std::uint64_t>(plan.passive_sessions));
    st.sessions.push_back(run_session(engine, assisted, &*st.intermediate, hooks));
    st.final_model = fit_on(fresh, st.sessions, plan.lambda, "M_f");
    return st;
}

}  // namespace neuroloop
