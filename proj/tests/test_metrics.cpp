#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "neuroloop/metrics.hpp"
#include "oracles.hpp"

using namespace neuroloop;

namespace {

TrialRecord trial(Command dir, bool ok, int ticks) {
    TrialRecord t;
    t.direction = dir;
    t.outcome = ok ? Phase::Succeeded : Phase::Failed;
    t.duration_ticks = ticks;
    return t;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("chance level of a trial") {
    auto c = chance_trial_success(4, 0.7, 130);
    CHECK(c.log10 == doctest::Approx(91 * std::log10(0.25)));
    CHECK(c.log10 > -54.9);
    CHECK(c.log10 < -54.7);
    CHECK(c.probability == doctest::Approx(std::pow(0.25, 91)));
    auto tiny = chance_trial_success(4, 1.0, 600);
    CHECK(tiny.probability == 0.0);
    CHECK(tiny.log10 == doctest::Approx(-600 * std::log10(4.0)));
    CHECK(chance_trial_success(2, 1.0, 1).probability == doctest::Approx(0.5));
    CHECK_THROWS_AS(chance_trial_success(1, 0.7, 10), InvalidArgument);
    CHECK_THROWS_AS(chance_trial_success(4, 1.5, 10), InvalidArgument);
}

TEST_CASE("t-test statistic and p-value against independent computation") {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a(5 + rep), b(8 + 2 * rep);
        for (auto& x : a) x = z(gen) + 0.3;
        for (auto& x : b) x = 2.0 * z(gen);
        const double na = a.size(), nb = b.size();
        const double va = sample_var(a), vb = sample_var(b);

        const double sp = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2);
        const double t = (mean(a) - mean(b)) / std::sqrt(sp * (1 / na + 1 / nb));
        auto r = t_test_unpaired(a, b);
        CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
        CHECK(r.dof == na + nb - 2);
        CHECK(r.p == doctest::Approx(oracle::t_two_sided_p(t, na + nb - 2)).epsilon(1e-7));

        const double se2 = va / na + vb / nb;
        const double dof = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
        auto w = t_test_unpaired(a, b, true);
        CHECK(w.t == doctest::Approx((mean(a) - mean(b)) / std::sqrt(se2)).epsilon(1e-12));
        CHECK(w.dof == doctest::Approx(dof).epsilon(1e-12));
        CHECK(w.p == doctest::Approx(oracle::t_two_sided_p(w.t, dof)).epsilon(1e-7));
    }
}

TEST_CASE("t-test error cases") {
    std::vector<double> one{1.0};
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(t_test_unpaired(one, two), InvalidArgument);
    std::vector<double> flat{3.0, 3.0, 3.0};
    CHECK_THROWS_AS(t_test_unpaired(flat, flat), NumericError);
    auto same = t_test_unpaired(two, two);
    CHECK(same.t == 0.0);
    CHECK(same.p == doctest::Approx(1.0));
}

TEST_CASE("speed ratio of proportional durations") {
    std::vector<TrialRecord> hand, neural;
    for (int i = 0; i < 10; ++i) {
        for (auto d : kDirections) {
            const int h = 20 + i;
            hand.push_back(trial(d, true, h * 79));
            neural.push_back(trial(d, true, h * 100));
        }
    }
    auto s = summarize(hand, neural);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(s.speed_ratio[i]);
        CHECK(*s.speed_ratio[i] == doctest::Approx(0.79).epsilon(1e-12));
        CHECK(*s.success_ratio[i] == 1.0);
    }
    CHECK(s.success_test.note == "identical");
}

TEST_CASE("summary matches direct recomputation") {
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> dur(23, 130);
    std::bernoulli_distribution ok(0.8);
    std::vector<TrialRecord> hand, neural;
    for (int i = 0; i < 90; ++i) {
        hand.push_back(trial(kDirections[i % 3], true, dur(gen)));
        neural.push_back(trial(kDirections[i % 3], ok(gen), dur(gen)));
    }
    auto s = summarize(hand, neural, 10.0);
    for (std::size_t d = 0; d < 3; ++d) {
        std::vector<double> hd, nd;
        int n_ok = 0;
        for (const auto& t : hand) {
            if (t.direction == kDirections[d]) hd.push_back(t.duration_ticks / 10.0);
        }
        for (const auto& t : neural) {
            if (t.direction != kDirections[d]) continue;
            if (t.succeeded()) {
                nd.push_back(t.duration_ticks / 10.0);
                ++n_ok;
            }
        }
        CHECK(*s.neural.by_direction[d].mean_duration == doctest::Approx(mean(nd)).epsilon(1e-12));
        CHECK(*s.neural.by_direction[d].std_duration ==
              doctest::Approx(std::sqrt(sample_var(nd))).epsilon(1e-12));
        CHECK(*s.speed_ratio[d] == doctest::Approx(mean(hd) / mean(nd)).epsilon(1e-12));
        CHECK(*s.success_ratio[d] == doctest::Approx(n_ok / 30.0).epsilon(1e-12));
    }
    CHECK(s.neural.overall.n_trials == 90);
}

TEST_CASE("summary requires each direction in both modes") {
    std::vector<TrialRecord> hand{trial(Command::Forward, true, 23)};
    CHECK_THROWS_AS(summarize(hand, hand), InvalidArgument);
}

TEST_CASE("dead decoder gives empty speed ratios and zero success ratio") {
    std::vector<TrialRecord> hand, neural;
    for (auto d : kDirections) {
        for (int i = 0; i < 3; ++i) {
            hand.push_back(trial(d, true, 23 + i));
            neural.push_back(trial(d, false, 130));
        }
    }
    auto s = summarize(hand, neural);
    CHECK_FALSE(s.speed_ratio[0]);
    CHECK(*s.overall_success_ratio == 0.0);
    CHECK(s.duration_tests[0].note == "insufficient");
    CHECK(s.success_test.note == "degenerate");
    auto j = nlohmann::json::parse(summary_to_json(s));
    CHECK(j["ratios"]["Forward"]["speed"].is_null());
}

TEST_CASE("report outputs") {
    std::vector<TrialRecord> hand, neural;
    for (int i = 0; i < 6; ++i) {
        hand.push_back(trial(kDirections[i % 3], true, 23 + i));
        neural.push_back(trial(kDirections[i % 3], true, 30 + 2 * i));
    }
    auto s = summarize(hand, neural);
    std::ostringstream csv;
    write_summary_csv(csv, s);
    std::istringstream lines(csv.str());
    std::string line;
    int n = 0;
    std::getline(lines, line);
    CHECK(line == "mode,direction,n_trials,n_success,success_rate,mean_duration_s,std_duration_s");
    while (std::getline(lines, line)) ++n;
    CHECK(n == 8);

    const auto text = summary_to_json(s);
    auto j = nlohmann::ordered_json::parse(text);
    CHECK(j.dump(2) + "\n" == text);
    for (const char* key : {"hand", "neural", "ratios", "t_tests", "chance"}) CHECK(j.contains(key));
    CHECK(j["t_tests"]["duration_Forward"]["p"].is_number());

    std::ostringstream table;
    write_duration_table(table, hand, neural);
    CHECK(table.str().rfind("mode,trial_id,direction,outcome,duration_s\nhand,0,Forward,Succeeded,2.2", 0) == 0);
}

TEST_CASE("match fraction") {
    TrialRecord t;
    CHECK_FALSE(match_fraction(t));
    TickEntry e;
    e.oracle = Command::Forward;
    e.decoded = Command::Forward;
    t.ticks = {e, e, e};
    t.ticks[2].decoded = Command::Left;
    CHECK(*match_fraction(t) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("budget arithmetic") {
    auto r = budget({});
    CHECK(r.raw_bps == 24000000.0);
    CHECK(r.decoded_bps == 3000.0);
    CHECK(r.feature_uw == 4.0);
    CHECK(r.total_added_uw == 4.71);
    CHECK(*r.ratio == 8000.0);

    BudgetSpec zero;
    zero.electrodes = 0;
    auto z = budget(zero);
    CHECK(z.raw_bps == 0.0);
    CHECK_FALSE(z.ratio);
}

TEST_CASE("raw bit rate is linear in each argument") {
    const BudgetSpec base;
    const double raw = budget(base).raw_bps;
    for (double BudgetSpec::*field : {&BudgetSpec::electrodes, &BudgetSpec::sampling_hz, &BudgetSpec::adc_bits}) {
        BudgetSpec s = base;
        s.*field *= 2;
        CHECK(budget(s).raw_bps == 2 * raw);
    }
    const double dec = budget(base).decoded_bps;
    for (double BudgetSpec::*field : {&BudgetSpec::dof, &BudgetSpec::cmd_bits, &BudgetSpec::cmd_rate_hz}) {
        BudgetSpec s = base;
        s.*field *= 2;
        CHECK(budget(s).decoded_bps == 2 * dec);
    }
}

TEST_CASE("chance level is decreasing in steps and match fraction") {
    CHECK(chance_trial_success(4, 0.0, 50).probability == 1.0);
    CHECK(chance_trial_success(4, 1.0, 1).probability == 0.25);
    for (int n = 1; n < 200; ++n) {
        CHECK(chance_trial_success(4, 0.7, n + 1).log10 < chance_trial_success(4, 0.7, n).log10);
    }
    for (int i = 1; i < 20; ++i) {
        const double f = 0.05 * i;
        CHECK(chance_trial_success(3, 0.05 * (i + 1), 40).log10 < chance_trial_success(3, f, 40).log10);
    }
}

TEST_CASE("t-test is antisymmetric in its arguments") {
    std::vector<double> a{1, 2, 3, 4, 5};
    std::vector<double> b{11, 12, 13, 14, 15};
    auto ab = t_test_unpaired(a, b);
    auto ba = t_test_unpaired(b, a);
    CHECK(ab.t == -ba.t);
    CHECK(ab.p == ba.p);
    CHECK(ab.p < 0.001);
    CHECK(ab.p == doctest::Approx(oracle::t_two_sided_p(ab.t, 8)).epsilon(1e-7));
}

TEST_CASE("summary is invariant to trial order") {
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<int> dur(23, 130);
    std::vector<TrialRecord> hand, neural;
    for (int i = 0; i < 30; ++i) {
        hand.push_back(trial(kDirections[i % 3], true, dur(gen)));
        neural.push_back(trial(kDirections[i % 3], i % 4 != 0, dur(gen)));
    }
    const auto ref = summary_to_json(summarize(hand, neural));
    for (int rep = 0; rep < 5; ++rep) {
        std::shuffle(hand.begin(), hand.end(), gen);
        std::shuffle(neural.begin(), neural.end(), gen);
        auto j = nlohmann::json::parse(summary_to_json(summarize(hand, neural)));
        auto r = nlohmann::json::parse(ref);
        // Summation order may differ in the last bit.
        CHECK(j["ratios"]["Left"]["speed"].get<double>() ==
              doctest::Approx(r["ratios"]["Left"]["speed"].get<double>()).epsilon(1e-12));
        CHECK(j["neural"]["overall"]["n_success"] == r["neural"]["overall"]["n_success"]);
    }
}
