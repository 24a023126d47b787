#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "neuroloop/features.hpp"
#include "oracles.hpp"

using namespace neuroloop;

TEST_CASE("window is half-open on the left and closed on the right") {
    FeatureExtractor fx({2, 0.2, 10.0});
    std::vector<SpikeEvent> ev{{0, 0.05}, {0, 0.1}, {1, 0.1}, {0, 0.35}};
    fx.push_events(ev);
    auto a = fx.emit(0.1);
    CHECK(a.tick == 1);
    CHECK(a.rates == std::vector<double>{2, 1});
    auto b = fx.emit(0.3);
    CHECK(b.rates == std::vector<double>{0, 0});
    auto c = fx.emit(0.4);
    CHECK(c.rates == std::vector<double>{1, 0});
}

TEST_CASE("events older than the window are dropped") {
    FeatureExtractor fx({1, 0.5, 10.0});
    std::vector<SpikeEvent> ev;
    for (int i = 0; i < 100; ++i) ev.push_back({0, 0.01 * (i + 1)});
    fx.push_events(ev);
    fx.emit(1.0);
    CHECK(fx.buffered() == 50);
    fx.emit(2.0);
    CHECK(fx.buffered() == 0);
}

TEST_CASE("matches naive recount on random streams") {
    std::mt19937_64 gen(5);
    for (double window : {0.1, 0.5, 1.0}) {
        for (int stream = 0; stream < 50; ++stream) {
            const std::size_t d = 1 + gen() % 8;
            FeatureExtractor fx({d, window, 10.0});
            std::vector<oracle::Event> all;
            std::exponential_distribution<double> gap(30.0);
            double t = 0.0;
            for (int n = 1; n <= 30; ++n) {
                const double tick_t = n * 0.1;
                std::vector<SpikeEvent> batch;
                while (true) {
                    const double next = t + gap(gen);
                    if (next > tick_t) break;
                    t = next;
                    const auto ch = static_cast<std::uint32_t>(gen() % d);
                    batch.push_back({ch, t});
                    all.push_back({ch, t});
                }
                // Spikes landing exactly on tick boundaries.
                if (gen() % 4 == 0) {
                    batch.push_back({0, tick_t});
                    all.push_back({0, tick_t});
                    t = tick_t;
                }
                fx.push_events(batch);
                auto fv = fx.emit(tick_t);
                auto want = oracle::recount(all, d, n, std::lround(window / 0.1), 0.1);
                for (std::size_t k = 0; k < d; ++k) CHECK(fv.rates[k] == static_cast<double>(want[k]));
            }
        }
    }
}

TEST_CASE("input validation") {
    FeatureExtractor fx({2, 0.5, 10.0});
    std::vector<SpikeEvent> bad_channel{{2, 0.01}};
    CHECK_THROWS_AS(fx.push_events(bad_channel), InvalidArgument);

    std::vector<SpikeEvent> ok{{0, 0.05}};
    fx.push_events(ok);
    std::vector<SpikeEvent> late{{1, 0.02}, {0, 0.04}};
    CHECK_THROWS_AS(fx.push_events(late), OrderingError);
    // The rejected batch left no trace.
    CHECK(fx.buffered() == 1);

    CHECK_THROWS_AS(fx.emit(0.15), InvalidArgument);
    fx.emit(0.2);
    CHECK_THROWS_AS(fx.emit(0.2), InvalidArgument);
    CHECK_THROWS_AS(fx.emit(0.1), InvalidArgument);

    CHECK_THROWS_AS(FeatureExtractor({0, 0.5, 10.0}), InvalidArgument);
    CHECK_THROWS_AS(FeatureExtractor({4, 0.05, 10.0}), InvalidArgument);
}

TEST_CASE("feature CSV layout") {
    FeatureExtractor fx({3, 0.5, 10.0});
    std::vector<SpikeEvent> ev{{1, 0.05}};
    fx.push_events(ev);
    std::vector<FeatureVector> rows{fx.emit(0.1)};
    std::ostringstream out;
    write_features_csv(out, rows, 3);
    CHECK(out.str() == "tick_index,t,r_1,r_2,r_3\n1,0.10000000000000001,0,1,0\n");
}
