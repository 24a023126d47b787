#include <doctest.h>

#include <set>

#include "neuroloop/common.hpp"

using namespace neuroloop;

TEST_CASE("command names round-trip") {
    for (auto c : kAllCommands) {
        auto back = command_from_string(to_string(c));
        REQUIRE(back);
        CHECK(*back == c);
        CHECK(command_from_index(index_of(c)) == c);
    }
    CHECK_FALSE(command_from_string("forward"));
    CHECK_FALSE(command_from_string(""));
    CHECK_THROWS_AS(command_from_index(4), InvalidArgument);
}

TEST_CASE("class indices are fixed") {
    CHECK(index_of(Command::Forward) == 0);
    CHECK(index_of(Command::Right) == 1);
    CHECK(index_of(Command::Left) == 2);
    CHECK(index_of(Command::Stop) == 3);
}

TEST_CASE("derive_seed is a pure function of its inputs") {
    CHECK(derive_seed(7, "spikes", 3) == derive_seed(7, "spikes", 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t master : {0ULL, 1ULL, 2ULL}) {
        for (const char* name : {"spikes", "assist", "directions", "session"}) {
            for (std::uint64_t i = 0; i < 4; ++i) seen.insert(derive_seed(master, name, i));
        }
    }
    CHECK(seen.size() == 3 * 4 * 4);
}
