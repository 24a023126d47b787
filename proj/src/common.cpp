#include "neuroloop/common.hpp"

namespace neuroloop {

namespace {

constexpr std::array<std::string_view, kNumCommands> kNames{"Forward", "Right", "Left",
                                                            "Stop"};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Command c) { return kNames[index_of(c)]; }

std::optional<Command> command_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == s) return static_cast<Command>(i);
    }
    return std::nullopt;
}

Command command_from_index(std::size_t i) {
    if (i >= kNumCommands) throw InvalidArgument("command index out of range");
    return static_cast<Command>(i);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : component) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(splitmix64(splitmix64(master) ^ h) ^ index);
}

}  // namespace neuroloop
