#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace neuroloop {

/// Discrete avatar command. The integer encoding is stable and doubles as the
/// decoder's class index.
enum class Command : std::uint8_t { Forward = 0, Right = 1, Left = 2, Stop = 3 };

inline constexpr std::size_t kNumCommands = 4;
inline constexpr std::array<Command, kNumCommands> kAllCommands{
    Command::Forward, Command::Right, Command::Left, Command::Stop};

constexpr std::size_t index_of(Command c) { return static_cast<std::size_t>(c); }

std::string_view to_string(Command c);
std::optional<Command> command_from_string(std::string_view s);
Command command_from_index(std::size_t i);

// Error taxonomy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch coarsely.

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OrderingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotTrainedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Child seed derivation: child = hash64(master, component, index).
/// FNV-1a over the component name, folded with master and index through
/// splitmix64 finalizers.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

}  // namespace neuroloop
