#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace weaktrace {

enum class Command { weak_values, abl, spectrum, kerr, leakage };

const char* command_name(Command c);
std::optional<Command> parse_command(std::string_view name);

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitUndefined = 3, kExitIo = 4 };

struct RunOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> circuit;  // overrides the scenario's circuit
  std::optional<std::filesystem::path> output;   // overrides the scenario's output directory
  std::optional<std::uint64_t> seed;
};

struct CommandResult {
  std::vector<std::filesystem::path> files;
  std::string summary;
};

/// Runs one command and writes its output files. Throws on any failure.
CommandResult execute(Command command, const RunOptions& options);

/// execute() with failures mapped to exit codes and diagnostics written to `err`.
int run(Command command, const RunOptions& options, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a digest of everything that determines a run's output.
std::string scenario_hash(Command command, std::string_view scenario_text, std::string_view circuit_text,
                          std::uint64_t seed);

}  // namespace weaktrace
