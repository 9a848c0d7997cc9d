#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "weaktrace/meters.hpp"
#include "weaktrace/tsvf.hpp"

namespace weaktrace {

struct SelectionConfig {
  std::optional<std::string> detector;
  std::map<std::string, Complex> pre;   // boundary-0 amplitudes; empty means the source arm
  std::map<std::string, Complex> post;  // final-boundary amplitudes; overrides `detector`
};

struct WeakValuesConfig {
  std::vector<ArmSet> arm_sets;
};

struct AblConfig {
  std::vector<std::vector<ArmSet>> partitions;
};

struct SpectrumConfig {
  std::size_t samples = 4096;
  double dt = 1.0 / 4096.0;
  double pointer_width = 1.0;
  MirrorModulation modulations;
};

struct KerrScenario {
  std::vector<std::pair<std::string, KerrProbeConfig>> probes;
};

struct LeakageConfig {
  std::vector<std::string> arms;
  std::vector<double> epsilons;
  std::pair<std::string, std::string> ratio{"F", "B"};
};

/// Run parameters for one invocation. The circuit itself stays in its DSL file.
struct Scenario {
  std::filesystem::path circuit;
  std::filesystem::path output{"out"};
  std::uint64_t seed = 0;
  SelectionConfig selection;
  std::optional<WeakValuesConfig> weak_values;
  std::optional<AblConfig> abl;
  std::optional<SpectrumConfig> spectrum;
  std::optional<KerrScenario> kerr;
  std::optional<LeakageConfig> leakage;
  std::string source_text;  // raw scenario bytes, for hashing
};

/// Parses scenario JSON; relative paths resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

SelectionPair make_selection(const StagedModel& model, const SelectionConfig& cfg);

std::string read_file(const std::filesystem::path& path);

}  // namespace weaktrace
