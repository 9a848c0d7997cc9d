#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "weaktrace/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pre/post-selected photons in interferometer networks: weak values, ABL probabilities, weak traces"};
  app.require_subcommand(1);

  weaktrace::RunOptions options;
  std::string circuit, output;
  std::uint64_t seed = 0;

  const std::pair<weaktrace::Command, const char*> commands[] = {
      {weaktrace::Command::weak_values, "weak values of the scenario's arm sets"},
      {weaktrace::Command::abl, "ABL probabilities of the scenario's partitions"},
      {weaktrace::Command::spectrum, "quad-cell series from vibrating mirrors and its power spectrum"},
      {weaktrace::Command::kerr, "Kerr cross-phase probe readouts"},
      {weaktrace::Command::leakage, "marker trace magnitudes against strength, with power-law fits"},
  };
  for (const auto& [cmd, help] : commands) {
    auto* sub = app.add_subcommand(weaktrace::command_name(cmd), help);
    sub->add_option("--scenario", options.scenario, "scenario JSON file")->required();
    sub->add_option("--circuit", circuit, "circuit file (overrides the scenario)");
    sub->add_option("--out", output, "output directory (overrides the scenario)");
    sub->add_option("--seed", seed, "64-bit seed recorded in every output header");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : weaktrace::kExitValidation;
  }

  auto* sub = app.get_subcommands().front();
  if (!circuit.empty()) options.circuit = circuit;
  if (!output.empty()) options.output = output;
  if (sub->count("--seed") > 0) options.seed = seed;
  return weaktrace::run(*weaktrace::parse_command(sub->get_name()), options, std::cout, std::cerr);
}
