#include "weaktrace/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "weaktrace/analysis.hpp"
#include "weaktrace/meters.hpp"
#include "weaktrace/scenario.hpp"
#include "weaktrace/tsvf.hpp"

#ifndef WEAKTRACE_VERSION
#define WEAKTRACE_VERSION "0.0.0"
#endif

namespace weaktrace {

using nlohmann::json;
namespace fs = std::filesystem;

const char* command_name(Command c) {
  switch (c) {
    case Command::weak_values: return "weak-values";
    case Command::abl: return "abl";
    case Command::spectrum: return "spectrum";
    case Command::kerr: return "kerr";
    case Command::leakage: return "leakage";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (auto c : {Command::weak_values, Command::abl, Command::spectrum, Command::kerr, Command::leakage}) {
    if (name == command_name(c)) return c;
  }
  return std::nullopt;
}

std::string scenario_hash(Command command, std::string_view scenario_text, std::string_view circuit_text,
                          std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view bytes) {
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  feed(command_name(command));
  feed(scenario_text);
  feed(circuit_text);
  feed(std::to_string(seed));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

struct Context {
  Command command;
  Scenario scenario;
  StagedModel model;
  SelectionPair selection;
  fs::path out_dir;
  std::string hash;
  CommandResult result;

  std::string header() const {
    return std::string("# weaktrace ") + WEAKTRACE_VERSION + " command=" + command_name(command) +
           " scenario=" + hash + " seed=" + std::to_string(scenario.seed);
  }

  json meta() const {
    return {{"tool", "weaktrace"},
            {"version", WEAKTRACE_VERSION},
            {"command", command_name(command)},
            {"scenario_hash", hash},
            {"seed", scenario.seed}};
  }

  void write(const std::string& name, const std::string& body) {
    const fs::path path = out_dir / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << body;
    if (!f) throw IoError("write failed for '" + path.string() + "'");
    result.files.push_back(path);
  }

  void write_csv(const std::string& name, const std::string& columns, const std::vector<std::string>& rows) {
    std::string body = header() + '\n' + columns + '\n';
    for (const auto& r : rows) body += r + '\n';
    write(name, body);
  }

  void write_json(const std::string& name, json doc) {
    doc["meta"] = meta();
    write(name, doc.dump(2) + '\n');
  }
};

template <typename T>
const T& section(const std::optional<T>& s, const char* name) {
  if (!s) throw ValidationError(std::string("scenario has no '") + name + "' block");
  return *s;
}

void cmd_weak_values(Context& ctx) {
  const auto& cfg = section(ctx.scenario.weak_values, "weak_values");
  std::vector<std::string> rows;
  json table = json::array();
  std::ostringstream summary;
  for (const auto& set : cfg.arm_sets) {
    const auto stage = resolve(ctx.model, set).stage;
    const Complex w = weak_value(ctx.model, ctx.selection, set);
    rows.push_back(join(set.arms, '+') + ',' + std::to_string(stage) + ',' + num(w.real()) + ',' + num(w.imag()));
    table.push_back({{"arms", set.arms}, {"stage", stage}, {"re", w.real()}, {"im", w.imag()}});
    summary << '{' << join(set.arms, ',') << "}: " << num(w.real()) << (w.imag() < 0 ? " - " : " + ")
            << num(std::abs(w.imag())) << "i\n";
  }
  ctx.write_csv("weak_values.csv", "arms,stage,re,im", rows);
  ctx.write_json("weak_values.json", {{"weak_values", table}});
  ctx.result.summary = summary.str();
}

void cmd_abl(Context& ctx) {
  const auto& cfg = section(ctx.scenario.abl, "abl");
  std::vector<std::string> rows;
  std::ostringstream summary;
  for (std::size_t p = 0; p < cfg.partitions.size(); ++p) {
    const auto& partition = cfg.partitions[p];
    std::vector<std::string> all;
    for (const auto& s : partition) all.insert(all.end(), s.arms.begin(), s.arms.end());
    for (std::size_t o = 0; o < partition.size(); ++o) {
      const double prob = abl_probability(ctx.model, ctx.selection, partition, o);
      const auto stage = resolve(ctx.model, ArmSet{partition[o].stage ? partition[o].stage : ctx.model.first_boundary_with(all),
                                                   partition[o].arms}).stage;
      rows.push_back(std::to_string(p) + ',' + std::to_string(stage) + ',' + join(partition[o].arms, '+') + ',' +
                     num(prob));
      summary << "partition " << p << ", outcome {" << join(partition[o].arms, ',') << "}: " << num(prob) << '\n';
    }
  }
  ctx.write_csv("abl.csv", "partition,stage,outcome,probability", rows);
  ctx.result.summary = summary.str();
}

void cmd_spectrum(Context& ctx) {
  const auto& cfg = section(ctx.scenario.spectrum, "spectrum");
  const auto times = uniform_times(cfg.samples, cfg.dt);
  const auto series = quad_cell_series(ctx.model, ctx.selection, cfg.modulations, times, cfg.pointer_width);
  const auto x = series.values();
  const auto spec = power_spectrum(x, cfg.dt);

  std::vector<std::string> rows;
  rows.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) rows.push_back(num(times[i]) + ',' + num(x[i]));
  ctx.write_csv("series.csv", "t,x", rows);
  rows.clear();
  for (std::size_t k = 0; k < spec.power.size(); ++k) rows.push_back(num(spec.frequency(k)) + ',' + num(spec.power[k]));
  ctx.write_csv("spectrum.csv", "f,power", rows);

  json peaks = json::array();
  std::ostringstream summary;
  for (const auto& [mirror, tilt] : cfg.modulations) {
    const double p = peak_power(spec, tilt.frequency);
    peaks.push_back({{"mirror", mirror}, {"frequency", tilt.frequency}, {"tilt", tilt.amplitude}, {"power", p}});
    summary << mirror << " @ " << num(tilt.frequency) << ": " << num(p) << '\n';
  }
  ctx.write_json("peaks.json", {{"samples", cfg.samples},
                                {"dt", cfg.dt},
                                {"total_power", spec.total_power()},
                                {"peaks", peaks}});
  ctx.result.summary = summary.str();
}

void cmd_kerr(Context& ctx) {
  const auto& cfg = section(ctx.scenario.kerr, "kerr");
  json probes = json::array();
  std::ostringstream summary;
  for (const auto& [label, probe] : cfg.probes) {
    const auto r = kerr_probe_shift(ctx.model, ctx.selection, probe);
    const Complex w = kerr_weak_value(ctx.model, ctx.selection, probe);
    json entry = {{"label", label},
                  {"phi", probe.phi},
                  {"bias", probe.bias},
                  {"stage", r.stage},
                  {"intensity_plus", r.intensity_plus},
                  {"intensity_minus", r.intensity_minus},
                  {"post_probability", r.post_probability},
                  {"inferred_shift", r.inferred_shift},
                  {"weak_value_prediction", probe.phi * w.real()},
                  {"weak_value", {w.real(), w.imag()}}};
    for (const auto& [arm, weight] : probe.weights) entry["w_" + arm] = weight;
    probes.push_back(std::move(entry));
    summary << label << ": shift " << num(r.inferred_shift) << " (prediction " << num(probe.phi * w.real()) << ")\n";
  }
  ctx.write_json("kerr.json", {{"probes", probes}});
  ctx.result.summary = summary.str();
}

void cmd_leakage(Context& ctx) {
  const auto& cfg = section(ctx.scenario.leakage, "leakage");
  const auto sweep = leakage_sweep(ctx.model, ctx.selection, cfg.arms, cfg.epsilons, cfg.ratio);
  std::vector<std::string> rows;
  json exponents = json::object();
  std::ostringstream summary;
  for (const auto& a : sweep.arms) {
    for (const auto& [eps, trace] : a.points) rows.push_back(a.arm + ',' + num(eps) + ',' + num(trace));
    exponents[a.arm] = {{"exponent", a.fit.exponent}, {"prefactor", a.fit.prefactor}, {"r_squared", a.fit.r_squared}};
    summary << a.arm << ": exponent " << num(a.fit.exponent) << '\n';
  }
  ctx.write_csv("leakage.csv", "arm,epsilon,trace", rows);
  ctx.write_json("exponents.json", {{"exponents", exponents},
                                    {"ratio",
                                     {{"numerator", sweep.ratio_numerator},
                                      {"denominator", sweep.ratio_denominator},
                                      {"epsilons", sweep.epsilons},
                                      {"values", sweep.ratios}}}});
  ctx.result.summary = summary.str();
}

}  // namespace

CommandResult execute(Command command, const RunOptions& options) {
  Scenario scenario = load_scenario(options.scenario);
  if (options.circuit) scenario.circuit = *options.circuit;
  if (options.output) scenario.output = *options.output;
  if (options.seed) scenario.seed = *options.seed;

  const std::string circuit_text = read_file(scenario.circuit);
  StagedModel model = compile(parse_circuit(circuit_text));
  SelectionPair selection = make_selection(model, scenario.selection);
  const std::string hash = scenario_hash(command, scenario.source_text, circuit_text, scenario.seed);

  std::error_code ec;
  fs::create_directories(scenario.output, ec);
  if (ec) throw IoError("cannot create output directory '" + scenario.output.string() + "': " + ec.message());

  Context ctx{command, std::move(scenario), std::move(model), std::move(selection), {}, hash, {}};
  ctx.out_dir = ctx.scenario.output;
  switch (command) {
    case Command::weak_values: cmd_weak_values(ctx); break;
    case Command::abl: cmd_abl(ctx); break;
    case Command::spectrum: cmd_spectrum(ctx); break;
    case Command::kerr: cmd_kerr(ctx); break;
    case Command::leakage: cmd_leakage(ctx); break;
  }
  return std::move(ctx.result);
}

int run(Command command, const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const auto result = execute(command, options);
    out << result.summary;
    for (const auto& f : result.files) out << "wrote " << f.string() << '\n';
    return kExitOk;
  } catch (const UndefinedQuantity& e) {
    err << "error: " << e.what() << '\n';
    return kExitUndefined;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace weaktrace
