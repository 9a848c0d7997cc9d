#include "weaktrace/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace weaktrace {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw ValidationError("scenario: " + where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) invalid(where, std::string("missing '") + key + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) invalid(where, "expected a number");
  return v.get<double>();
}

std::string string(const json& v, const std::string& where) {
  if (!v.is_string()) invalid(where, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> strings(const json& v, const std::string& where) {
  if (!v.is_array()) invalid(where, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(string(s, where));
  return out;
}

Complex complex(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2) return {number(v[0], where), number(v[1], where)};
  invalid(where, "expected a number or [re, im]");
}

std::map<std::string, Complex> amplitudes(const json& v, const std::string& where) {
  if (!v.is_object()) invalid(where, "expected an object of arm -> amplitude");
  std::map<std::string, Complex> out;
  for (const auto& [arm, amp] : v.items()) out[arm] = complex(amp, where + "." + arm);
  return out;
}

std::optional<std::size_t> stage(const json& obj, const std::string& where) {
  if (!obj.is_object() || !obj.contains("stage")) return std::nullopt;
  const auto& s = obj.at("stage");
  if (!s.is_number_unsigned()) invalid(where, "stage must be a non-negative integer");
  return s.get<std::size_t>();
}

// Either ["A", "B"] or {"arms": ["A", "B"], "stage": 3}.
ArmSet arm_set(const json& v, const std::string& where) {
  if (v.is_array()) return {std::nullopt, strings(v, where)};
  if (v.is_object()) return {stage(v, where), strings(require(v, "arms", where), where + ".arms")};
  invalid(where, "expected an arm list or {\"arms\": [...]}");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) invalid(where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      invalid(where, "unknown key '" + key + "'");
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  check_keys(doc, {"circuit", "output", "seed", "selection", "weak_values", "abl", "spectrum", "kerr", "leakage"},
             "top level");

  Scenario sc;
  sc.source_text = text;
  sc.circuit = base_dir / string(require(doc, "circuit", "top level"), "circuit");
  if (doc.contains("output")) sc.output = base_dir / string(doc.at("output"), "output");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) invalid("seed", "expected a non-negative 64-bit integer");
    sc.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (doc.contains("selection")) {
    const auto& s = doc.at("selection");
    check_keys(s, {"detector", "pre", "post"}, "selection");
    if (s.contains("detector")) sc.selection.detector = string(s.at("detector"), "selection.detector");
    if (s.contains("pre")) sc.selection.pre = amplitudes(s.at("pre"), "selection.pre");
    if (s.contains("post")) sc.selection.post = amplitudes(s.at("post"), "selection.post");
  }

  if (doc.contains("weak_values")) {
    const auto& w = doc.at("weak_values");
    check_keys(w, {"arm_sets"}, "weak_values");
    WeakValuesConfig cfg;
    for (const auto& set : require(w, "arm_sets", "weak_values")) cfg.arm_sets.push_back(arm_set(set, "weak_values.arm_sets"));
    sc.weak_values = std::move(cfg);
  }

  if (doc.contains("abl")) {
    const auto& a = doc.at("abl");
    check_keys(a, {"partitions"}, "abl");
    AblConfig cfg;
    for (const auto& p : require(a, "partitions", "abl")) {
      check_keys(p, {"sets", "stage"}, "abl.partitions");
      auto st = stage(p, "abl.partitions");
      std::vector<ArmSet> partition;
      for (const auto& set : require(p, "sets", "abl.partitions")) partition.push_back({st, strings(set, "abl.partitions.sets")});
      cfg.partitions.push_back(std::move(partition));
    }
    sc.abl = std::move(cfg);
  }

  if (doc.contains("spectrum")) {
    const auto& s = doc.at("spectrum");
    check_keys(s, {"samples", "dt", "pointer_width", "modulations"}, "spectrum");
    SpectrumConfig cfg;
    if (s.contains("samples")) {
      if (!s.at("samples").is_number_unsigned() || s.at("samples").get<std::size_t>() < 2)
        invalid("spectrum.samples", "expected an integer of at least 2");
      cfg.samples = s.at("samples").get<std::size_t>();
      cfg.dt = 1.0 / static_cast<double>(cfg.samples);
    }
    if (s.contains("dt")) cfg.dt = number(s.at("dt"), "spectrum.dt");
    if (s.contains("pointer_width")) cfg.pointer_width = number(s.at("pointer_width"), "spectrum.pointer_width");
    const auto& mods = require(s, "modulations", "spectrum");
    if (!mods.is_object()) invalid("spectrum.modulations", "expected an object");
    for (const auto& [mirror, m] : mods.items()) {
      const std::string where = "spectrum.modulations." + mirror;
      check_keys(m, {"frequency", "tilt"}, where);
      cfg.modulations[mirror] = {number(require(m, "frequency", where), where), number(require(m, "tilt", where), where)};
    }
    sc.spectrum = std::move(cfg);
  }

  if (doc.contains("kerr")) {
    const auto& k = doc.at("kerr");
    check_keys(k, {"probes"}, "kerr");
    KerrScenario cfg;
    std::size_t i = 0;
    for (const auto& p : require(k, "probes", "kerr")) {
      const std::string where = "kerr.probes[" + std::to_string(i++) + "]";
      check_keys(p, {"label", "weights", "phi", "bias", "stage"}, where);
      KerrProbeConfig probe;
      const auto& weights = require(p, "weights", where);
      if (!weights.is_object()) invalid(where + ".weights", "expected an object");
      for (const auto& [arm, w] : weights.items()) probe.weights[arm] = number(w, where + ".weights." + arm);
      probe.phi = number(require(p, "phi", where), where + ".phi");
      if (p.contains("bias")) probe.bias = number(p.at("bias"), where + ".bias");
      probe.stage = stage(p, where);
      std::string label = p.contains("label") ? string(p.at("label"), where + ".label") : "probe" + std::to_string(i - 1);
      cfg.probes.emplace_back(std::move(label), std::move(probe));
    }
    sc.kerr = std::move(cfg);
  }

  if (doc.contains("leakage")) {
    const auto& l = doc.at("leakage");
    check_keys(l, {"arms", "epsilons", "ratio"}, "leakage");
    LeakageConfig cfg;
    cfg.arms = strings(require(l, "arms", "leakage"), "leakage.arms");
    const auto& eps = require(l, "epsilons", "leakage");
    if (!eps.is_array()) invalid("leakage.epsilons", "expected an array");
    for (const auto& e : eps) cfg.epsilons.push_back(number(e, "leakage.epsilons"));
    if (l.contains("ratio")) {
      auto r = strings(l.at("ratio"), "leakage.ratio");
      if (r.size() != 2) invalid("leakage.ratio", "expected [numerator, denominator]");
      cfg.ratio = {r[0], r[1]};
    }
    sc.leakage = std::move(cfg);
  }
  return sc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.parent_path());
}

SelectionPair make_selection(const StagedModel& model, const SelectionConfig& cfg) {
  SelectionPair sel = default_selection(model);
  if (!cfg.pre.empty()) {
    sel.pre.amplitudes.setZero();
    for (const auto& [arm, amp] : cfg.pre) {
      auto i = model.initial_layout().index_of(arm);
      if (!i) throw ValidationError("selection.pre: arm '" + arm + "' is not live at the first stage");
      sel.pre.amplitudes(*i) = amp;
    }
  }
  if (!cfg.post.empty()) {
    PathState post{model.final_layout(), VectorXc::Zero(model.dimension())};
    for (const auto& [arm, amp] : cfg.post) {
      auto i = model.final_layout().index_of(arm);
      if (!i) throw ValidationError("selection.post: arm '" + arm + "' is not a terminal arm");
      post.amplitudes(*i) = amp;
    }
    sel.post = std::move(post);
  } else if (cfg.detector) {
    if (!model.final_layout().contains(*cfg.detector))
      throw ValidationError("selection.detector: '" + *cfg.detector + "' is not a terminal arm");
    sel.post = *cfg.detector;
  }
  // Validates dimensions and norms up front.
  pre_vector(model, sel);
  post_vector(model, sel);
  return sel;
}

}  // namespace weaktrace
