#include "weaktrace/circuit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "weaktrace/errors.hpp"

namespace weaktrace {

const char* to_string(CircuitErrorKind kind) {
  switch (kind) {
    case CircuitErrorKind::syntax: return "syntax error";
    case CircuitErrorKind::unknown_arm: return "unknown arm";
    case CircuitErrorKind::cycle: return "cycle detected";
    case CircuitErrorKind::duplicate_producer: return "duplicate arm producer";
    case CircuitErrorKind::duplicate_consumer: return "arm consumed twice";
    case CircuitErrorKind::duplicate_name: return "duplicate element name";
    case CircuitErrorKind::missing_source: return "missing source";
    case CircuitErrorKind::missing_detect: return "missing detect";
    case CircuitErrorKind::arity: return "wrong port count";
    case CircuitErrorKind::invalid_detector: return "invalid detector";
  }
  return "circuit error";
}

namespace {

std::string describe(CircuitErrorKind kind, const std::string& message, int line, int column) {
  std::string out;
  if (line > 0) {
    out = "line " + std::to_string(line);
    if (column > 0) out += ", column " + std::to_string(column);
    out += ": ";
  }
  return out + to_string(kind) + ": " + message;
}

}  // namespace

CircuitError::CircuitError(CircuitErrorKind kind, std::string message, int line, int column)
    : ValidationError(describe(kind, message, line, column)),
      kind_(kind),
      line_(line),
      column_(column) {}

Complex Element::coefficient(std::size_t in, std::size_t out) const {
  if (const auto* bs = std::get_if<BeamSplitter>(&kind)) {
    const double c = std::cos(bs->theta);
    const double s = std::sin(bs->theta);
    if (out == in) return c;
    if (out == 0) return std::polar(s, bs->phi);
    return -std::polar(s, -bs->phi);
  }
  if (const auto* ps = std::get_if<PhaseShift>(&kind)) return std::polar(1.0, ps->value);
  return 1.0;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  std::string_view text;
  int column;
};

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = static_cast<unsigned char>(s.front());
  if (!std::isalpha(head) && head != '_') return false;
  if (s == kVacuumPort) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_';
  });
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

// <number> | [<number>*|-]pi[/<number>]
std::optional<double> parse_angle(std::string_view s) {
  auto pos = s.find("pi");
  if (pos == std::string_view::npos) return parse_number(s);
  double scale = 1.0;
  std::string_view prefix = s.substr(0, pos);
  std::string_view suffix = s.substr(pos + 2);
  if (prefix == "-") {
    scale = -1.0;
  } else if (!prefix.empty()) {
    if (prefix.back() != '*') return std::nullopt;
    auto v = parse_number(prefix.substr(0, prefix.size() - 1));
    if (!v) return std::nullopt;
    scale = *v;
  }
  double divisor = 1.0;
  if (!suffix.empty()) {
    if (suffix.front() != '/') return std::nullopt;
    auto v = parse_number(suffix.substr(1));
    if (!v || *v == 0.0) return std::nullopt;
    divisor = *v;
  }
  return scale * kPi / divisor;
}

class LineParser {
 public:
  LineParser(std::string_view line, int line_no) : line_no_(line_no) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      tokens_.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
  }

  bool empty() const { return tokens_.empty(); }
  const Token& keyword() const { return tokens_.front(); }

  [[noreturn]] void fail(const Token& at, const std::string& message) const {
    throw CircuitError(CircuitErrorKind::syntax, message, line_no_, at.column);
  }

  Token name() const {
    if (tokens_.size() < 2) fail(keyword(), "expected element name after '" + std::string(keyword().text) + "'");
    const Token& t = tokens_[1];
    if (!is_identifier(t.text) || t.text.find('=') != std::string_view::npos)
      fail(t, "invalid element name '" + std::string(t.text) + "'");
    return t;
  }

  /// Splits key=value tokens starting at `first`, rejecting unknown and duplicate keys.
  std::map<std::string_view, Token> fields(std::size_t first,
                                           std::initializer_list<std::string_view> allowed) const {
    std::map<std::string_view, Token> out;
    for (std::size_t i = first; i < tokens_.size(); ++i) {
      const Token& t = tokens_[i];
      auto eq = t.text.find('=');
      if (eq == std::string_view::npos || eq == 0)
        fail(t, "expected key=value, got '" + std::string(t.text) + "'");
      std::string_view key = t.text.substr(0, eq);
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(t, "unknown key '" + std::string(key) + "'");
      Token value{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
      if (!out.emplace(key, value).second) fail(t, "duplicate key '" + std::string(key) + "'");
    }
    for (auto key : allowed) {
      if (!out.contains(key)) fail(tokens_.back(), "missing key '" + std::string(key) + "'");
    }
    return out;
  }

  std::string identifier(const Token& t) const {
    if (!is_identifier(t.text)) fail(t, "invalid arm label '" + std::string(t.text) + "'");
    return std::string(t.text);
  }

  std::vector<std::string> identifier_pair(const Token& t, bool allow_vacuum) const {
    auto comma = t.text.find(',');
    if (comma == std::string_view::npos) fail(t, "expected two comma-separated arm labels");
    std::vector<std::string> out;
    int column = t.column;
    for (std::string_view part : {t.text.substr(0, comma), t.text.substr(comma + 1)}) {
      Token sub{part, column};
      if (allow_vacuum && part == kVacuumPort) {
        out.emplace_back(part);
      } else {
        out.push_back(identifier(sub));
      }
      column += static_cast<int>(part.size()) + 1;
    }
    return out;
  }

  double angle(const Token& t) const {
    auto v = parse_angle(t.text);
    if (!v) fail(t, "invalid number '" + std::string(t.text) + "'");
    return *v;
  }

  int line() const { return line_no_; }

 private:
  int line_no_;
  std::vector<Token> tokens_;
};

}  // namespace

CircuitSpec parse_circuit(std::string_view text) {
  CircuitSpec spec;
  int line_no = 0;
  int source_line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    LineParser p(line, line_no);
    if (p.empty()) continue;
    const Token kw = p.keyword();

    if (kw.text == "source") {
      auto f = p.fields(1, {"arm"});
      if (source_line != 0)
        p.fail(kw, "second source declaration (first on line " + std::to_string(source_line) + ")");
      spec.source_arm = p.identifier(f.at("arm"));
      source_line = line_no;
    } else if (kw.text == "detect") {
      auto f = p.fields(1, {"arm"});
      spec.detect_arms.push_back(p.identifier(f.at("arm")));
    } else if (kw.text == "beamsplitter") {
      Element e;
      e.name = std::string(p.name().text);
      auto f = p.fields(2, {"in", "out", "theta", "phi"});
      e.inputs = p.identifier_pair(f.at("in"), true);
      e.outputs = p.identifier_pair(f.at("out"), false);
      e.kind = BeamSplitter{p.angle(f.at("theta")), p.angle(f.at("phi"))};
      e.line = line_no;
      spec.elements.push_back(std::move(e));
    } else if (kw.text == "mirror" || kw.text == "phaseshift") {
      Element e;
      e.name = std::string(p.name().text);
      const bool mirror = kw.text == "mirror";
      auto f = mirror ? p.fields(2, {"arm_in", "arm_out"}) : p.fields(2, {"arm_in", "arm_out", "value"});
      e.inputs = {p.identifier(f.at("arm_in"))};
      e.outputs = {p.identifier(f.at("arm_out"))};
      if (mirror) {
        e.kind = Mirror{};
      } else {
        e.kind = PhaseShift{p.angle(f.at("value"))};
      }
      e.line = line_no;
      spec.elements.push_back(std::move(e));
    } else {
      p.fail(kw, "unknown statement '" + std::string(kw.text) + "'");
    }
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::size_t> validate(const CircuitSpec& spec) {
  if (spec.source_arm.empty())
    throw CircuitError(CircuitErrorKind::missing_source, "no 'source' declaration");
  if (spec.detect_arms.empty())
    throw CircuitError(CircuitErrorKind::missing_detect, "no 'detect' declaration");

  const auto n = spec.elements.size();
  std::set<std::string, std::less<>> names;
  for (const auto& e : spec.elements) {
    if (!names.insert(e.name).second)
      throw CircuitError(CircuitErrorKind::duplicate_name, "'" + e.name + "'", e.line);
    const std::size_t ports = e.is_beamsplitter() ? 2 : 1;
    if (e.inputs.size() != ports || e.outputs.size() != ports)
      throw CircuitError(CircuitErrorKind::arity, "element '" + e.name + "'", e.line);
    if (ports == 2 && e.outputs[0] == e.outputs[1])
      throw CircuitError(CircuitErrorKind::arity, "element '" + e.name + "' repeats an output arm", e.line);
    if (ports == 2 && e.inputs[0] == e.inputs[1] && e.inputs[0] != kVacuumPort)
      throw CircuitError(CircuitErrorKind::arity, "element '" + e.name + "' repeats an input arm", e.line);
    for (const auto& out : e.outputs) {
      if (out == kVacuumPort)
        throw CircuitError(CircuitErrorKind::syntax, "vacuum port used as output of '" + e.name + "'", e.line);
    }
    if (!e.is_beamsplitter() && e.inputs[0] == kVacuumPort)
      throw CircuitError(CircuitErrorKind::syntax, "vacuum port on single-port element '" + e.name + "'", e.line);
  }

  // Producers: the source and every non-in-place output.
  std::map<std::string, std::optional<std::size_t>, std::less<>> producer;
  producer.emplace(spec.source_arm, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = spec.elements[i];
    if (e.in_place()) continue;
    for (const auto& out : e.outputs) {
      if (!producer.emplace(out, i).second)
        throw CircuitError(CircuitErrorKind::duplicate_producer, "arm '" + out + "' (element '" + e.name + "')",
                           e.line);
    }
  }

  std::map<std::string, std::size_t, std::less<>> consumer;
  std::map<std::string, std::vector<std::size_t>, std::less<>> attached;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = spec.elements[i];
    for (const auto& in : e.inputs) {
      if (in == kVacuumPort) continue;
      if (!producer.contains(in))
        throw CircuitError(CircuitErrorKind::unknown_arm, "'" + in + "' is never produced (element '" + e.name + "')",
                           e.line);
      if (e.in_place()) {
        attached[in].push_back(i);
      } else if (!consumer.emplace(in, i).second) {
        throw CircuitError(CircuitErrorKind::duplicate_consumer, "arm '" + in + "' (element '" + e.name + "')",
                           e.line);
      }
    }
  }

  for (const auto& d : spec.detect_arms) {
    if (!producer.contains(d)) throw CircuitError(CircuitErrorKind::unknown_arm, "detector arm '" + d + "'");
    if (consumer.contains(d))
      throw CircuitError(CircuitErrorKind::invalid_detector, "arm '" + d + "' is consumed by an element");
  }

  // Dependency edges: producer -> attached elements (chained) -> consumer.
  std::vector<std::vector<std::size_t>> next(n);
  std::vector<std::size_t> indegree(n, 0);
  auto edge = [&](std::size_t from, std::size_t to) {
    next[from].push_back(to);
    ++indegree[to];
  };
  for (const auto& [arm, prod] : producer) {
    std::optional<std::size_t> last = prod;
    if (auto it = attached.find(arm); it != attached.end()) {
      for (std::size_t a : it->second) {
        if (last) edge(*last, a);
        last = a;
      }
    }
    if (auto it = consumer.find(arm); it != consumer.end() && last) edge(*last, it->second);
  }

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t j : next[i]) {
      if (--indegree[j] == 0) ready.push(j);
    }
  }
  if (order.size() != n) {
    std::string members;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] == 0) continue;
      if (!members.empty()) members += ", ";
      members += spec.elements[i].name;
    }
    throw CircuitError(CircuitErrorKind::cycle, "elements involved: " + members);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_circuit(const CircuitSpec& spec) {
  std::ostringstream out;
  out << "source arm=" << spec.source_arm << '\n';
  for (const auto& e : spec.elements) {
    if (const auto* bs = std::get_if<BeamSplitter>(&e.kind)) {
      out << "beamsplitter " << e.name << " in=" << e.inputs[0] << ',' << e.inputs[1] << " out=" << e.outputs[0]
          << ',' << e.outputs[1] << " theta=" << format_double(bs->theta) << " phi=" << format_double(bs->phi);
    } else if (const auto* ps = std::get_if<PhaseShift>(&e.kind)) {
      out << "phaseshift " << e.name << " arm_in=" << e.inputs[0] << " arm_out=" << e.outputs[0]
          << " value=" << format_double(ps->value);
    } else {
      out << "mirror " << e.name << " arm_in=" << e.inputs[0] << " arm_out=" << e.outputs[0];
    }
    out << '\n';
  }
  for (const auto& d : spec.detect_arms) out << "detect arm=" << d << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Compilation

std::optional<Eigen::Index> ArmLayout::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - labels_.begin());
}

std::string vacuum_arm(std::string_view element, std::size_t port) {
  return "~" + std::string(element) + ".in" + std::to_string(port + 1);
}

namespace {

std::string resolved_input(const Element& e, std::size_t port) {
  return e.inputs[port] == kVacuumPort ? vacuum_arm(e.name, port) : e.inputs[port];
}

}  // namespace

StagedModel compile(const CircuitSpec& spec) {
  StagedModel model;
  model.spec_ = spec;
  model.order_ = validate(spec);
  const auto& elements = model.spec_.elements;

  std::vector<std::string> initial{spec.source_arm};
  model.arms_[spec.source_arm];
  for (std::size_t idx : model.order_) {
    const auto& e = elements[idx];
    for (std::size_t p = 0; p < e.inputs.size(); ++p) {
      if (e.inputs[p] != kVacuumPort) continue;
      initial.push_back(vacuum_arm(e.name, p));
      model.arms_[initial.back()];
    }
  }
  for (std::size_t idx : model.order_) {
    const auto& e = elements[idx];
    if (e.in_place()) {
      model.arms_[e.inputs[0]].in_place.push_back(idx);
      continue;
    }
    for (std::size_t p = 0; p < e.inputs.size(); ++p) model.arms_[resolved_input(e, p)].consumer = {idx, p};
    for (const auto& out : e.outputs) model.arms_[out].producer = idx;
  }

  ArmLayout layout(initial);
  model.layouts_.push_back(layout);
  const Eigen::Index dim = layout.size();
  for (std::size_t idx : model.order_) {
    const auto& e = elements[idx];
    std::vector<Eigen::Index> slots;
    for (std::size_t p = 0; p < e.inputs.size(); ++p) slots.push_back(*layout.index_of(resolved_input(e, p)));

    MatrixXc u = MatrixXc::Identity(dim, dim);
    for (std::size_t in = 0; in < slots.size(); ++in) {
      for (std::size_t out = 0; out < slots.size(); ++out) u(slots[out], slots[in]) = e.coefficient(in, out);
    }
    auto labels = layout.labels();
    for (std::size_t p = 0; p < slots.size(); ++p) labels[static_cast<std::size_t>(slots[p])] = e.outputs[p];
    layout = ArmLayout(std::move(labels));

    model.stages_.push_back({e.name, std::move(u)});
    model.layouts_.push_back(layout);
  }

  for (const auto& d : model.spec_.detect_arms) model.paths_[d] = trace_paths(model, spec.source_arm, d);
  return model;
}

MatrixXc StagedModel::propagator(std::size_t from, std::size_t to) const {
  if (from > to || to > stages_.size()) throw std::out_of_range("propagator: bad boundary range");
  MatrixXc u = MatrixXc::Identity(dimension(), dimension());
  for (std::size_t k = from; k < to; ++k) u = stages_[k].unitary * u;
  return u;
}

Complex StagedModel::transfer_amplitude(std::string_view detector) const {
  auto det = final_layout().index_of(detector);
  if (!det) throw ValidationError("'" + std::string(detector) + "' is not a terminal arm");
  auto src = *initial_layout().index_of(spec_.source_arm);
  return propagator(0, stages_.size())(*det, src);
}

std::optional<std::size_t> StagedModel::first_boundary_with(std::span<const std::string> labels) const {
  for (std::size_t k = 0; k < layouts_.size(); ++k) {
    if (std::all_of(labels.begin(), labels.end(), [&](const std::string& l) { return layouts_[k].contains(l); }))
      return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> StagedModel::boundary_after(std::string_view element) const {
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    if (stages_[k].element == element) return k + 1;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Path enumeration

std::vector<PathAmplitude> trace_paths(const StagedModel& model, std::string_view from_arm,
                                       std::string_view to_arm) {
  const auto& graph = model.arm_graph();
  const auto& elements = model.spec().elements;
  if (!graph.contains(from_arm)) throw ValidationError("unknown arm '" + std::string(from_arm) + "'");
  if (!graph.contains(to_arm)) throw ValidationError("unknown arm '" + std::string(to_arm) + "'");

  std::vector<PathAmplitude> found;
  PathAmplitude current;
  std::function<void(const std::string&, Complex)> walk = [&](const std::string& arm, Complex amp) {
    const ArmNode& node = graph.find(arm)->second;
    const auto arms_mark = current.arms.size();
    const auto elems_mark = current.elements.size();
    current.arms.push_back(arm);
    for (std::size_t idx : node.in_place) {
      amp *= elements[idx].coefficient(0, 0);
      current.elements.push_back(elements[idx].name);
    }
    if (arm == to_arm) {
      found.push_back({current.arms, current.elements, amp});
    } else if (node.consumer) {
      const auto [idx, port] = *node.consumer;
      const Element& e = elements[idx];
      current.elements.push_back(e.name);
      for (std::size_t out = 0; out < e.outputs.size(); ++out) walk(e.outputs[out], amp * e.coefficient(port, out));
    }
    current.arms.resize(arms_mark);
    current.elements.resize(elems_mark);
  };
  walk(std::string(from_arm), 1.0);
  return found;
}

std::vector<PathAmplitude> enumerate_paths(const StagedModel& model) {
  return model.path_table().at(model.spec().detect_arm());
}

}  // namespace weaktrace
