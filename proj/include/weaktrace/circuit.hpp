#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "weaktrace/types.hpp"

namespace weaktrace {

/// Input label that marks an unused (vacuum) beamsplitter port.
inline constexpr std::string_view kVacuumPort = "_";

/// Acts on (in1, in2) as [[cos t, e^{i p} sin t], [-e^{-i p} sin t, cos t]].
struct BeamSplitter {
  double theta = 0.0;
  double phi = 0.0;
  bool operator==(const BeamSplitter&) const = default;
};

/// Identity on its arm; a named attachment point for tilt couplings.
struct Mirror {
  bool operator==(const Mirror&) const = default;
};

struct PhaseShift {
  double value = 0.0;
  bool operator==(const PhaseShift&) const = default;
};

using ElementKind = std::variant<BeamSplitter, Mirror, PhaseShift>;

struct Element {
  ElementKind kind;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  int line = 0;

  bool is_beamsplitter() const { return std::holds_alternative<BeamSplitter>(kind); }
  bool is_mirror() const { return std::holds_alternative<Mirror>(kind); }
  /// Single-port element whose output label equals its input label.
  bool in_place() const { return inputs.size() == 1 && inputs[0] == outputs[0]; }
  /// Amplitude carried from input port `in` to output port `out`.
  Complex coefficient(std::size_t in, std::size_t out) const;

  /// Structural equality; source line numbers are ignored.
  bool operator==(const Element& other) const {
    return kind == other.kind && name == other.name && inputs == other.inputs &&
           outputs == other.outputs;
  }
};

struct CircuitSpec {
  std::vector<Element> elements;
  std::string source_arm;
  std::vector<std::string> detect_arms;

  const std::string& detect_arm() const { return detect_arms.front(); }
  bool operator==(const CircuitSpec&) const = default;
};

/// Parses the line-oriented interferometer description and validates it.
/// Throws CircuitError carrying the offending line and column.
CircuitSpec parse_circuit(std::string_view text);

/// Checks the structural invariants of a spec and returns the element indices
/// in topological order (ties broken by declaration order).
std::vector<std::size_t> validate(const CircuitSpec& spec);

/// Canonical text form; parse_circuit(format_circuit(s)) == s.
std::string format_circuit(const CircuitSpec& spec);

/// Ordered labels of the arms that are live at one stage boundary.
class ArmLayout {
 public:
  ArmLayout() = default;
  explicit ArmLayout(std::vector<std::string> labels) : labels_(std::move(labels)) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(Eigen::Index i) const { return labels_[static_cast<std::size_t>(i)]; }
  std::optional<Eigen::Index> index_of(std::string_view label) const;
  bool contains(std::string_view label) const { return index_of(label).has_value(); }

 private:
  std::vector<std::string> labels_;
};

/// One element's action, mapping the live arms before it onto the live arms
/// after it. The unitary is square: consumed slots are reused by outputs.
struct Stage {
  std::string element;
  MatrixXc unitary;
};

struct PathAmplitude {
  std::vector<std::string> arms;      // arm labels visited, in order
  std::vector<std::string> elements;  // every element traversed, in-place ones included
  Complex amplitude;
};

struct ArmNode {
  std::optional<std::size_t> producer;              // absent for source and vacuum arms
  std::vector<std::size_t> in_place;                // attached elements, in stage order
  std::optional<std::pair<std::size_t, std::size_t>> consumer;  // (element, input port)
};

class StagedModel {
 public:
  const CircuitSpec& spec() const { return spec_; }
  const std::vector<Stage>& stages() const { return stages_; }
  std::size_t num_stages() const { return stages_.size(); }
  /// Layouts at boundaries 0..num_stages(); boundary k follows stage k-1.
  const std::vector<ArmLayout>& layouts() const { return layouts_; }
  const ArmLayout& layout(std::size_t boundary) const { return layouts_.at(boundary); }
  const ArmLayout& initial_layout() const { return layouts_.front(); }
  const ArmLayout& final_layout() const { return layouts_.back(); }
  Eigen::Index dimension() const { return initial_layout().size(); }

  /// Element indices (into spec().elements) in stage order.
  const std::vector<std::size_t>& order() const { return order_; }
  const Element& stage_element(std::size_t stage) const { return spec_.elements[order_[stage]]; }
  const std::map<std::string, ArmNode, std::less<>>& arm_graph() const { return arms_; }

  /// U_to ... U_{from+1}: maps states at boundary `from` to boundary `to`.
  MatrixXc propagator(std::size_t from, std::size_t to) const;
  /// <detector| U_N ... U_1 |source>.
  Complex transfer_amplitude(std::string_view detector) const;
  /// First boundary at which every label is live.
  std::optional<std::size_t> first_boundary_with(std::span<const std::string> labels) const;
  /// Boundary immediately after the named element.
  std::optional<std::size_t> boundary_after(std::string_view element) const;

  /// Source -> detector paths for every declared detector.
  const std::map<std::string, std::vector<PathAmplitude>, std::less<>>& path_table() const {
    return paths_;
  }

 private:
  friend StagedModel compile(const CircuitSpec& spec);

  CircuitSpec spec_;
  std::vector<std::size_t> order_;
  std::vector<Stage> stages_;
  std::vector<ArmLayout> layouts_;
  std::map<std::string, ArmNode, std::less<>> arms_;
  std::map<std::string, std::vector<PathAmplitude>, std::less<>> paths_;
};

/// Internal label of the vacuum arm feeding input `port` of `element`.
std::string vacuum_arm(std::string_view element, std::size_t port);

StagedModel compile(const CircuitSpec& spec);

/// Exhaustive depth-first walk of the arm graph from `from_arm` to
/// `to_arm`, multiplying per-element port coefficients.
std::vector<PathAmplitude> trace_paths(const StagedModel& model, std::string_view from_arm,
                                       std::string_view to_arm);

/// Source -> first declared detector.
std::vector<PathAmplitude> enumerate_paths(const StagedModel& model);

}  // namespace weaktrace
