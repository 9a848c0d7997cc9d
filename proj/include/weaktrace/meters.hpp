#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weaktrace/circuit.hpp"
#include "weaktrace/tsvf.hpp"
#include "weaktrace/types.hpp"

namespace weaktrace {

// ---------------------------------------------------------------------------
// Ancilla markers

/// Rotates its own ancilla qubit |0> -> cos e|0> + sin e|1> when the photon is in `arm`.
struct Marker {
  std::string arm;
  double strength = 0.0;              // rotation angle, radians, in [0, pi/2]
  std::optional<std::size_t> stage;   // default: first boundary where `arm` is live
};

using MarkerSet = std::vector<Marker>;

class MarkedModel {
 public:
  MarkedModel(StagedModel model, MarkerSet markers);

  const StagedModel& model() const { return model_; }
  const MarkerSet& markers() const { return markers_; }
  std::size_t marker_stage(std::size_t i) const { return stages_[i]; }
  Eigen::Index ancilla_dimension() const { return Eigen::Index{1} << markers_.size(); }

  /// Joint photon x ancilla state after the last stage. Rows index the final
  /// arm layout, columns the ancilla register (bit i belongs to marker i).
  MatrixXc evolve(const VectorXc& pre) const;

 private:
  StagedModel model_;
  MarkerSet markers_;
  std::vector<std::size_t> stages_;
  std::vector<Eigen::Index> slots_;
};

MarkedModel attach_markers(const StagedModel& model, MarkerSet markers);

/// Unnormalized ancilla state conditioned on the photon ending in `post`.
VectorXc post_select(const MatrixXc& joint, const VectorXc& post);

/// Norm of the ancilla_i = |1> component relative to the conditioned norm.
double trace_magnitude(const VectorXc& ancilla, std::size_t marker);
double trace_magnitude(const MatrixXc& joint, const VectorXc& post, std::size_t marker);

/// Trace magnitudes of every marker under one selection.
std::vector<double> trace_magnitudes(const MarkedModel& marked, const SelectionPair& sel);

// ---------------------------------------------------------------------------
// Vibrating mirrors read by a quad-cell detector

struct Tilt {
  double frequency = 0.0;  // cycles per unit time
  double amplitude = 0.0;  // pointer displacement, units of the pointer width
};

/// Mirror name -> tilt modulation.
using MirrorModulation = std::map<std::string, Tilt, std::less<>>;

struct QuadCellSeries {
  std::vector<double> times;
  /// Empty where the post-selection probability vanishes at that instant.
  std::vector<std::optional<double>> x;

  bool complete() const;
  /// Throws UndefinedQuantity if any sample is degenerate.
  std::vector<double> values() const;
};

std::vector<double> uniform_times(std::size_t samples, double dt);

/// Exact Gaussian-pointer mean displacement, summed over interfering paths.
QuadCellSeries quad_cell_series(const StagedModel& model, const SelectionPair& sel, const MirrorModulation& mods,
                                std::span<const double> times, double pointer_width = 1.0);

/// First-order prediction: sum_j tilt_j(t) Re (P_arm(j))_w.
QuadCellSeries quad_cell_linear(const StagedModel& model, const SelectionPair& sel, const MirrorModulation& mods,
                                std::span<const double> times);

// ---------------------------------------------------------------------------
// Kerr cross-phase probe

struct KerrProbeConfig {
  std::map<std::string, double, std::less<>> weights;  // overlap of the probe beam with each arm
  double phi = 0.0;                                     // cross-phase for full overlap, radians
  double bias = kPi / 2;                                // probe interferometer bias (quadrature)
  std::optional<std::size_t> stage;                     // default: first boundary where all weighted arms are live
};

struct KerrReadout {
  std::size_t stage = 0;
  double intensity_plus = 0.0;   // probe output port 0
  double intensity_minus = 0.0;  // probe output port 1
  double post_probability = 0.0;
  double inferred_shift = 0.0;
  Eigen::Matrix2cd probe_density;  // conditioned probe state before recombination, basis (medium, reference)
};

/// Exact system x probe evolution with the system post-selected.
KerrReadout kerr_probe_shift(const StagedModel& model, const SelectionPair& sel, const KerrProbeConfig& cfg);

/// (sum_arm w_arm P_arm)_w; the small-phi shift is phi times its real part.
Complex kerr_weak_value(const StagedModel& model, const SelectionPair& sel, const KerrProbeConfig& cfg);

/// Probe state reduced over the system without any post-selection.
Eigen::Matrix2cd kerr_unconditioned_probe(const StagedModel& model, const SelectionPair& sel,
                                          const KerrProbeConfig& cfg);

}  // namespace weaktrace
