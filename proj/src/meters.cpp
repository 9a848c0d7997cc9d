#include "weaktrace/meters.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace weaktrace {

// ---------------------------------------------------------------------------
// Ancilla markers

namespace {

constexpr double kUnderflow = 1e-300;
constexpr double kVanishingProbability = kOrthogonalityThreshold * kOrthogonalityThreshold;

}  // namespace

MarkedModel::MarkedModel(StagedModel model, MarkerSet markers) : model_(std::move(model)), markers_(std::move(markers)) {
  if (markers_.size() > 20) throw ValidationError("at most 20 markers are supported");
  for (const auto& m : markers_) {
    if (!(m.strength >= 0.0 && m.strength <= kPi / 2))
      throw ValidationError("marker strength on '" + m.arm + "' must lie in [0, pi/2]");
    auto r = resolve(model_, ArmSet{m.stage, {m.arm}});
    stages_.push_back(r.stage);
    slots_.push_back(r.indices.front());
  }
}

MarkedModel attach_markers(const StagedModel& model, MarkerSet markers) {
  return MarkedModel(model, std::move(markers));
}

MatrixXc MarkedModel::evolve(const VectorXc& pre) const {
  if (pre.size() != model_.dimension()) throw ValidationError("pre-selection dimension mismatch");
  MatrixXc joint = MatrixXc::Zero(model_.dimension(), ancilla_dimension());
  joint.col(0) = pre;

  auto apply_markers = [&](std::size_t boundary) {
    for (std::size_t i = 0; i < markers_.size(); ++i) {
      if (stages_[i] != boundary) continue;
      const double c = std::cos(markers_[i].strength);
      const double s = std::sin(markers_[i].strength);
      const Eigen::Index bit = Eigen::Index{1} << i;
      auto row = joint.row(slots_[i]);
      for (Eigen::Index col = 0; col < joint.cols(); ++col) {
        if (col & bit) continue;
        const Complex a0 = row(col);
        const Complex a1 = row(col | bit);
        row(col) = c * a0 - s * a1;
        row(col | bit) = s * a0 + c * a1;
      }
    }
  };

  apply_markers(0);
  for (std::size_t k = 0; k < model_.num_stages(); ++k) {
    joint = model_.stages()[k].unitary * joint;
    apply_markers(k + 1);
  }
  return joint;
}

VectorXc post_select(const MatrixXc& joint, const VectorXc& post) {
  if (post.size() != joint.rows()) throw ValidationError("post-selection dimension mismatch");
  return joint.transpose() * post.conjugate();
}

double trace_magnitude(const VectorXc& ancilla, std::size_t marker) {
  const double total = ancilla.norm();
  if (!(total > kUnderflow)) throw UndefinedQuantity("post-selected state norm underflows");
  const Eigen::Index bit = Eigen::Index{1} << marker;
  if (bit >= ancilla.size()) throw ValidationError("marker index out of range");
  double flipped = 0.0;
  for (Eigen::Index c = 0; c < ancilla.size(); ++c) {
    if (c & bit) flipped += std::norm(ancilla(c));
  }
  return std::sqrt(flipped) / total;
}

double trace_magnitude(const MatrixXc& joint, const VectorXc& post, std::size_t marker) {
  return trace_magnitude(post_select(joint, post), marker);
}

std::vector<double> trace_magnitudes(const MarkedModel& marked, const SelectionPair& sel) {
  const auto& model = marked.model();
  const VectorXc ancilla = post_select(marked.evolve(pre_vector(model, sel)), post_vector(model, sel));
  std::vector<double> out;
  for (std::size_t i = 0; i < marked.markers().size(); ++i) out.push_back(trace_magnitude(ancilla, i));
  return out;
}

// ---------------------------------------------------------------------------
// Quad-cell pointer

bool QuadCellSeries::complete() const {
  return std::all_of(x.begin(), x.end(), [](const auto& v) { return v.has_value(); });
}

std::vector<double> QuadCellSeries::values() const {
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i]) throw UndefinedQuantity("quad-cell sample at t=" + std::to_string(times[i]) + " is degenerate");
    out.push_back(*x[i]);
  }
  return out;
}

std::vector<double> uniform_times(std::size_t samples, double dt) {
  std::vector<double> t(samples);
  for (std::size_t i = 0; i < samples; ++i) t[i] = static_cast<double>(i) * dt;
  return t;
}

namespace {

void validate_modulation(const StagedModel& model, const MirrorModulation& mods) {
  std::set<double> freqs;
  for (const auto& [name, tilt] : mods) {
    auto it = std::find_if(model.spec().elements.begin(), model.spec().elements.end(),
                           [&](const Element& e) { return e.name == name; });
    if (it == model.spec().elements.end() || !it->is_mirror())
      throw ValidationError("modulation target '" + name + "' is not a mirror");
    if (!std::isfinite(tilt.frequency) || !std::isfinite(tilt.amplitude) || tilt.amplitude < 0.0)
      throw ValidationError("modulation on '" + name + "' needs a finite frequency and a tilt >= 0");
    if (!freqs.insert(tilt.frequency).second)
      throw ValidationError("modulation frequencies must be pairwise distinct");
  }
}

struct TiltedPath {
  Complex amplitude;
  std::vector<Tilt> tilts;
};

std::vector<TiltedPath> weighted_paths(const StagedModel& model, const SelectionPair& sel,
                                       const MirrorModulation& mods) {
  const VectorXc pre = pre_vector(model, sel);
  const VectorXc post = post_vector(model, sel);
  std::vector<TiltedPath> out;
  for (Eigen::Index s = 0; s < pre.size(); ++s) {
    if (pre(s) == 0.0) continue;
    for (Eigen::Index d = 0; d < post.size(); ++d) {
      if (post(d) == 0.0) continue;
      const Complex weight = std::conj(post(d)) * pre(s);
      for (auto& p : trace_paths(model, model.initial_layout().label(s), model.final_layout().label(d))) {
        TiltedPath tp{weight * p.amplitude, {}};
        for (const auto& e : p.elements) {
          if (auto it = mods.find(e); it != mods.end()) tp.tilts.push_back(it->second);
        }
        out.push_back(std::move(tp));
      }
    }
  }
  return out;
}

double displacement(const std::vector<Tilt>& tilts, double t) {
  double d = 0.0;
  for (const auto& tilt : tilts) d += tilt.amplitude * std::sin(2.0 * kPi * tilt.frequency * t);
  return d;
}

}  // namespace

QuadCellSeries quad_cell_series(const StagedModel& model, const SelectionPair& sel, const MirrorModulation& mods,
                                std::span<const double> times, double pointer_width) {
  if (!(pointer_width > 0.0)) throw ValidationError("pointer width must be positive");
  validate_modulation(model, mods);
  const auto paths = weighted_paths(model, sel, mods);
  const double inv8s2 = 1.0 / (8.0 * pointer_width * pointer_width);

  QuadCellSeries series{{times.begin(), times.end()}, {}};
  series.x.reserve(times.size());
  std::vector<double> d(paths.size());
  for (double t : times) {
    for (std::size_t p = 0; p < paths.size(); ++p) d[p] = displacement(paths[p].tilts, t);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
      for (std::size_t q = 0; q < paths.size(); ++q) {
        const double gap = d[p] - d[q];
        const double term = (std::conj(paths[p].amplitude) * paths[q].amplitude).real() * std::exp(-gap * gap * inv8s2);
        num += term * 0.5 * (d[p] + d[q]);
        den += term;
      }
    }
    if (den < kVanishingProbability) {
      series.x.emplace_back(std::nullopt);
    } else {
      series.x.emplace_back(num / den);
    }
  }
  return series;
}

QuadCellSeries quad_cell_linear(const StagedModel& model, const SelectionPair& sel, const MirrorModulation& mods,
                                std::span<const double> times) {
  validate_modulation(model, mods);
  std::vector<std::pair<Tilt, double>> terms;
  for (const auto& [name, tilt] : mods) {
    const auto stage = *model.boundary_after(name);
    const Element& e = model.stage_element(stage - 1);
    terms.emplace_back(tilt, weak_value(model, sel, ArmSet{stage, {e.outputs[0]}}).real());
  }
  QuadCellSeries series{{times.begin(), times.end()}, {}};
  for (double t : times) {
    double x = 0.0;
    for (const auto& [tilt, w] : terms) x += tilt.amplitude * std::sin(2.0 * kPi * tilt.frequency * t) * w;
    series.x.emplace_back(x);
  }
  return series;
}

// ---------------------------------------------------------------------------
// Kerr probe

namespace {

struct KerrCoupling {
  std::size_t stage;
  VectorXc phases;  // per live arm at `stage`
};

KerrCoupling resolve_kerr(const StagedModel& model, const KerrProbeConfig& cfg) {
  if (cfg.weights.empty()) throw ValidationError("Kerr probe needs at least one arm weight");
  if (!(std::abs(cfg.phi) <= kPi)) throw ValidationError("Kerr phase must satisfy |phi| <= pi");
  if (!std::isfinite(cfg.bias)) throw ValidationError("Kerr bias must be finite");
  ArmSet arms{cfg.stage, {}};
  bool any = false;
  for (const auto& [arm, w] : cfg.weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("Kerr weight on '" + arm + "' must lie in [0, 1]");
    any = any || w > 0.0;
    arms.arms.push_back(arm);
  }
  if (!any) throw ValidationError("Kerr probe needs at least one nonzero weight");
  const auto r = resolve(model, arms);
  KerrCoupling out{r.stage, VectorXc::Ones(model.dimension())};
  std::size_t i = 0;
  for (const auto& [arm, w] : cfg.weights) out.phases(r.indices[i++]) = std::polar(1.0, cfg.phi * w);
  return out;
}

/// System x probe state after the last system stage; columns (medium, reference).
MatrixXc kerr_joint(const StagedModel& model, const SelectionPair& sel, const KerrCoupling& coupling) {
  const VectorXc pre = pre_vector(model, sel);
  MatrixXc joint(model.dimension(), 2);
  joint.col(0) = pre / std::sqrt(2.0);
  joint.col(1) = pre / std::sqrt(2.0);
  for (std::size_t k = 0; k <= model.num_stages(); ++k) {
    if (k == coupling.stage) joint.col(0) = joint.col(0).cwiseProduct(coupling.phases);
    if (k < model.num_stages()) joint = model.stages()[k].unitary * joint;
  }
  return joint;
}

Eigen::Matrix2cd density(const MatrixXc& joint) {
  Eigen::Matrix2cd rho = joint.transpose() * joint.conjugate();
  return rho / rho.trace().real();
}

}  // namespace

KerrReadout kerr_probe_shift(const StagedModel& model, const SelectionPair& sel, const KerrProbeConfig& cfg) {
  const auto coupling = resolve_kerr(model, cfg);
  const MatrixXc joint = kerr_joint(model, sel, coupling);
  const VectorXc post = post_vector(model, sel);

  // Project the system onto the post-selected state, keep the probe.
  const MatrixXc projected = post * (post.adjoint() * joint);
  const double prob = projected.squaredNorm();
  if (!(prob > kVanishingProbability)) throw UndefinedQuantity("post-selection probability vanishes");

  const Eigen::Vector2cd probe = joint.transpose() * post.conjugate();
  const Complex reference = probe(1) * std::polar(1.0, cfg.bias);
  const Complex plus = (probe(0) + reference) / std::sqrt(2.0);
  const Complex minus = (-probe(0) + reference) / std::sqrt(2.0);

  KerrReadout out;
  out.stage = coupling.stage;
  out.intensity_plus = std::norm(plus);
  out.intensity_minus = std::norm(minus);
  out.post_probability = out.intensity_plus + out.intensity_minus;
  const double contrast =
      std::clamp((out.intensity_plus - out.intensity_minus) / out.post_probability, -1.0, 1.0);
  out.inferred_shift = cfg.bias - std::acos(contrast);
  out.probe_density = density(projected);
  return out;
}

Complex kerr_weak_value(const StagedModel& model, const SelectionPair& sel, const KerrProbeConfig& cfg) {
  const auto stage = resolve_kerr(model, cfg).stage;
  Complex sum = 0.0;
  for (const auto& [arm, w] : cfg.weights) sum += w * weak_value(model, sel, ArmSet{stage, {arm}});
  return sum;
}

Eigen::Matrix2cd kerr_unconditioned_probe(const StagedModel& model, const SelectionPair& sel,
                                          const KerrProbeConfig& cfg) {
  return density(kerr_joint(model, sel, resolve_kerr(model, cfg)));
}

}  // namespace weaktrace
