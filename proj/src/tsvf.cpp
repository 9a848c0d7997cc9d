#include "weaktrace/tsvf.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace weaktrace {

namespace {

constexpr double kUnitNormTolerance = 1e-9;

void require_layout(const PathState& state, const ArmLayout& layout, const char* what) {
  if (state.amplitudes.size() != layout.size() || state.layout.labels() != layout.labels())
    throw ValidationError(std::string(what) + ": state does not match the model's arm layout");
  if (!state.amplitudes.allFinite()) throw ValidationError(std::string(what) + ": non-finite amplitude");
}

void require_unit(const VectorXc& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > kUnitNormTolerance)
    throw ValidationError(std::string(what) + ": state must have unit norm");
}

}  // namespace

Complex PathState::amplitude(std::string_view arm) const {
  auto i = layout.index_of(arm);
  if (!i) throw ValidationError("arm '" + std::string(arm) + "' is not live in this state");
  return amplitudes(*i);
}

PathState basis_state(const ArmLayout& layout, std::string_view arm) {
  auto i = layout.index_of(arm);
  if (!i) throw ValidationError("arm '" + std::string(arm) + "' is not live at this boundary");
  VectorXc v = VectorXc::Zero(layout.size());
  v(*i) = 1.0;
  return {layout, std::move(v)};
}

SelectionPair default_selection(const StagedModel& model) {
  return {basis_state(model.initial_layout(), model.spec().source_arm), model.spec().detect_arm()};
}

VectorXc pre_vector(const StagedModel& model, const SelectionPair& sel) {
  require_layout(sel.pre, model.initial_layout(), "pre-selection");
  require_unit(sel.pre.amplitudes, "pre-selection");
  return sel.pre.amplitudes;
}

VectorXc post_vector(const StagedModel& model, const SelectionPair& sel) {
  if (const auto* det = std::get_if<std::string>(&sel.post)) {
    return basis_state(model.final_layout(), *det).amplitudes;
  }
  const auto& state = std::get<PathState>(sel.post);
  require_layout(state, model.final_layout(), "post-selection");
  require_unit(state.amplitudes, "post-selection");
  return state.amplitudes;
}

std::vector<PathState> forward_states(const StagedModel& model, const PathState& pre) {
  require_layout(pre, model.initial_layout(), "forward_states");
  std::vector<PathState> out;
  out.reserve(model.num_stages() + 1);
  out.push_back(pre);
  for (std::size_t k = 0; k < model.num_stages(); ++k) {
    out.push_back({model.layout(k + 1), model.stages()[k].unitary * out.back().amplitudes});
  }
  return out;
}

std::vector<PathState> backward_states(const StagedModel& model, const PathState& post) {
  require_layout(post, model.final_layout(), "backward_states");
  const std::size_t n = model.num_stages();
  std::vector<PathState> out(n + 1);
  out[n] = post;
  for (std::size_t k = n; k > 0; --k) {
    out[k - 1] = {model.layout(k - 1), model.stages()[k - 1].unitary.adjoint() * out[k].amplitudes};
  }
  return out;
}

std::vector<PathState> backward_states(const StagedModel& model, std::string_view detector) {
  return backward_states(model, basis_state(model.final_layout(), detector));
}

ResolvedArms resolve(const StagedModel& model, const ArmSet& arms) {
  if (arms.arms.empty()) throw ValidationError("empty arm set");
  std::set<std::string, std::less<>> unique(arms.arms.begin(), arms.arms.end());
  if (unique.size() != arms.arms.size()) throw ValidationError("arm set lists an arm twice");

  std::size_t stage = 0;
  if (arms.stage) {
    stage = *arms.stage;
    if (stage >= model.layouts().size())
      throw ValidationError("stage " + std::to_string(stage) + " is out of range");
  } else {
    auto found = model.first_boundary_with(arms.arms);
    if (!found) throw ValidationError("arms are never live at a common stage");
    stage = *found;
  }
  ResolvedArms out{stage, {}};
  for (const auto& a : arms.arms) {
    auto i = model.layout(stage).index_of(a);
    if (!i) throw ValidationError("arm '" + a + "' is not live at stage " + std::to_string(stage));
    out.indices.push_back(*i);
  }
  return out;
}

namespace {

struct StagePair {
  VectorXc psi;
  VectorXc phi;
};

StagePair states_at(const StagedModel& model, const SelectionPair& sel, std::size_t stage) {
  const VectorXc pre = pre_vector(model, sel);
  const VectorXc post = post_vector(model, sel);
  const std::size_t n = model.num_stages();
  return {model.propagator(0, stage) * pre, model.propagator(stage, n).adjoint() * post};
}

}  // namespace

Complex weak_value(const StagedModel& model, const SelectionPair& sel, const ArmSet& arms) {
  const auto r = resolve(model, arms);
  const auto s = states_at(model, sel, r.stage);
  return weak_value(s.psi, s.phi, r.indices);
}

namespace {

std::pair<std::size_t, std::vector<std::vector<Eigen::Index>>> resolve_partition(const StagedModel& model,
                                                                                 std::span<const ArmSet> partition) {
  if (partition.empty()) throw ValidationError("empty partition");
  std::optional<std::size_t> stage;
  for (const auto& set : partition) {
    if (set.stage) {
      if (stage && *stage != *set.stage) throw ValidationError("partition sets name different stages");
      stage = set.stage;
    }
  }
  if (!stage) {
    std::vector<std::string> all;
    for (const auto& set : partition) all.insert(all.end(), set.arms.begin(), set.arms.end());
    auto found = model.first_boundary_with(all);
    if (!found) throw ValidationError("partition arms are never live at a common stage");
    stage = found;
  }

  std::vector<std::vector<Eigen::Index>> parts;
  std::vector<int> covered(static_cast<std::size_t>(model.dimension()), 0);
  for (const auto& set : partition) {
    auto r = resolve(model, ArmSet{stage, set.arms});
    for (auto i : r.indices) {
      if (covered[static_cast<std::size_t>(i)]++ > 0)
        throw ValidationError("overlapping partition: arm '" + model.layout(*stage).label(i) + "' appears twice");
    }
    parts.push_back(std::move(r.indices));
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (covered[i] == 0)
      throw ValidationError("incomplete partition: arm '" +
                            model.layout(*stage).label(static_cast<Eigen::Index>(i)) + "' is not covered");
  }
  return {*stage, std::move(parts)};
}

}  // namespace

double abl_probability(const StagedModel& model, const SelectionPair& sel, std::span<const ArmSet> partition,
                       std::size_t outcome) {
  if (outcome >= partition.size()) throw ValidationError("outcome index out of range");
  const auto [stage, parts] = resolve_partition(model, partition);
  const auto s = states_at(model, sel, stage);
  return abl_probabilities(s.psi, s.phi, std::span<const std::vector<Eigen::Index>>(parts))[outcome];
}

std::optional<int> certainty_check(const StagedModel& model, const SelectionPair& sel, const ArmSet& arms) {
  const auto r = resolve(model, arms);
  ArmSet found{r.stage, arms.arms};
  ArmSet rest{r.stage, {}};
  for (const auto& label : model.layout(r.stage).labels()) {
    if (std::find(arms.arms.begin(), arms.arms.end(), label) == arms.arms.end()) rest.arms.push_back(label);
  }
  double p = 1.0;
  if (!rest.arms.empty()) {
    const ArmSet partition[] = {found, rest};
    p = abl_probability(model, sel, partition, 0);
  } else {
    const auto s = states_at(model, sel, r.stage);
    checked_overlap(s.psi, s.phi);
  }
  constexpr double tol = 1e-10;
  if (std::abs(p - 1.0) <= tol) return 1;
  if (std::abs(p) <= tol) return 0;
  return std::nullopt;
}

}  // namespace weaktrace
