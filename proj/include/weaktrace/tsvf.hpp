#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "weaktrace/circuit.hpp"
#include "weaktrace/errors.hpp"
#include "weaktrace/types.hpp"

namespace weaktrace {

/// Overlaps below this make <phi|psi> unusable as a denominator.
inline constexpr double kOrthogonalityThreshold = 1e-12;

struct PathState {
  ArmLayout layout;
  VectorXc amplitudes;

  Complex amplitude(std::string_view arm) const;
  double norm() const { return amplitudes.norm(); }
};

PathState basis_state(const ArmLayout& layout, std::string_view arm);

struct SelectionPair {
  PathState pre;                                // at boundary 0
  std::variant<std::string, PathState> post;    // detector label or state at the final boundary
};

/// Unit amplitude on the source, post-selected on the first declared detector.
SelectionPair default_selection(const StagedModel& model);

/// Arms at one stage boundary; without a stage, the first boundary where all are live.
struct ArmSet {
  std::optional<std::size_t> stage;
  std::vector<std::string> arms;
};

VectorXc pre_vector(const StagedModel& model, const SelectionPair& sel);
VectorXc post_vector(const StagedModel& model, const SelectionPair& sel);

/// States at boundaries 0..N: U_k ... U_1 |pre>.
std::vector<PathState> forward_states(const StagedModel& model, const PathState& pre);
/// States at boundaries 0..N: U_{k+1}^dag ... U_N^dag |post>.
std::vector<PathState> backward_states(const StagedModel& model, const PathState& post);
std::vector<PathState> backward_states(const StagedModel& model, std::string_view detector);

struct ResolvedArms {
  std::size_t stage;
  std::vector<Eigen::Index> indices;
};

ResolvedArms resolve(const StagedModel& model, const ArmSet& arms);

// ---------------------------------------------------------------------------
// Kernels on bare vectors. `support` lists the indices kept by the projector.

template <typename Psi, typename Phi>
auto checked_overlap(const Eigen::MatrixBase<Psi>& psi, const Eigen::MatrixBase<Phi>& phi) {
  const auto amp = phi.dot(psi);  // conjugates phi
  if (std::abs(amp) < kOrthogonalityThreshold)
    throw UndefinedQuantity("undefined weak value: pre- and post-selected states are orthogonal");
  return amp;
}

template <typename Psi, typename Phi>
auto projected_overlap(const Eigen::MatrixBase<Psi>& psi, const Eigen::MatrixBase<Phi>& phi,
                       std::span<const Eigen::Index> support) {
  typename Psi::Scalar sum{0};
  for (Eigen::Index i : support) sum += std::conj(phi(i)) * psi(i);
  return sum;
}

/// <phi| P |psi> / <phi|psi>.
template <typename Psi, typename Phi>
auto weak_value(const Eigen::MatrixBase<Psi>& psi, const Eigen::MatrixBase<Phi>& phi,
                std::span<const Eigen::Index> support) {
  const auto denom = checked_overlap(psi, phi);
  return projected_overlap(psi, phi, support) / denom;
}

/// ABL probabilities of every outcome of a (possibly degenerate) projective partition.
template <typename Psi, typename Phi>
auto abl_probabilities(const Eigen::MatrixBase<Psi>& psi, const Eigen::MatrixBase<Phi>& phi,
                       std::span<const std::vector<Eigen::Index>> partition) {
  using Real = typename Eigen::NumTraits<typename Psi::Scalar>::Real;
  checked_overlap(psi, phi);
  std::vector<Real> probs;
  probs.reserve(partition.size());
  Real total{0};
  for (const auto& part : partition) {
    probs.push_back(std::norm(projected_overlap(psi, phi, part)));
    total += probs.back();
  }
  for (auto& p : probs) p /= total;
  return probs;
}

// ---------------------------------------------------------------------------

Complex weak_value(const StagedModel& model, const SelectionPair& sel, const ArmSet& arms);

/// Probability of `outcome` for a partition of one stage's live arms.
double abl_probability(const StagedModel& model, const SelectionPair& sel, std::span<const ArmSet> partition,
                       std::size_t outcome);

/// 1 if the photon is certainly found in `arms`, 0 if certainly not, otherwise empty.
std::optional<int> certainty_check(const StagedModel& model, const SelectionPair& sel, const ArmSet& arms);

}  // namespace weaktrace
