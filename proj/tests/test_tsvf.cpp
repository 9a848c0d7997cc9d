#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "random_circuit.hpp"
#include "weaktrace/scenario.hpp"
#include "weaktrace/tsvf.hpp"

using namespace weaktrace;

namespace {

StagedModel fixture() { return compile(parse_circuit(read_file(WEAKTRACE_FIXTURE))); }

std::size_t abc_stage(const StagedModel& m) { return *m.first_boundary_with(std::vector<std::string>{"A", "B", "C"}); }

/// Equal up to one global phase: |<a|b>| == |a| |b| and equal norms.
bool same_ray(const VectorXc& a, const VectorXc& b, double tol) {
  if (a.size() != b.size()) return false;
  const Complex ov = a.dot(b);
  if (std::abs(ov) < tol) return a.norm() < tol && b.norm() < tol;
  const Complex phase = ov / std::abs(ov);
  return (a * phase - b).cwiseAbs().maxCoeff() <= tol;
}

VectorXc random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  VectorXc v(n);
  for (auto& a : v) a = Complex(g(rng), g(rng));
  return v.normalized();
}

std::vector<Eigen::Index> random_subset(std::mt19937_64& rng, Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_int_distribution<Eigen::Index> k(1, n - 1);
  idx.resize(static_cast<std::size_t>(k(rng)));
  return idx;
}

}  // namespace

TEST_CASE("forward_states") {
  SUBCASE("nested interferometer: equal amplitudes on A, B, C") {
    const auto m = fixture();
    const auto fwd = forward_states(m, basis_state(m.initial_layout(), "S"));
    REQUIRE(fwd.size() == m.num_stages() + 1);
    const VectorXc expected = VectorXc::Constant(3, 1.0 / std::sqrt(3.0));
    CHECK(same_ray(fwd[abc_stage(m)].amplitudes, expected, 1e-12));
    for (const auto& s : fwd) CHECK(std::abs(s.norm() - 1.0) <= 1e-12);
  }
  SUBCASE("empty circuit") {
    const auto m = compile(parse_circuit("source arm=a\ndetect arm=a"));
    const auto pre = basis_state(m.initial_layout(), "a");
    const auto fwd = forward_states(m, pre);
    REQUIRE(fwd.size() == 1);
    CHECK(fwd[0].amplitudes == pre.amplitudes);
  }
  SUBCASE("single beamsplitter gives the first column of the convention matrix") {
    const auto m = compile(parse_circuit(read_file(WEAKTRACE_TEST_DATA "/single_bs.circ")));
    const auto fwd = forward_states(m, basis_state(m.initial_layout(), "s"));
    const double h = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(fwd[1].amplitude("a") - h) < 1e-15);
    CHECK(std::abs(fwd[1].amplitude("b") + h) < 1e-15);
  }
  SUBCASE("layout mismatch is rejected") {
    const auto m = fixture();
    PathState bad{ArmLayout({"x"}), VectorXc::Ones(1)};
    CHECK_THROWS_AS(forward_states(m, bad), ValidationError);
  }
}

TEST_CASE("backward_states") {
  SUBCASE("nested interferometer: (1, -1, 1) on A, B, C") {
    const auto m = fixture();
    const auto bwd = backward_states(m, "D");
    VectorXc expected(3);
    expected << 1.0, -1.0, 1.0;
    expected /= std::sqrt(3.0);
    CHECK(same_ray(bwd[abc_stage(m)].amplitudes, expected, 1e-12));
  }
  SUBCASE("empty circuit") {
    const auto m = compile(parse_circuit("source arm=a\ndetect arm=a"));
    const auto bwd = backward_states(m, "a");
    REQUIRE(bwd.size() == 1);
    CHECK(bwd[0].amplitudes == basis_state(m.final_layout(), "a").amplitudes);
  }
  SUBCASE("a mirror leaves the backward state unchanged") {
    const auto m = fixture();
    const auto bwd = backward_states(m, "D");
    const auto after = *m.boundary_after("MB");
    CHECK((bwd[after].amplitudes - bwd[after - 1].amplitudes).norm() == 0.0);
  }
}

TEST_CASE("weak_value: nested interferometer") {
  const auto m = fixture();
  const auto sel = default_selection(m);
  auto wv = [&](std::vector<std::string> arms) { return weak_value(m, sel, ArmSet{std::nullopt, std::move(arms)}); };

  const Complex a = wv({"A"}), b = wv({"B"}), c = wv({"C"}), bc = wv({"B", "C"});
  CHECK(std::abs(a.real() - 1.0) <= 1e-12);
  CHECK(std::abs(b.real() + 1.0) <= 1e-12);
  CHECK(std::abs(c.real() - 1.0) <= 1e-12);
  CHECK(std::abs(bc) <= 1e-12);
  for (auto w : {a, b, c, bc}) CHECK(std::abs(w.imag()) <= 1e-12);

  // The arms into and out of the inner interferometer come out as computed.
  CHECK(std::abs(wv({"E"})) <= 1e-12);
  CHECK(std::abs(wv({"F"})) <= 1e-12);

  for (std::size_t k = 0; k < m.layouts().size(); ++k) {
    const Complex all = weak_value(m, sel, ArmSet{k, m.layout(k).labels()});
    CHECK(std::abs(all - 1.0) <= 1e-12);
  }
}

TEST_CASE("weak_value: errors") {
  const auto m = compile(parse_circuit(read_file(WEAKTRACE_TEST_DATA "/orthogonal.circ")));
  CHECK_THROWS_AS(weak_value(m, default_selection(m), ArmSet{std::nullopt, {"a"}}), UndefinedQuantity);

  const auto f = fixture();
  const auto sel = default_selection(f);
  CHECK_THROWS_AS(weak_value(f, sel, ArmSet{std::nullopt, {"nowhere"}}), ValidationError);
  CHECK_THROWS_AS(weak_value(f, sel, ArmSet{0, {"A"}}), ValidationError);
  CHECK_THROWS_AS(weak_value(f, sel, ArmSet{std::nullopt, {"A", "A"}}), ValidationError);
  CHECK_THROWS_AS(weak_value(f, sel, ArmSet{std::nullopt, {"S", "D"}}), ValidationError);

  SelectionPair not_unit = sel;
  not_unit.pre.amplitudes *= 2.0;
  CHECK_THROWS_AS(weak_value(f, not_unit, ArmSet{std::nullopt, {"A"}}), ValidationError);
}

TEST_CASE("abl_probability: three-box") {
  const auto m = fixture();
  const auto sel = default_selection(m);
  const std::vector<ArmSet> a_vs_bc{{std::nullopt, {"A"}}, {std::nullopt, {"B", "C"}}};
  const std::vector<ArmSet> c_vs_ab{{std::nullopt, {"C"}}, {std::nullopt, {"A", "B"}}};
  CHECK(std::abs(abl_probability(m, sel, a_vs_bc, 0) - 1.0) <= 1e-10);
  CHECK(std::abs(abl_probability(m, sel, c_vs_ab, 0) - 1.0) <= 1e-10);
  CHECK(std::abs(abl_probability(m, sel, a_vs_bc, 1)) <= 1e-10);

  SUBCASE("errors") {
    const std::vector<ArmSet> overlap{{std::nullopt, {"A", "B"}}, {std::nullopt, {"B", "C"}}};
    const std::vector<ArmSet> incomplete{{std::nullopt, {"A"}}, {std::nullopt, {"B"}}};
    CHECK_THROWS_AS(abl_probability(m, sel, overlap, 0), ValidationError);
    CHECK_THROWS_AS(abl_probability(m, sel, incomplete, 0), ValidationError);
    CHECK_THROWS_AS(abl_probability(m, sel, a_vs_bc, 2), ValidationError);
  }
}

TEST_CASE("certainty_check") {
  const auto m = fixture();
  const auto sel = default_selection(m);
  CHECK(certainty_check(m, sel, ArmSet{std::nullopt, {"A"}}) == 1);
  CHECK(certainty_check(m, sel, ArmSet{std::nullopt, {"C"}}) == 1);
  CHECK(certainty_check(m, sel, ArmSet{std::nullopt, {"B", "C"}}) == 0);
  CHECK_FALSE(certainty_check(m, sel, ArmSet{std::nullopt, {"B"}}).has_value());

  // Closed-form ABL for B alone with psi = (1,1,1)/sqrt3, phi = (1,-1,1)/sqrt3.
  const double in_b = std::norm(-1.0 / 3.0);
  const double out_b = std::norm(2.0 / 3.0);
  const std::vector<ArmSet> b_vs_ac{{std::nullopt, {"B"}}, {std::nullopt, {"A", "C"}}};
  CHECK(abl_probability(m, sel, b_vs_ac, 0) == doctest::Approx(in_b / (in_b + out_b)).epsilon(1e-12));
}

TEST_CASE("property: additivity, completeness, ABL normalization (1000 instances)") {
  std::mt19937_64 rng(1991);
  std::uniform_int_distribution<Eigen::Index> dim(3, 8);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = dim(rng);
    const VectorXc psi = random_unit(rng, n);
    const VectorXc phi = random_unit(rng, n);
    auto s = random_subset(rng, n);
    std::vector<Eigen::Index> t, rest;
    {
      std::vector<Eigen::Index> others;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::find(s.begin(), s.end(), i) == s.end()) others.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> cut(1, others.size());
      const auto k = cut(rng);
      t.assign(others.begin(), others.begin() + static_cast<long>(k));
      rest.assign(others.begin() + static_cast<long>(k), others.end());
    }
    std::vector<Eigen::Index> st = s;
    st.insert(st.end(), t.begin(), t.end());

    const Complex ws = weak_value(psi, phi, s);
    const Complex wt = weak_value(psi, phi, t);
    const Complex wst = weak_value(psi, phi, st);
    CHECK(std::abs(wst - (ws + wt)) <= 1e-12);

    std::vector<std::vector<Eigen::Index>> partition{s, t};
    if (!rest.empty()) partition.push_back(rest);
    Complex total = 0.0;
    for (const auto& p : partition) total += weak_value(psi, phi, p);
    CHECK(std::abs(total - 1.0) <= 1e-12);

    const auto probs = abl_probabilities(psi, phi, std::span<const std::vector<Eigen::Index>>(partition));
    CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-12);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("property: certain outcomes have weak value 1 (1000 instances)") {
  std::mt19937_64 rng(1988);
  std::uniform_int_distribution<Eigen::Index> dim(3, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = dim(rng);
    const VectorXc psi = random_unit(rng, n);
    const auto support = random_subset(rng, n);
    std::vector<Eigen::Index> complement;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::find(support.begin(), support.end(), i) == support.end()) complement.push_back(i);
    }
    // phi = P psi' / |P psi'| makes <phi|(1-P)|psi> vanish identically.
    const VectorXc other = random_unit(rng, n);
    VectorXc phi = VectorXc::Zero(n);
    for (auto i : support) phi(i) = other(i);
    phi.normalize();

    const std::vector<std::vector<Eigen::Index>> partition{support, complement};
    const auto probs = abl_probabilities(psi, phi, std::span<const std::vector<Eigen::Index>>(partition));
    CHECK(std::abs(probs[0] - 1.0) <= 1e-10);
    CHECK(std::abs(weak_value(psi, phi, support) - 1.0) <= 1e-10);
  }
}

TEST_CASE("property: <phi_k|psi_k> is the same at every stage") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = compile(parse_circuit(testing::random_circuit_text(rng, 10)));
    const auto fwd = forward_states(model, PathState{model.initial_layout(), random_unit(rng, model.dimension())});
    const auto bwd = backward_states(model, PathState{model.final_layout(), random_unit(rng, model.dimension())});
    const Complex first = bwd[0].amplitudes.dot(fwd[0].amplitudes);
    for (std::size_t k = 1; k < fwd.size(); ++k) {
      CHECK(std::abs(bwd[k].amplitudes.dot(fwd[k].amplitudes) - first) <= 1e-12);
    }
  }
}

TEST_CASE("kernels work in single precision too") {
  Eigen::VectorXcf psi = Eigen::VectorXcf::Constant(3, 1.0f / std::sqrt(3.0f));
  Eigen::VectorXcf phi(3);
  phi << 1.0f, -1.0f, 1.0f;
  phi /= std::sqrt(3.0f);
  const std::vector<Eigen::Index> b{1};
  const std::complex<float> w = weak_value(psi, phi, b);
  CHECK(w.real() == doctest::Approx(-1.0f).epsilon(1e-5));
}
