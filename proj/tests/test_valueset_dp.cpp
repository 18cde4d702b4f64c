#include "spag/valueset_dp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "spag/errors.hpp"
#include "spag/registry.hpp"
#include "test_util.hpp"

using namespace spag;

namespace {

bool has_vertex(const ValuePolytope& poly, double a, double b,
                double tol = 1e-6) {
  for (const auto& v : poly.vertices) {
    if (std::fabs(v[0] - a) <= tol && std::fabs(v[1] - b) <= tol) return true;
  }
  return false;
}

// Per-slice agent extremes, keyed by the slice position rounded to the grid.
std::map<long, std::pair<double, double>> slice_extremes(
    const std::vector<std::vector<double>>& pts, double spacing) {
  std::map<long, std::pair<double, double>> out;
  for (const auto& p : pts) {
    double k = p[0] / spacing;
    long kk = std::lround(k);
    if (std::fabs(k - static_cast<double>(kk)) > 1e-9) continue;
    auto it = out.find(kk);
    if (it == out.end()) {
      out.emplace(kk, std::make_pair(p[1], p[1]));
    } else {
      it->second.first = std::min(it->second.first, p[1]);
      it->second.second = std::max(it->second.second, p[1]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("coin fixture: root optimum and value set shape") {
  GameModel m = make_fixture("coin-persuasion-v1");
  SolveResult res = build_value_polytopes(m, {});

  CHECK(res.root_vp == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(res.root_va == doctest::Approx(0.6).epsilon(1e-6));

  // Base sets: one origin point per (state, action) pair.
  REQUIRE(res.by_step.size() == 3);
  CHECK(res.by_step[2].size() == 4);
  for (const auto& [o, poly] : res.by_step[2]) {
    REQUIRE(poly.vertices.size() == 1);
    CHECK(poly.vertices[0][0] == doctest::Approx(0.0));
    CHECK(poly.vertices[0][1] == doctest::Approx(0.0));
    CHECK(poly.owner_h == 2);
    CHECK(poly.owner == o);
  }

  // The root set is the triangle (0, 0.6), (0.8, 0.6), (0.4, 1.0).
  REQUIRE(res.by_step[1].size() == 1);
  const ValuePolytope& root = res.by_step[1].at(StateActionKey::Root());
  REQUIRE(root.vertices.size() == 3);
  CHECK(has_vertex(root, 0.0, 0.6));
  CHECK(has_vertex(root, 0.8, 0.6));
  CHECK(has_vertex(root, 0.4, 1.0));
  CHECK(root.contains({0.4, 0.7}, 1e-9));
  CHECK(!root.contains({0.8, 0.9}, 1e-6));
  CHECK(!root.contains({0.2, 0.55}, 1e-6));
}

TEST_CASE("pennies fixture: uninformative optimum") {
  GameModel m = make_fixture("matching-pennies-v1");
  SolveResult res = build_value_polytopes(m, {});
  CHECK(res.root_vp == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.root_va == doctest::Approx(0.5).epsilon(1e-6));

  // Revealing anything trades principal value one for one to the agent.
  const ValuePolytope& root = res.by_step[1].at(StateActionKey::Root());
  REQUIRE(root.vertices.size() == 2);
  CHECK(has_vertex(root, 0.5, 0.5));
  CHECK(has_vertex(root, 0.0, 1.0));
}

TEST_CASE("mechanism fixture: exact three-step optimum") {
  GameModel m = make_fixture("mechanism-v1");
  SolveResult res = build_value_polytopes(m, {});
  CHECK(res.root_vp == doctest::Approx(1.75).epsilon(1e-6));
  CHECK(res.root_va == doctest::Approx(1.5).epsilon(1e-6));

  // Step-2 sets: principal locked at 1, agent anywhere in [0, 1].
  for (const auto& [o, poly] : res.by_step[2]) {
    REQUIRE(poly.vertices.size() == 2);
    CHECK(has_vertex(poly, 1.0, 0.0));
    CHECK(has_vertex(poly, 1.0, 1.0));
  }
}

TEST_CASE("horizon-two root value ignores the slicing width") {
  Rng rng(411);
  for (int k = 0; k < 3; ++k) {
    GameModel m = spag_tests::random_model(
        rng, {2, 2, 2, 2, 2, /*H=*/2, /*grid_rewards=*/true, 0.0});
    auto coarse = max_principal_value(m, {0.4});
    auto fine = max_principal_value(m, {0.025});
    CHECK(coarse.first == doctest::Approx(fine.first).epsilon(1e-7));
    CHECK(coarse.second == doctest::Approx(fine.second).epsilon(1e-7));
    CHECK(coarse.first >= -1e-9);
    CHECK(coarse.first <= 2.0 + 1e-9);
  }
}

TEST_CASE("three-step value degrades by at most the slicing budget") {
  Rng rng(522);
  for (int k = 0; k < 2; ++k) {
    GameModel m = spag_tests::random_model(
        rng, {2, 2, 2, 2, 2, /*H=*/3, /*grid_rewards=*/true, 0.0});
    double v04 = max_principal_value(m, {0.4}).first;
    double v01 = max_principal_value(m, {0.1}).first;
    CHECK(v04 >= v01 - 0.4 - 1e-7);
    CHECK(v04 <= v01 + 1e-7);  // coarser slices only shrink the sets
    CHECK(v01 >= 0.0 - 1e-9);
    CHECK(v01 <= 3.0 + 1e-9);
  }
}

TEST_CASE("halving the slice width preserves shared slice extremes") {
  GameModel coin = make_fixture("coin-persuasion-v1");
  ConstraintSystem sys = assemble_constraints(
      coin, 1, StateActionKey::Root(),
      build_value_polytopes(coin, {}).by_step[2], 2);
  double eps = 0.2;
  auto coarse = slice_polytope(sys, eps);
  auto fine = slice_polytope(sys, eps / 2);
  double spacing = eps / 2.0;  // horizon 2
  auto ce = slice_extremes(coarse, spacing);
  auto fe = slice_extremes(fine, spacing);
  REQUIRE(!ce.empty());
  int shared = 0;
  for (const auto& [k, mm] : ce) {
    auto it = fe.find(k);
    if (it == fe.end()) continue;
    ++shared;
    CHECK(mm.first == doctest::Approx(it->second.first).epsilon(1e-7));
    CHECK(mm.second == doctest::Approx(it->second.second).epsilon(1e-7));
  }
  CHECK(shared >= 3);
}

TEST_CASE("assembled system layout is consistent") {
  GameModel m = make_fixture("coin-persuasion-v1");
  SolveResult res = build_value_polytopes(m, {});
  ConstraintSystem sys =
      assemble_constraints(m, 1, StateActionKey::Root(), res.by_step[2], 2);
  const SystemLayout& L = sys.layout;
  CHECK(L.dimension == 2);
  CHECK(L.num_vars == sys.lp.num_vars());
  CHECK(L.pi_index(0, 0, 0, 0) == 0);
  CHECK(L.v_index(1) == L.num_vars - 1);
  // Every tuple/coordinate lands inside the z block.
  int lo = L.z_index(0, 0, 0, 0, 0, 0, 0, 0);
  int hi = L.z_index(L.nS - 1, L.nWP - 1, L.nWA - 1, L.nWA - 1, L.nAP - 1,
                     L.nAA - 1, L.nAA - 1, L.dimension - 1);
  CHECK(lo == L.z_base);
  CHECK(hi == L.z_base + L.tuple_count() * L.dimension - 1);
  // Reports are only tracked for observations that can occur.
  CHECK(sys.report_pairs.size() == 1);  // single agent observation
}

TEST_CASE("one-step horizon yields the trivial root set") {
  GameModel m;
  m.states = {"s"};
  m.principal_actions = {"a"};
  m.agent_actions = {"b"};
  m.principal_obs = {"o"};
  m.agent_obs = {"w"};
  m.horizon = 1;
  m.initial = {1.0};
  SolveResult res = build_value_polytopes(m, {});
  CHECK(res.root_vp == 0.0);
  CHECK(res.root_va == 0.0);
  REQUIRE(res.by_step.size() == 2);
  CHECK(res.by_step[1].count(StateActionKey::Root()) == 1);
}

TEST_CASE("the stored root set contains every slice point") {
  Rng rng(633);
  GameModel m = spag_tests::random_model(
      rng, {2, 2, 2, 2, 2, /*H=*/2, /*grid_rewards=*/false, 0.0});
  SolveResult res = build_value_polytopes(m, {0.1});
  const ValuePolytope& root = res.by_step[1].at(StateActionKey::Root());
  ConstraintSystem sys =
      assemble_constraints(m, 1, StateActionKey::Root(), res.by_step[2], 2);
  auto pts = slice_polytope(sys, 0.1);
  REQUIRE(!pts.empty());
  for (const auto& p : pts) CHECK(root.contains(p, 1e-6));
}
