#include <set>

#include "doctest.h"
#include "higgsflow/scenarios.hpp"

using namespace higgsflow;

TEST_CASE("catalog contents") {
  const auto cat = scenario_catalog();
  CHECK(cat.size() >= 7);
  std::set<std::string> names;
  for (const auto& s : cat) names.insert(s.name);
  CHECK(names.size() == cat.size());
  for (const char* required : {"flat-trivial-r1", "flat-trivial-r2", "nilpotent-r2", "chain-r3", "diagonal-polystable",
                               "conformal-r1", "t4-commuting", "extension-sweep"})
    CHECK(names.count(required) == 1);
  CHECK_THROWS_AS(scenario_info("no-such-thing"), InvalidInput);
}

TEST_CASE("every shipped state is valid") {
  for (const auto& info : scenario_catalog())
    for (int n : info.dims) {
      const Scenario sc = make_scenario(info.name, n, 8, std::uint64_t{7});
      CAPTURE(info.name);
      CAPTURE(n);
      CHECK(validate(sc.state.structure()).valid);
      CHECK(sc.state.rank() == info.rank);
      for (const auto& sub : sc.filtration) CHECK(subbundle_residuals(sc.state, sub).worst() < 1e-10);
      if (sc.extension) CHECK(subbundle_residuals(sc.state, *sc.extension).worst() < 1e-10);
    }
}

TEST_CASE("declared stability matches the sub-object enumeration") {
  for (const auto& info : scenario_catalog()) {
    if (info.name == "extension-twisted" || info.needs_seed) continue;
    const Scenario sc = make_scenario(info.name, 0, 8);
    const auto en = enumerate_constant_subobjects(sc.state);
    CAPTURE(info.name);
    MESSAGE(en.to_json().dump());
    CHECK(en.verdict == info.expected["stability"].get<std::string>());
  }
  const auto nil = enumerate_constant_subobjects(make_scenario("nilpotent-r2").state);
  REQUIRE(nil.subobjects.size() == 1);
  CHECK(nil.subobjects[0].rank == 1);
  CHECK(std::abs(std::abs(nil.subobjects[0].basis(0, 0)) - 1.0) < 1e-12);
  CHECK(nil.subobjects[0].slope == 0.0);
  const auto ch = enumerate_constant_subobjects(make_scenario("chain-r3").state);
  CHECK(ch.subobjects.size() == 2);
  CHECK_THROWS_AS(enumerate_constant_subobjects(make_scenario("extension-twisted").state), InvalidInput);
}

TEST_CASE("scenario parameters") {
  CHECK_THROWS_AS(make_scenario("random-valid"), InvalidInput);
  CHECK_THROWS_AS(make_scenario("t4-commuting", 1), InvalidInput);
  const auto sc = make_scenario("extension-sweep");
  CHECK(sc.rho_targets.size() == 4);
  CHECK(sc.state.base().resolution() == sc.info.default_N);
  CHECK(make_scenario("nilpotent-r2", 2, 8).state.base().dim() == 2);
}

TEST_CASE("random valid states are seeded") {
  TorusBase b(2, 8);
  const auto s1 = random_valid_state(b, 2, 11);
  const auto s2 = random_valid_state(b, 2, 11);
  const auto s3 = random_valid_state(b, 2, 12);
  CHECK(validate(s1.state.structure()).valid);
  CHECK(sup_abs_entry(s1.state.phi() - s2.state.phi()) == 0.0);
  CHECK(sup_abs_entry(s1.state.metric().field() - s2.state.metric().field()) == 0.0);
  CHECK(sup_abs_entry(s1.state.phi() - s3.state.phi()) > 0.01);
  CHECK(subbundle_residuals(s1.state, s1.eigenline).worst() < 1e-10);
  for (int r : {1, 3}) CHECK(validate(random_valid_state(b, r, 5).state.structure()).valid);
}
