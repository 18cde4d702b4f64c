#include "spag/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "spag/errors.hpp"
#include "spag/registry.hpp"

using namespace spag;

namespace {

std::string fixture_path(const std::string& name) {
  return std::string(SPAG_FIXTURE_DIR) + "/" + name + ".json";
}

bool models_equal(const GameModel& a, const GameModel& b) {
  return a.states == b.states && a.principal_actions == b.principal_actions &&
         a.agent_actions == b.agent_actions && a.principal_obs == b.principal_obs &&
         a.agent_obs == b.agent_obs && a.horizon == b.horizon &&
         a.initial == b.initial && a.transitions == b.transitions &&
         a.rewards_principal == b.rewards_principal &&
         a.rewards_agent == b.rewards_agent;
}

}  // namespace

TEST_CASE("fixture files load, validate, and match the registry") {
  for (const auto& name : fixture_names()) {
    GameModel from_file = GameModel::from_file(fixture_path(name));
    GameModel from_code = make_fixture(name);
    CHECK(models_equal(from_file, from_code));
  }
}

TEST_CASE("json round trip preserves every field") {
  for (const auto& name : fixture_names()) {
    GameModel m = make_fixture(name);
    GameModel back = GameModel::from_json(m.to_json());
    CHECK(models_equal(m, back));
  }
}

TEST_CASE("an explicit terminal reward block must be zero") {
  GameModel coin = make_fixture("coin-persuasion-v1");
  nlohmann::json j = nlohmann::json::parse(coin.to_json());
  // Spell out the step-H block the compact form leaves implicit: [s][aP][aA].
  nlohmann::json zeros = nlohmann::json::array();
  for (int s = 0; s < coin.num_states(); ++s) {
    nlohmann::json bs = nlohmann::json::array();
    for (int ap = 0; ap < coin.num_ap(); ++ap) {
      bs.push_back(std::vector<double>(coin.num_aa(), 0.0));
    }
    zeros.push_back(bs);
  }
  j["rewards_principal"].push_back(zeros);
  j["rewards_agent"].push_back(zeros);
  CHECK(models_equal(GameModel::from_json(j.dump()), coin));

  j["rewards_agent"].back()[1][0][1] = 0.3;
  CHECK_THROWS_WITH_AS(GameModel::from_json(j.dump()),
                       doctest::Contains("step-2 rewards must be exactly 0"),
                       ValidationError);
}

TEST_CASE("load_model resolves names and paths") {
  GameModel by_name = load_model("coin-persuasion-v1");
  GameModel by_path = load_model(fixture_path("coin-persuasion-v1"));
  CHECK(models_equal(by_name, by_path));
  CHECK_THROWS_AS(load_model("/nonexistent/path.json"), ParseError);
}

TEST_CASE("coin fixture probabilities and rewards") {
  GameModel m = make_fixture("coin-persuasion-v1");
  auto root = StateActionKey::Root();
  CHECK(m.outcome_prob(1, root, 0, 0, 0) == doctest::Approx(0.4));
  CHECK(m.outcome_prob(1, root, 1, 1, 0) == doctest::Approx(0.6));
  CHECK(m.outcome_prob(1, root, 0, 1, 0) == 0.0);
  // Second step rows condition on the previous (s, a) and redraw the coin.
  StateActionKey o{1, 0, 1};
  CHECK(m.outcome_prob(2, o, 0, 0, 0) == doctest::Approx(0.4));
  CHECK(m.reward_p(1, 0, 0, 0) == 1.0);
  CHECK(m.reward_p(1, 1, 0, 1) == 0.0);
  CHECK(m.reward_a(1, 1, 0, 1) == 1.0);
  CHECK(m.reward_a(2, 0, 0, 0) == 0.0);  // terminal step pays nothing
}

TEST_CASE("mechanism fixture reward layout") {
  GameModel m = make_fixture("mechanism-v1");
  // give: ap = 0, keep: ap = 1; lo: s = 0, hi: s = 1.
  CHECK(m.reward_p(1, 1, 0, 0) == 1.0);
  CHECK(m.reward_p(1, 0, 0, 0) == 0.0);
  CHECK(m.reward_p(1, 0, 1, 0) == 0.5);
  CHECK(m.reward_p(2, 0, 1, 0) == 1.0);
  CHECK(m.reward_a(2, 1, 0, 0) == 1.0);
  CHECK(m.reward_a(2, 1, 1, 0) == 0.0);
  CHECK(m.reward_a(3, 0, 0, 0) == 0.0);
}

TEST_CASE("conditional_obs_prob on the coin root") {
  GameModel m = make_fixture("coin-persuasion-v1");
  ObsConditional c = m.conditional_obs_prob(1, StateActionKey::Root(), 0);
  CHECK(c.defined);
  CHECK(c.marginal == doctest::Approx(1.0));
  // cond is flat over (s, wp).
  CHECK(c.cond[0 * 2 + 0] == doctest::Approx(0.4));
  CHECK(c.cond[1 * 2 + 1] == doctest::Approx(0.6));
  CHECK(c.cond[0 * 2 + 1] == doctest::Approx(0.0));
}

TEST_CASE("zero-marginal observation is flagged undefined") {
  GameModel m = make_fixture("mechanism-v1");
  // Kill all mass on saw_hi in a copy of the initial distribution.
  m.initial = {1.0, 0.0, 0.0, 0.0};
  ObsConditional c = m.conditional_obs_prob(1, StateActionKey::Root(), 1);
  CHECK_FALSE(c.defined);
  CHECK(c.marginal == doctest::Approx(0.0));
  CHECK(c.cond.empty());
}

TEST_CASE("sample_step matches the row frequencies") {
  GameModel m = make_fixture("coin-persuasion-v1");
  Rng rng(20240817);
  int heads = 0;
  const int kDraws = 1000000;
  for (int i = 0; i < kDraws; ++i) {
    auto [s, wp, wa] = m.sample_step(1, StateActionKey::Root(), rng);
    CHECK(wa == 0);
    CHECK(wp == s);  // the observation reveals the state
    heads += s == 0 ? 1 : 0;
  }
  CHECK(std::fabs(heads / static_cast<double>(kDraws) - 0.4) < 0.002);
}

TEST_CASE("same seed reproduces the identical sample path") {
  GameModel m = make_fixture("mechanism-v1");
  Rng a(99), b(99);
  for (int i = 0; i < 200; ++i) {
    StateActionKey o{i % 2, i % 2, 0};
    CHECK(m.sample_step(2, o, a) == m.sample_step(2, o, b));
  }
}

TEST_CASE("validation rejects malformed models") {
  GameModel good = make_fixture("coin-persuasion-v1");

  GameModel bad = good;
  bad.initial[0] = 0.5;  // no longer sums to one
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.transitions[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.rewards_principal[0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.states = {"heads", "heads"};
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.transitions.pop_back();
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = good;
  bad.agent_actions.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("parser reports malformed json as ParseError") {
  CHECK_THROWS_AS(GameModel::from_json("{not json"), ParseError);
  CHECK_THROWS_AS(GameModel::from_json("{}"), ParseError);
  CHECK_THROWS_AS(GameModel::from_json(R"({"states": [1, 2]})"), ParseError);
}

TEST_CASE("horizon-one model is accepted and trivial") {
  GameModel m;
  m.states = {"only"};
  m.principal_actions = {"a"};
  m.agent_actions = {"b"};
  m.principal_obs = {"o"};
  m.agent_obs = {"w"};
  m.horizon = 1;
  m.initial = {1.0};
  m.validate();
  CHECK(m.reward_p(1, 0, 0, 0) == 0.0);
}
