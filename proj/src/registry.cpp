#include "spag/registry.hpp"

#include <fstream>

#include "spag/errors.hpp"

namespace spag {

namespace {

// A coin is tossed each step (40% heads); the principal sees the face, the
// agent sees nothing.  The agent is paid for matching the face, the principal
// for the agent playing heads.  Only the first step pays.
GameModel coin_persuasion() {
  GameModel m;
  m.states = {"heads", "tails"};
  m.principal_actions = {"noop"};
  m.agent_actions = {"play_heads", "play_tails"};
  m.principal_obs = {"saw_heads", "saw_tails"};
  m.agent_obs = {"none"};
  m.horizon = 2;
  // (s, wp, wa) with the observation revealing the state.
  m.initial = {0.4, 0.0, 0.0, 0.6};
  for (int row = 0; row < 4; ++row) {  // 2 states x 1 x 2 actions, fresh toss
    m.transitions.insert(m.transitions.end(), m.initial.begin(), m.initial.end());
  }
  m.rewards_principal = {1, 0, 1, 0};        // pays on play_heads
  m.rewards_agent = {1, 0, 0, 1};            // pays on matching the face
  return m;
}

// Fair coin, observed by the principal only.  The agent is paid for matching
// it, the principal for a mismatch.  Only the first step pays.
GameModel matching_pennies() {
  GameModel m;
  m.states = {"heads", "tails"};
  m.principal_actions = {"noop"};
  m.agent_actions = {"play_heads", "play_tails"};
  m.principal_obs = {"saw_heads", "saw_tails"};
  m.agent_obs = {"none"};
  m.horizon = 2;
  m.initial = {0.5, 0.0, 0.0, 0.5};
  for (int row = 0; row < 4; ++row) {
    m.transitions.insert(m.transitions.end(), m.initial.begin(), m.initial.end());
  }
  m.rewards_principal = {0, 1, 1, 0};
  m.rewards_agent = {1, 0, 0, 1};
  return m;
}

// Three steps, coin value redrawn fresh each step and observed by the agent
// only.  The principal chooses give or keep.  Giving pays the agent 1 always
// and pays the principal 1 only on a high coin; keeping pays the principal a
// flat 0.5 at step 1.  At step 2 the principal is paid 1 regardless, so the
// give decision there is pure transfer.  The last step pays nothing.
GameModel mechanism() {
  GameModel m;
  m.states = {"lo", "hi"};
  m.principal_actions = {"give", "keep"};
  m.agent_actions = {"wait"};
  m.principal_obs = {"none"};
  m.agent_obs = {"saw_lo", "saw_hi"};
  m.horizon = 3;
  m.initial = {0.5, 0.0, 0.0, 0.5};
  for (int row = 0; row < 2 * 2 * 2 * 1; ++row) {  // two steps of transitions
    m.transitions.insert(m.transitions.end(), m.initial.begin(), m.initial.end());
  }
  // Layout is [h][s][ap][aa] with ap in {give, keep}.
  m.rewards_principal = {0, 0.5, 1, 0.5,    // step 1: hi-give pays, keep pays 0.5
                         1, 1, 1, 1};       // step 2: flat
  m.rewards_agent = {1, 0, 1, 0,            // give pays the agent
                     1, 0, 1, 0};
  return m;
}

}  // namespace

const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names = {
      "coin-persuasion-v1", "matching-pennies-v1", "mechanism-v1"};
  return names;
}

GameModel make_fixture(const std::string& name) {
  GameModel m;
  if (name == "coin-persuasion-v1") {
    m = coin_persuasion();
  } else if (name == "matching-pennies-v1") {
    m = matching_pennies();
  } else if (name == "mechanism-v1") {
    m = mechanism();
  } else {
    throw ValidationError("unknown fixture: " + name);
  }
  m.validate();
  return m;
}

GameModel load_model(const std::string& path_or_name) {
  for (const auto& n : fixture_names()) {
    if (n == path_or_name) return make_fixture(n);
  }
  return GameModel::from_file(path_or_name);
}

}  // namespace spag
