#ifndef SPAG_MODEL_HPP
#define SPAG_MODEL_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include "spag/rng.hpp"

namespace spag {

// Identifies the conditioning context of a step: the state and joint action
// realized in the previous step, or Root at the first step where the initial
// distribution applies instead.
struct StateActionKey {
  int s = -1;
  int ap = -1;
  int aa = -1;

  static StateActionKey Root() { return {}; }
  bool is_root() const { return s < 0; }

  friend bool operator==(const StateActionKey&, const StateActionKey&) = default;
  friend auto operator<=>(const StateActionKey&, const StateActionKey&) = default;
};

// One fully revealed step: state, both observations, the agent's report, the
// sampled joint action, and the action the agent actually played.
struct StepInteraction {
  int s = 0;
  int omega_p = 0;
  int omega_a = 0;
  int report = 0;     // reported agent observation
  int ap = 0;
  int aa = 0;         // recommended agent action
  int aa_played = 0;  // action actually taken

  friend bool operator==(const StepInteraction&, const StepInteraction&) = default;
};

using History = std::vector<StepInteraction>;

// Conditional over (state, principal observation) given an agent observation;
// undefined when the observation has zero marginal probability.
struct ObsConditional {
  double marginal = 0.0;
  bool defined = false;
  std::vector<double> cond;  // flat S x |principal obs|, empty if undefined
};

// Two-player finite-horizon stochastic game with private observations on both
// sides.  Rewards are stored for steps 1..H-1; the final step pays zero.
struct GameModel {
  std::vector<std::string> states;
  std::vector<std::string> principal_actions;
  std::vector<std::string> agent_actions;
  std::vector<std::string> principal_obs;
  std::vector<std::string> agent_obs;
  int horizon = 1;

  // Flat S x WP x WA, row-major.
  std::vector<double> initial;
  // Flat (H-1) x S x AP x AA x (S x WP x WA), row-major.
  std::vector<double> transitions;
  // Flat (H-1) x S x AP x AA, row-major.
  std::vector<double> rewards_principal;
  std::vector<double> rewards_agent;

  int num_states() const { return static_cast<int>(states.size()); }
  int num_ap() const { return static_cast<int>(principal_actions.size()); }
  int num_aa() const { return static_cast<int>(agent_actions.size()); }
  int num_wp() const { return static_cast<int>(principal_obs.size()); }
  int num_wa() const { return static_cast<int>(agent_obs.size()); }
  int num_outcomes() const { return num_states() * num_wp() * num_wa(); }
  int num_joint_actions() const { return num_ap() * num_aa(); }

  int outcome_index(int s, int wp, int wa) const {
    return (s * num_wp() + wp) * num_wa() + wa;
  }

  // Probability of (s, wp, wa) drawn at step h (1-based) given the previous
  // step's key o.  Root keys read the initial distribution; h must be 1
  // exactly when o is Root.
  double outcome_prob(int h, const StateActionKey& o, int s, int wp, int wa) const;

  // Full outcome row as a flat copy (same layout as `initial`).
  std::vector<double> outcome_row(int h, const StateActionKey& o) const;

  double reward_p(int h, int s, int ap, int aa) const;
  double reward_a(int h, int s, int ap, int aa) const;

  // Posterior over (s, wp) after seeing agent observation wa at step h
  // given key o.
  ObsConditional conditional_obs_prob(int h, const StateActionKey& o, int wa) const;

  // Draws (s, wp, wa) from the step-h outcome row.
  std::tuple<int, int, int> sample_step(int h, const StateActionKey& o, Rng& rng) const;

  // Throws ValidationError describing the first problem found.
  void validate() const;

  std::string to_json() const;
  static GameModel from_json(const std::string& text);
  static GameModel from_file(const std::string& path);
};

struct StateActionKeyHash {
  std::size_t operator()(const StateActionKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : {k.s, k.ap, k.aa}) {
      h ^= static_cast<std::size_t>(v + 2);
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace spag

#endif  // SPAG_MODEL_HPP
