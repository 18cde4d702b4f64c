#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "spag/model.hpp"
#include "spag/rng.hpp"
#include "spag/valueset_dp.hpp"

namespace spag {

// A single step of the committed policy: the joint-action distribution per
// (principal observation, report) and the promised onward value vector per
// realized step tuple.
struct OneStepPolicy {
    int h = 1;
    StateActionKey o;
    int dimension = 2;
    // pi[(wp, wr)][(ap, aa)] indexed flat; rows sum to 1 for non-vacuous pairs.
    std::vector<double> pi;
    // onward[(s, wp, wa, wr, ap, aa, at)] -> value vector promised at the
    // next step's (s, ap, at) set.  Flat: tuple-major, coordinate-minor.
    std::vector<double> onward;

    double pi_at(const GameModel& model, int wp, int wr, int ap, int aa) const;
    std::vector<double> onward_at(const GameModel& model, int s, int wp, int wa,
                                  int wr, int ap, int aa, int at) const;
};

// Realizes a promised value vector at (h, o): solves the one-step system with
// v pinned to `target` and recovers the onward promises from the scaled
// variables.  Throws EmptyInducibleSet when target is not achievable.
OneStepPolicy one_step_solve(const GameModel& model, int h,
                             const StateActionKey& o,
                             const std::vector<double>& target,
                             const PolytopeMap& next, int dimension = 2,
                             const LpOptions& opts = {});

// Agent-side deviation plan: a report map and a recommendation remap.  The
// default-constructed plan is truthful and obedient.
struct DeviationPlan {
    // (h, history-so-far, wa) -> report
    std::function<int(int, const History&, int)> report;
    // (h, history-so-far, wa, report, recommended aa) -> played action
    std::function<int(int, const History&, int, int, int)> act;

    DeviationPlan();
    static DeviationPlan truthful();
};

// The committed policy: realizes the root target by chaining one_step_solve
// along the revealed history.  Deterministic given the solve result; decisions
// for every history, on or off the promised path, are defined.
class PolicyHandle {
  public:
    PolicyHandle(const GameModel& model, SolveResult result,
                 int dimension = 2, const LpOptions& opts = {});

    // Joint-action distribution at the current step given the revealed
    // history, the principal observation and the report.
    std::vector<double> action_distribution(const History& history, int wp,
                                            int wr) const;

    // Promised value vector entering step |history| + 1.
    std::vector<double> current_target(const History& history) const;

    const GameModel& model() const { return model_; }
    const SolveResult& solve() const { return result_; }
    int dimension() const { return dimension_; }

  private:
    const OneStepPolicy& step_policy(const History& history) const;

    GameModel model_;
    SolveResult result_;
    int dimension_;
    LpOptions opts_;
    mutable std::mutex mu_;
    // Keyed by the exact revealed history so memoization can never collide.
    mutable std::map<std::vector<int>, OneStepPolicy> memo_;
};

// One simulated episode: realized step tuples and reward sums.
struct Episode {
    History steps;
    double vp = 0.0;
    double va = 0.0;
};

// Plays `episodes` episodes of the handle against an agent following `plan`.
Episode simulate_episode(const GameModel& model, const PolicyHandle& handle,
                         const DeviationPlan& plan, Rng& rng);
std::vector<Episode> rollout(const GameModel& model, const PolicyHandle& handle,
                             const DeviationPlan& plan, int episodes,
                             uint64_t seed);

uint64_t history_key(const History& history);

}  // namespace spag
