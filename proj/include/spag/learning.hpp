#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "spag/model.hpp"
#include "spag/policy_forward.hpp"

namespace spag {

struct LearningConfig {
    int64_t episodes = 0;
    double failure_prob = 0.05;  // in (0, 1)
    uint64_t seed = 0;
    double c_explore = 1.0;
    // Slack for the commit-phase program; default (zeta / T)^(1/3).
    std::optional<double> delta;
    // Exploration budget; default ceil(c_explore * zeta^(1/3) * T^(2/3)),
    // capped at T.
    std::optional<int64_t> n0;
};

// Instance-size factor driving the default exploration budget and slack.
double zeta(const GameModel& model);

// Visit counters and the transition estimate they induce.  Rows with no
// visits fall back to the uniform distribution.
struct EstimatedModel {
    GameModel model;  // true rewards, estimated transitions
    std::vector<double> initial_count;     // outcome counts at step 1
    std::vector<double> row_count;         // [(h-2), s, ap, aa] visit counts
    std::vector<double> outcome_count;     // same layout as model.transitions

    static EstimatedModel from(const GameModel& truth);
    void record_initial(int s, int wp, int wa);
    void record_step(int h_next, int s_prev, int ap, int aa_played, int s,
                     int wp, int wa);
    void refresh();  // rebuilds model.initial / model.transitions from counts
};

// Deterministic joint-action choice per (step, previous outcome, observation).
struct ExplorationPolicy {
    // action[(h-1)][theta] with theta indexing (o_prev, wp, wa); o_prev is an
    // index into the o-space with Root first.
    std::vector<std::vector<int>> action;
};

// Plans the next exploration episode: value iteration on the estimated
// effective dynamics with exploration bonuses in place of rewards.
ExplorationPolicy plan_exploration(const GameModel& truth,
                                   const EstimatedModel& est,
                                   const std::vector<std::vector<double>>& visit,
                                   double c_explore);

struct DeltaIcResult {
    double vp = 0.0;       // principal value at the root
    double va = 0.0;       // truthful agent value at the root
    double va_star = 0.0;  // agent best-deviation value promised at the root
    SolveResult solve;
};

// Slack-IC commitment program on `model` (typically the estimate): value sets
// over (principal, agent, best-deviation) vectors with IC rows relaxed by
// `delta`, gridded at epsilon / H.
DeltaIcResult solve_delta_ic(const GameModel& model, double epsilon,
                             double delta, const LpOptions& opts = {});

struct EpisodeRecord {
    int64_t episode = 0;
    bool explore = false;
    double vp_term = 0.0;      // value entering the principal regret term
    double va_term = 0.0;      // value entering the agent regret term
    double benchmark_p = 0.0;  // optimum on the true model
    double benchmark_a = 0.0;  // best response to this episode's policy
    double vp_expected = 0.0;  // exact expected values of this episode's policy
    double va_expected = 0.0;
};

struct RegretReport {
    std::vector<EpisodeRecord> episodes;
    std::vector<double> regp_cum;  // signed prefix sums
    std::vector<double> rega_cum;  // nonnegative terms; nondecreasing
    int64_t n0_used = 0;
    double delta_used = 0.0;
    double v_star = 0.0;
};

// Prefix regret series from per-episode records.  Principal terms are signed;
// agent terms are floored at zero.
void compute_regrets(RegretReport& report);

// Reward-free exploration for n0 episodes, one commitment solve on the
// estimate, then committed play for the remaining episodes.
RegretReport run_learning(const GameModel& model, const LearningConfig& config);

// episode,phase,regP_cum,regA_cum,vP_expected,vA_expected
void write_report_csv(const RegretReport& report, std::ostream& out);

}  // namespace spag
