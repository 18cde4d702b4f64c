#pragma once

#include <functional>
#include <utility>

#include "spag/model.hpp"
#include "spag/policy_forward.hpp"

namespace spag {

// Commitment interface evaluated by the oracles: the joint-action
// distribution played at the step following `history` when the principal
// observes wp and receives report wr.
using PrincipalPolicy =
    std::function<std::vector<double>(const History&, int wp, int wr)>;

PrincipalPolicy as_policy(const PolicyHandle& handle);

// Exact expected (principal, agent) value of a commitment against an agent
// following `plan`, by full enumeration of the episode tree.  `budget` caps
// the number of expanded leaves; beyond it BudgetExceeded is thrown carrying
// the a-priori estimate.
std::pair<double, double> exact_policy_values(const GameModel& model,
                                              const PrincipalPolicy& policy,
                                              const DeviationPlan& plan = {},
                                              double budget = 1e6);

// Value of the agent's best deviation plan against the commitment, by
// backward induction over revealed histories.
double best_response_value(const GameModel& model,
                           const PrincipalPolicy& policy, double budget = 1e6);

// Independent two-step optimum: a single LP over the step-1 policy with
// obedience and truthfulness rows, maximizing the principal value and
// breaking ties toward the agent.  Requires horizon == 2.
std::pair<double, double> brute_force_optimum(const GameModel& model);

struct IcCheckResult {
    bool pass = false;
    double best_response = 0.0;
    double truthful = 0.0;
    double gap = 0.0;  // best_response - truthful
};

IcCheckResult ic_check(const GameModel& model, const PrincipalPolicy& policy,
                       double tol = 1e-6, double budget = 1e6);

}  // namespace spag
