#include "spag/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spag/errors.hpp"
#include "spag/lp.hpp"

namespace spag {

namespace {

double tree_estimate(const GameModel& m) {
    double per = static_cast<double>(m.num_states()) * m.num_wp() *
                 m.num_wa() * m.num_ap() * m.num_aa();
    return std::pow(per, m.horizon - 1);
}

StateActionKey key_after(const History& hist) {
    if (hist.empty()) return StateActionKey::Root();
    const StepInteraction& st = hist.back();
    return StateActionKey{st.s, st.ap, st.aa_played};
}

// Per-node cache so a commitment backed by LP solves is queried once per
// (wp, wr) pair.
class DistCache {
  public:
    DistCache(const PrincipalPolicy& policy, const History& hist)
        : policy_(policy), hist_(hist) {}

    const std::vector<double>& at(int wp, int wr) {
        auto it = cache_.find({wp, wr});
        if (it == cache_.end()) {
            it = cache_.emplace(std::pair<int, int>{wp, wr},
                                policy_(hist_, wp, wr))
                     .first;
        }
        return it->second;
    }

  private:
    const PrincipalPolicy& policy_;
    const History& hist_;
    std::map<std::pair<int, int>, std::vector<double>> cache_;
};

}  // namespace

PrincipalPolicy as_policy(const PolicyHandle& handle) {
    return [&handle](const History& hist, int wp, int wr) {
        return handle.action_distribution(hist, wp, wr);
    };
}

std::pair<double, double> exact_policy_values(const GameModel& model,
                                              const PrincipalPolicy& policy,
                                              const DeviationPlan& plan,
                                              double budget) {
    double vp = 0.0, va = 0.0;
    double leaves = 0.0;
    const int nAA = model.num_aa();
    std::function<void(int, History&, double)> walk = [&](int h, History& hist,
                                                          double prob) {
        if (h >= model.horizon) return;
        StateActionKey o = key_after(hist);
        DistCache dists(policy, hist);
        for (int s = 0; s < model.num_states(); ++s) {
            for (int wp = 0; wp < model.num_wp(); ++wp) {
                for (int wa = 0; wa < model.num_wa(); ++wa) {
                    double p = model.outcome_prob(h, o, s, wp, wa);
                    if (p <= 0.0) continue;
                    int wr = plan.report(h, hist, wa);
                    const std::vector<double>& dist = dists.at(wp, wr);
                    for (int ap = 0; ap < model.num_ap(); ++ap) {
                        for (int aa = 0; aa < nAA; ++aa) {
                            double q = dist[ap * nAA + aa];
                            if (q <= 0.0) continue;
                            int at = plan.act(h, hist, wa, wr, aa);
                            double w = prob * p * q;
                            vp += w * model.reward_p(h, s, ap, at);
                            va += w * model.reward_a(h, s, ap, at);
                            leaves += 1.0;
                            if (leaves > budget) {
                                throw BudgetExceeded(
                                    "episode tree exceeds the oracle budget",
                                    tree_estimate(model));
                            }
                            hist.push_back({s, wp, wa, wr, ap, aa, at});
                            walk(h + 1, hist, w);
                            hist.pop_back();
                        }
                    }
                }
            }
        }
    };
    History hist;
    walk(1, hist, 1.0);
    return {vp, va};
}

double best_response_value(const GameModel& model,
                           const PrincipalPolicy& policy, double budget) {
    const int nS = model.num_states(), nWP = model.num_wp(),
              nWA = model.num_wa(), nAP = model.num_ap(),
              nAA = model.num_aa();
    double nodes = 0.0;
    // The agent sees its own observation only; the report choice weighs the
    // joint outcome row, and the action choice conditions on the
    // recommendation.  Hindsight reveals the full tuple, so continuations
    // branch on everything.
    std::function<double(int, History&)> best = [&](int h,
                                                    History& hist) -> double {
        if (h >= model.horizon) return 0.0;
        nodes += 1.0;
        if (nodes > budget) {
            throw BudgetExceeded("deviation tree exceeds the oracle budget",
                                 tree_estimate(model));
        }
        StateActionKey o = key_after(hist);
        DistCache dists(policy, hist);
        double total = 0.0;
        for (int wa = 0; wa < nWA; ++wa) {
            double marg = 0.0;
            for (int s = 0; s < nS; ++s) {
                for (int wp = 0; wp < nWP; ++wp) {
                    marg += model.outcome_prob(h, o, s, wp, wa);
                }
            }
            if (marg <= 0.0) continue;
            double best_report = -kInf;
            for (int wr = 0; wr < nWA; ++wr) {
                double rep_val = 0.0;
                for (int aa = 0; aa < nAA; ++aa) {
                    double best_act = -kInf;
                    for (int at = 0; at < nAA; ++at) {
                        double acc = 0.0;
                        for (int s = 0; s < nS; ++s) {
                            for (int wp = 0; wp < nWP; ++wp) {
                                double p = model.outcome_prob(h, o, s, wp, wa);
                                if (p <= 0.0) continue;
                                const std::vector<double>& dist =
                                    dists.at(wp, wr);
                                for (int ap = 0; ap < nAP; ++ap) {
                                    double q = dist[ap * nAA + aa];
                                    if (q <= 0.0) continue;
                                    hist.push_back(
                                        {s, wp, wa, wr, ap, aa, at});
                                    double cont = best(h + 1, hist);
                                    hist.pop_back();
                                    acc += p * q *
                                           (model.reward_a(h, s, ap, at) +
                                            cont);
                                }
                            }
                        }
                        best_act = std::max(best_act, acc);
                    }
                    rep_val += best_act;
                }
                best_report = std::max(best_report, rep_val);
            }
            total += best_report;
        }
        return total;
    };
    History hist;
    return best(1, hist);
}

std::pair<double, double> brute_force_optimum(const GameModel& model) {
    if (model.horizon != 2) {
        throw ValidationError(
            "the enumeration optimum is only defined for two-step games");
    }
    const int nS = model.num_states(), nWP = model.num_wp(),
              nWA = model.num_wa(), nAP = model.num_ap(),
              nAA = model.num_aa();
    const int acts = nAP * nAA;
    const StateActionKey root = StateActionKey::Root();

    auto p0 = [&](int s, int wp, int wa) {
        return model.outcome_prob(1, root, s, wp, wa);
    };
    std::vector<double> marginal(nWA, 0.0);
    for (int s = 0; s < nS; ++s) {
        for (int wp = 0; wp < nWP; ++wp) {
            for (int wa = 0; wa < nWA; ++wa) marginal[wa] += p0(s, wp, wa);
        }
    }

    LinearProgram lp;
    lp.sense = Sense::Maximize;
    auto pi_idx = [&](int wp, int wr, int ap, int aa) {
        return ((wp * nWA + wr) * nAP + ap) * nAA + aa;
    };
    for (int j = 0; j < nWP * nWA * acts; ++j) lp.add_var(0.0, 1.0, 0.0);
    int y_base = nWP * nWA * acts;
    auto y_idx = [&](int aa, int wa, int wr) {
        return y_base + (aa * nWA + wa) * nWA + wr;
    };
    for (int j = 0; j < nAA * nWA * nWA; ++j) lp.add_var(0.0, 1.0, 0.0);

    for (int wp = 0; wp < nWP; ++wp) {
        for (int wr = 0; wr < nWA; ++wr) {
            std::vector<std::pair<int, double>> coefs;
            for (int a = 0; a < acts; ++a) {
                coefs.emplace_back(pi_idx(wp, wr, 0, 0) + a, 1.0);
            }
            lp.add_row(RowType::EQ, 1.0, coefs);
        }
    }

    // Truthful expected agent value dominates every report's deviation
    // envelope.
    for (int wa = 0; wa < nWA; ++wa) {
        if (marginal[wa] <= 1e-12) continue;
        std::vector<double> truth(lp.num_vars(), 0.0);
        for (int s = 0; s < nS; ++s) {
            for (int wp = 0; wp < nWP; ++wp) {
                double p = p0(s, wp, wa);
                if (p <= 0.0) continue;
                for (int ap = 0; ap < nAP; ++ap) {
                    for (int aa = 0; aa < nAA; ++aa) {
                        truth[pi_idx(wp, wa, ap, aa)] +=
                            p * model.reward_a(1, s, ap, aa);
                    }
                }
            }
        }
        for (int wr = 0; wr < nWA; ++wr) {
            std::vector<std::pair<int, double>> coefs;
            for (int j = 0; j < lp.num_vars(); ++j) {
                if (truth[j] != 0.0) coefs.emplace_back(j, truth[j]);
            }
            for (int aa = 0; aa < nAA; ++aa) {
                coefs.emplace_back(y_idx(aa, wa, wr), -1.0);
            }
            lp.add_row(RowType::GE, 0.0, coefs);
            // y(aa, wa, wr) upper-bounds every post-recommendation action.
            for (int aa = 0; aa < nAA; ++aa) {
                for (int at = 0; at < nAA; ++at) {
                    std::vector<std::pair<int, double>> dev;
                    dev.emplace_back(y_idx(aa, wa, wr), 1.0);
                    for (int s = 0; s < nS; ++s) {
                        for (int wp = 0; wp < nWP; ++wp) {
                            double p = p0(s, wp, wa);
                            if (p <= 0.0) continue;
                            for (int ap = 0; ap < nAP; ++ap) {
                                dev.emplace_back(
                                    pi_idx(wp, wr, ap, aa),
                                    -p * model.reward_a(1, s, ap, at));
                            }
                        }
                    }
                    lp.add_row(RowType::GE, 0.0, dev);
                }
            }
        }
    }

    std::vector<double> obj_p(lp.num_vars(), 0.0), obj_a(lp.num_vars(), 0.0);
    for (int s = 0; s < nS; ++s) {
        for (int wp = 0; wp < nWP; ++wp) {
            for (int wa = 0; wa < nWA; ++wa) {
                double p = p0(s, wp, wa);
                if (p <= 0.0) continue;
                for (int ap = 0; ap < nAP; ++ap) {
                    for (int aa = 0; aa < nAA; ++aa) {
                        obj_p[pi_idx(wp, wa, ap, aa)] +=
                            p * model.reward_p(1, s, ap, aa);
                        obj_a[pi_idx(wp, wa, ap, aa)] +=
                            p * model.reward_a(1, s, ap, aa);
                    }
                }
            }
        }
    }

    lp.objective = obj_p;
    LpResult r1 = lp_solve(lp);
    if (r1.status != LpStatus::Optimal) {
        throw NumericalError("two-step optimum stage 1 did not solve");
    }
    double v1 = r1.objective;

    std::vector<std::pair<int, double>> pin;
    for (int j = 0; j < lp.num_vars(); ++j) {
        if (obj_p[j] != 0.0) pin.emplace_back(j, obj_p[j]);
    }
    lp.add_row(RowType::GE, v1 - 1e-9, pin);
    lp.objective = obj_a;
    LpResult r2 = lp_solve(lp);
    if (r2.status != LpStatus::Optimal) {
        throw NumericalError("two-step optimum stage 2 did not solve");
    }
    return {v1, r2.objective};
}

IcCheckResult ic_check(const GameModel& model, const PrincipalPolicy& policy,
                       double tol, double budget) {
    IcCheckResult res;
    auto [vp, va] =
        exact_policy_values(model, policy, DeviationPlan::truthful(), budget);
    (void)vp;
    res.truthful = va;
    res.best_response = best_response_value(model, policy, budget);
    res.gap = res.best_response - res.truthful;
    res.pass = res.gap <= tol;
    return res;
}

}  // namespace spag
