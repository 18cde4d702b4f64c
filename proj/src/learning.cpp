#include "spag/learning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "spag/errors.hpp"
#include "spag/geometry.hpp"
#include "spag/lp.hpp"
#include "spag/oracle.hpp"
#include "spag/valueset_dp.hpp"

namespace spag {

double zeta(const GameModel& model) {
    double H = model.horizon;
    double S = model.num_states();
    double A = model.num_joint_actions();
    double W = static_cast<double>(model.num_wp()) * model.num_wa();
    return std::pow(H, 5) * S * S * A * A * A * W * W;
}

EstimatedModel EstimatedModel::from(const GameModel& truth) {
    EstimatedModel est;
    est.model = truth;
    est.initial_count.assign(truth.num_outcomes(), 0.0);
    est.row_count.assign(static_cast<std::size_t>(truth.horizon - 1) *
                             truth.num_states() * truth.num_joint_actions(),
                         0.0);
    est.outcome_count.assign(truth.transitions.size(), 0.0);
    est.refresh();  // uniform prior until data arrives
    return est;
}

void EstimatedModel::record_initial(int s, int wp, int wa) {
    initial_count[model.outcome_index(s, wp, wa)] += 1.0;
}

void EstimatedModel::record_step(int h_next, int s_prev, int ap, int aa_played,
                                 int s, int wp, int wa) {
    std::size_t row = ((static_cast<std::size_t>(h_next - 2) *
                            model.num_states() +
                        s_prev) *
                           model.num_ap() +
                       ap) *
                          model.num_aa() +
                      aa_played;
    row_count[row] += 1.0;
    outcome_count[row * model.num_outcomes() + model.outcome_index(s, wp, wa)] +=
        1.0;
}

void EstimatedModel::refresh() {
    const int out = model.num_outcomes();
    double total = 0.0;
    for (double c : initial_count) total += c;
    for (int k = 0; k < out; ++k) {
        model.initial[k] = total > 0.0 ? initial_count[k] / total : 1.0 / out;
    }
    for (std::size_t row = 0; row < row_count.size(); ++row) {
        double n = row_count[row];
        for (int k = 0; k < out; ++k) {
            model.transitions[row * out + k] =
                n > 0.0 ? outcome_count[row * out + k] / n : 1.0 / out;
        }
    }
}

namespace {

int o_space_index(int s, int ap, int aa, const GameModel& m) {
    return 1 + (s * m.num_ap() + ap) * m.num_aa() + aa;
}

int theta_index(int o_idx, int wp, int wa, const GameModel& m) {
    return (o_idx * m.num_wp() + wp) * m.num_wa() + wa;
}

}  // namespace

ExplorationPolicy plan_exploration(const GameModel& truth,
                                   const EstimatedModel& est,
                                   const std::vector<std::vector<double>>& visit,
                                   double c_explore) {
    const GameModel& m = est.model;
    const int H = m.horizon;
    const int nS = m.num_states(), nAP = m.num_ap(), nAA = m.num_aa();
    const int nWP = m.num_wp(), nWA = m.num_wa();
    const int nO = nS * nAP * nAA;
    const int nTheta = (1 + nO) * nWP * nWA;
    if (static_cast<int>(visit.size()) != H - 1) {
        throw ValidationError("visit counters do not match the horizon");
    }
    (void)truth;

    ExplorationPolicy pol;
    pol.action.assign(std::max(0, H - 1), std::vector<int>(nTheta, 0));
    std::vector<double> v_next(nTheta, 0.0);

    for (int h = H - 1; h >= 1; --h) {
        std::vector<double> v_here(nTheta, 0.0);
        // Continuation value of landing on key o at step h+1, folded over the
        // estimated outcome row there.
        std::vector<double> cont(nO, 0.0);
        if (h + 1 <= H - 1) {
            for (int s = 0; s < nS; ++s) {
                for (int ap = 0; ap < nAP; ++ap) {
                    for (int aa = 0; aa < nAA; ++aa) {
                        StateActionKey o{s, ap, aa};
                        int oi = o_space_index(s, ap, aa, m);
                        double acc = 0.0;
                        for (int s2 = 0; s2 < nS; ++s2) {
                            for (int wp = 0; wp < nWP; ++wp) {
                                for (int wa = 0; wa < nWA; ++wa) {
                                    double p =
                                        m.outcome_prob(h + 1, o, s2, wp, wa);
                                    if (p <= 0.0) continue;
                                    acc += p * v_next[theta_index(oi, wp, wa, m)];
                                }
                            }
                        }
                        cont[(s * nAP + ap) * nAA + aa] = acc;
                    }
                }
            }
        }
        auto bonus = [&](int s, int ap, int aa) {
            double n = visit[h - 1][(s * nAP + ap) * nAA + aa];
            return std::min(1.0, c_explore / std::sqrt(std::max(1.0, n)));
        };
        // One information state per (previous key, current observations);
        // only the belief over the hidden current state matters.
        for (int oi = 0; oi <= nO; ++oi) {
            bool root = oi == 0;
            if (root != (h == 1)) continue;
            StateActionKey o = StateActionKey::Root();
            if (!root) {
                int f = oi - 1;
                o = StateActionKey{f / (nAP * nAA), (f / nAA) % nAP, f % nAA};
            }
            for (int wp = 0; wp < nWP; ++wp) {
                for (int wa = 0; wa < nWA; ++wa) {
                    int th = theta_index(oi, wp, wa, m);
                    double best_q = -1.0;
                    int best_joint = 0;
                    for (int ap = 0; ap < nAP; ++ap) {
                        for (int aa = 0; aa < nAA; ++aa) {
                            double q = 0.0;
                            for (int s = 0; s < nS; ++s) {
                                double p = m.outcome_prob(h, o, s, wp, wa);
                                if (p <= 0.0) continue;
                                q += p * (bonus(s, ap, aa) +
                                          (h + 1 <= H - 1
                                               ? cont[(s * nAP + ap) * nAA + aa]
                                               : 0.0));
                            }
                            if (q > best_q + 1e-15) {
                                best_q = q;
                                best_joint = ap * nAA + aa;
                            }
                        }
                    }
                    pol.action[h - 1][th] = best_joint;
                    v_here[th] = std::max(best_q, 0.0);
                }
            }
        }
        v_next.swap(v_here);
    }
    return pol;
}

DeltaIcResult solve_delta_ic(const GameModel& model, double epsilon,
                             double delta, const LpOptions& opts) {
    model.validate();
    if (delta < 0.0) {
        throw ValidationError("the incentive slack must be nonnegative");
    }
    const int H = model.horizon;
    DeltaIcResult out;
    out.solve.epsilon = epsilon;
    out.solve.by_step.assign(H + 1, {});
    if (H == 1) {
        std::vector<std::array<double, 3>> origin{{0.0, 0.0, 0.0}};
        ValuePolytope base = polytope_from_points_3d(origin);
        base.owner_h = 1;
        base.owner = StateActionKey::Root();
        out.solve.by_step[1].emplace(StateActionKey::Root(), std::move(base));
        out.solve.root_target = {0.0, 0.0, 0.0};
        return out;
    }
    if (H > 2 && epsilon <= 0.0) {
        throw ValidationError(
            "a positive grid width is required beyond two steps");
    }

    build_interior_sets(model, 3, H > 2 ? epsilon : 1.0, opts, 1e-6,
                        out.solve.by_step);

    ConstraintSystem root = assemble_constraints(
        model, 1, StateActionKey::Root(), out.solve.by_step[2], 3);
    const SystemLayout& L = root.layout;
    // The only place the slack enters: the promised best-deviation value may
    // exceed the truthful agent value by at most delta.
    root.lp.add_row(RowType::GE, -delta,
                    {{L.v_index(1), 1.0}, {L.v_index(2), -1.0}});

    if (epsilon > 0.0) {
        auto pts = grid_polytope_3d(root, epsilon, opts);
        if (pts.empty()) {
            throw EmptyInducibleSet("no inducible values at the root");
        }
        std::vector<std::array<double, 3>> a(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            a[i] = {pts[i][0], pts[i][1], pts[i][2]};
        }
        ValuePolytope poly = polytope_from_points_3d(a);
        poly.owner_h = 1;
        poly.owner = StateActionKey::Root();
        out.solve.by_step[1].emplace(StateActionKey::Root(), std::move(poly));
    }

    const double hi = root.lp.upper[L.v_index(0)];
    LpSolver solver(root.lp, opts,
                    {L.v_index(0), L.v_index(1), L.v_index(2)});
    std::vector<double> obj(L.num_vars, 0.0);
    auto stage = [&](int c, Sense sense) {
        std::fill(obj.begin(), obj.end(), 0.0);
        obj[L.v_index(c)] = 1.0;
        solver.set_objective(obj, sense);
        LpResult r = solver.solve();
        if (r.status != LpStatus::Optimal) {
            throw EmptyInducibleSet("no inducible values at the root");
        }
        return r.x[L.v_index(c)];
    };
    out.vp = stage(0, Sense::Maximize);
    solver.set_var_bounds(L.v_index(0), std::max(0.0, out.vp - 1e-9), hi);
    out.va = stage(1, Sense::Maximize);
    solver.set_var_bounds(L.v_index(1), std::max(0.0, out.va - 1e-9), hi);
    out.va_star = stage(2, Sense::Minimize);

    out.solve.root_vp = out.vp;
    out.solve.root_va = out.va;
    out.solve.root_target = {out.vp, out.va, out.va_star};
    return out;
}

void compute_regrets(RegretReport& report) {
    report.regp_cum.clear();
    report.rega_cum.clear();
    double sp = 0.0, sa = 0.0;
    for (const EpisodeRecord& r : report.episodes) {
        sp += r.benchmark_p - r.vp_term;
        sa += std::max(0.0, r.benchmark_a - r.va_term);
        report.regp_cum.push_back(sp);
        report.rega_cum.push_back(sa);
    }
}

RegretReport run_learning(const GameModel& model, const LearningConfig& config) {
    model.validate();
    if (config.episodes <= 0) {
        throw ValidationError("the episode count must be positive");
    }
    const int H = model.horizon;
    RegretReport report;
    if (H == 1) {
        for (int64_t t = 0; t < config.episodes; ++t) {
            EpisodeRecord rec;
            rec.episode = t + 1;
            report.episodes.push_back(rec);
        }
        compute_regrets(report);
        return report;
    }

    const int nAP = model.num_ap(), nAA = model.num_aa();
    const double T = static_cast<double>(config.episodes);
    const double z = zeta(model);
    int64_t n0 = config.n0
                     ? *config.n0
                     : static_cast<int64_t>(std::ceil(
                           config.c_explore * std::cbrt(z) *
                           std::pow(T, 2.0 / 3.0)));
    n0 = std::clamp<int64_t>(n0, 0, config.episodes);
    double delta = config.delta ? *config.delta : std::cbrt(z / T);
    report.n0_used = n0;
    report.delta_used = delta;
    report.v_star = H == 2 ? brute_force_optimum(model).first
                           : max_principal_value(model).first;

    Rng rng(config.seed);
    EstimatedModel est = EstimatedModel::from(model);
    std::vector<std::vector<double>> visit(H - 1);
    for (auto& v : visit) {
        v.assign(model.num_states() * model.num_joint_actions(), 0.0);
    }

    for (int64_t t = 0; t < n0; ++t) {
        ExplorationPolicy pol =
            plan_exploration(model, est, visit, config.c_explore);
        PrincipalPolicy wrapped = [&model, pol, nAA](const History& hist,
                                                     int wp, int wr) {
            int h = static_cast<int>(hist.size()) + 1;
            int oi = 0;
            if (!hist.empty()) {
                const StepInteraction& st = hist.back();
                oi = o_space_index(st.s, st.ap, st.aa_played, model);
            }
            std::vector<double> dist(model.num_joint_actions(), 0.0);
            dist[pol.action[h - 1][theta_index(oi, wp, wr, model)]] = 1.0;
            return dist;
        };

        double vp_real = 0.0, va_real = 0.0;
        StateActionKey o = StateActionKey::Root();
        int oi = 0;
        for (int h = 1; h < H; ++h) {
            auto [s, wp, wa] = model.sample_step(h, o, rng);
            if (h == 1) {
                est.record_initial(s, wp, wa);
            } else {
                est.record_step(h, o.s, o.ap, o.aa, s, wp, wa);
            }
            int joint = pol.action[h - 1][theta_index(oi, wp, wa, model)];
            int ap = joint / nAA, aa = joint % nAA;
            visit[h - 1][(s * nAP + ap) * nAA + aa] += 1.0;
            vp_real += model.reward_p(h, s, ap, aa);
            va_real += model.reward_a(h, s, ap, aa);
            o = StateActionKey{s, ap, aa};
            oi = o_space_index(s, ap, aa, model);
        }
        // Closing draw so the row feeding the final step is estimated too.
        {
            auto [s, wp, wa] = model.sample_step(H, o, rng);
            est.record_step(H, o.s, o.ap, o.aa, s, wp, wa);
        }
        est.refresh();

        EpisodeRecord rec;
        rec.episode = t + 1;
        rec.explore = true;
        rec.vp_term = vp_real;
        rec.va_term = va_real;
        rec.benchmark_p = report.v_star;
        rec.benchmark_a = best_response_value(model, wrapped);
        std::tie(rec.vp_expected, rec.va_expected) =
            exact_policy_values(model, wrapped);
        report.episodes.push_back(rec);
    }

    if (n0 < config.episodes) {
        double eps_commit = std::max(delta, 1e-2);
        DeltaIcResult dic = solve_delta_ic(est.model, eps_commit, delta);
        PolicyHandle handle(est.model, dic.solve, 3);
        PrincipalPolicy committed = as_policy(handle);
        auto [evp, eva] = exact_policy_values(model, committed);
        double bra = best_response_value(model, committed);
        for (int64_t t = n0; t < config.episodes; ++t) {
            EpisodeRecord rec;
            rec.episode = t + 1;
            rec.explore = false;
            rec.vp_term = evp;
            rec.va_term = eva;
            rec.benchmark_p = report.v_star;
            rec.benchmark_a = bra;
            rec.vp_expected = evp;
            rec.va_expected = eva;
            report.episodes.push_back(rec);
        }
    }
    compute_regrets(report);
    return report;
}

void write_report_csv(const RegretReport& report, std::ostream& out) {
    out << "episode,phase,regP_cum,regA_cum,vP_expected,vA_expected\n";
    out << std::setprecision(10);
    for (std::size_t i = 0; i < report.episodes.size(); ++i) {
        const EpisodeRecord& r = report.episodes[i];
        out << r.episode << ',' << (r.explore ? "explore" : "commit") << ','
            << report.regp_cum[i] << ',' << report.rega_cum[i] << ','
            << r.vp_expected << ',' << r.va_expected << '\n';
    }
}

}  // namespace spag
