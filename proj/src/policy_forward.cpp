#include "spag/policy_forward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "spag/errors.hpp"

namespace spag {

namespace {

constexpr double kProbFloor = 1e-9;
constexpr double kTargetSlack = 1e-7;

std::vector<double> lex_max_vertex(const ValuePolytope& poly) {
    const auto& vs = poly.vertices;
    std::size_t best = 0;
    for (std::size_t i = 1; i < vs.size(); ++i) {
        if (std::lexicographical_compare(vs[best].begin(), vs[best].end(),
                                         vs[i].begin(), vs[i].end())) {
            best = i;
        }
    }
    return vs[best];
}

// Nearest point of the polytope in the L1 sense; used when a recovered
// promise drifts just outside its set.
std::vector<double> project_into(const ValuePolytope& poly,
                                 const std::vector<double>& v,
                                 const LpOptions& opts) {
    const int d = poly.dimension;
    LinearProgram lp;
    lp.sense = Sense::Minimize;
    for (int c = 0; c < d; ++c) lp.add_var(-kInf, kInf, 0.0);  // the point
    for (int c = 0; c < d; ++c) lp.add_var(0.0, kInf, 1.0);    // |shift| split
    for (int c = 0; c < d; ++c) lp.add_var(0.0, kInf, 1.0);
    for (int c = 0; c < d; ++c) {
        // x_c - v_c = dplus_c - dminus_c
        lp.add_row(RowType::EQ, v[c],
                   {{c, 1.0}, {d + c, -1.0}, {2 * d + c, 1.0}});
    }
    for (std::size_t k = 0; k < poly.normals.size(); ++k) {
        std::vector<std::pair<int, double>> coefs;
        for (int c = 0; c < d; ++c) coefs.emplace_back(c, poly.normals[k][c]);
        lp.add_row(RowType::LE, poly.offsets[k], coefs);
    }
    LpResult r = lp_solve(lp, opts);
    if (r.status != LpStatus::Optimal) {
        throw NumericalError("projection into a value set failed");
    }
    return std::vector<double>(r.x.begin(), r.x.begin() + d);
}

}  // namespace

double OneStepPolicy::pi_at(const GameModel& model, int wp, int wr, int ap,
                            int aa) const {
    int nWA = model.num_wa(), nAP = model.num_ap(), nAA = model.num_aa();
    return pi[((wp * nWA + wr) * nAP + ap) * nAA + aa];
}

std::vector<double> OneStepPolicy::onward_at(const GameModel& model, int s,
                                             int wp, int wa, int wr, int ap,
                                             int aa, int at) const {
    int nWP = model.num_wp(), nWA = model.num_wa(), nAP = model.num_ap(),
        nAA = model.num_aa();
    int t = ((((((s * nWP + wp) * nWA + wa) * nWA + wr) * nAP + ap) * nAA + aa) *
                 nAA +
             at);
    return std::vector<double>(onward.begin() + t * dimension,
                               onward.begin() + (t + 1) * dimension);
}

OneStepPolicy one_step_solve(const GameModel& model, int h,
                             const StateActionKey& o,
                             const std::vector<double>& target,
                             const PolytopeMap& next, int dimension,
                             const LpOptions& opts) {
    if (static_cast<int>(target.size()) != dimension) {
        throw ValidationError("one_step_solve: target has the wrong dimension");
    }
    ConstraintSystem sys = assemble_constraints(model, h, o, next, dimension);
    const SystemLayout& L = sys.layout;
    const double hi = static_cast<double>(model.horizon);
    for (int c = 0; c < dimension; ++c) {
        int j = L.v_index(c);
        sys.lp.lower[j] = std::max(0.0, target[c] - kTargetSlack);
        sys.lp.upper[j] = std::min(hi, target[c] + kTargetSlack);
    }
    LpResult r = lp_solve(sys.lp, opts);
    if (r.status != LpStatus::Optimal) {
        throw EmptyInducibleSet("promised value is not realizable at step " +
                                std::to_string(h));
    }

    OneStepPolicy pol;
    pol.h = h;
    pol.o = o;
    pol.dimension = dimension;
    int cells = L.nWP * L.nWA;
    int acts = L.nAP * L.nAA;
    pol.pi.assign(cells * acts, 0.0);
    for (int cell = 0; cell < cells; ++cell) {
        double total = 0.0;
        for (int a = 0; a < acts; ++a) {
            double q = std::max(0.0, r.x[L.pi_base + cell * acts + a]);
            pol.pi[cell * acts + a] = q;
            total += q;
        }
        for (int a = 0; a < acts; ++a) {
            pol.pi[cell * acts + a] = total > 0.0
                                          ? pol.pi[cell * acts + a] / total
                                          : 1.0 / static_cast<double>(acts);
        }
    }

    std::vector<double> marginal(L.nWA, 0.0);
    for (int s = 0; s < L.nS; ++s) {
        for (int wp = 0; wp < L.nWP; ++wp) {
            for (int wa = 0; wa < L.nWA; ++wa) {
                marginal[wa] += model.outcome_prob(h, o, s, wp, wa);
            }
        }
    }

    pol.onward.assign(L.tuple_count() * dimension, 0.0);
    for (int s = 0; s < L.nS; ++s) {
        for (int wp = 0; wp < L.nWP; ++wp) {
            for (int wa = 0; wa < L.nWA; ++wa) {
                double p = model.outcome_prob(h, o, s, wp, wa);
                for (int wr = 0; wr < L.nWA; ++wr) {
                    for (int ap = 0; ap < L.nAP; ++ap) {
                        for (int aa = 0; aa < L.nAA; ++aa) {
                            for (int at = 0; at < L.nAA; ++at) {
                                const ValuePolytope& poly =
                                    next.at(StateActionKey{s, ap, at});
                                std::vector<double> v;
                                double q = pol.pi_at(model, wp, wr, ap, aa);
                                bool realizable =
                                    p > 0.0 && marginal[wa] > 1e-12;
                                if (realizable && q > kProbFloor) {
                                    v.resize(dimension);
                                    for (int c = 0; c < dimension; ++c) {
                                        v[c] = r.x[L.z_index(s, wp, wa, wr, ap,
                                                             aa, at, c)] /
                                               q;
                                    }
                                    if (!poly.contains(v, kTargetSlack)) {
                                        v = project_into(poly, v, opts);
                                    }
                                } else {
                                    v = lex_max_vertex(poly);
                                }
                                int t = L.tuple_index(s, wp, wa, wr, ap, aa, at);
                                for (int c = 0; c < dimension; ++c) {
                                    pol.onward[t * dimension + c] = v[c];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return pol;
}

DeviationPlan::DeviationPlan() {
    report = [](int, const History&, int wa) { return wa; };
    act = [](int, const History&, int, int, int aa) { return aa; };
}

DeviationPlan DeviationPlan::truthful() { return DeviationPlan(); }

uint64_t history_key(const History& history) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](int v) {
        h ^= static_cast<uint64_t>(v + 3);
        h *= 1099511628211ull;
    };
    for (const auto& st : history) {
        mix(st.s);
        mix(st.omega_p);
        mix(st.omega_a);
        mix(st.report);
        mix(st.ap);
        mix(st.aa);
        mix(st.aa_played);
    }
    return h;
}

PolicyHandle::PolicyHandle(const GameModel& model, SolveResult result,
                           int dimension, const LpOptions& opts)
    : model_(model),
      result_(std::move(result)),
      dimension_(dimension),
      opts_(opts) {
    if (static_cast<int>(result_.root_target.size()) != dimension_) {
        throw ValidationError(
            "solve result does not carry a root target of the requested "
            "dimension");
    }
}

const OneStepPolicy& PolicyHandle::step_policy(const History& history) const {
    int h = static_cast<int>(history.size()) + 1;
    if (h >= model_.horizon) {
        throw ValidationError("no decision remains after the final step");
    }
    std::lock_guard<std::mutex> lock(mu_);
    // Realize targets along the prefix chain, memoizing every prefix.
    std::vector<double> target = result_.root_target;
    std::vector<int> key;
    key.reserve(history.size() * 7);
    const OneStepPolicy* last = nullptr;
    for (int i = 0; i <= static_cast<int>(history.size()); ++i) {
        StateActionKey o = StateActionKey::Root();
        if (i > 0) {
            const StepInteraction& st = history[i - 1];
            target = last->onward_at(model_, st.s, st.omega_p, st.omega_a,
                                     st.report, st.ap, st.aa, st.aa_played);
            o = StateActionKey{st.s, st.ap, st.aa_played};
            for (int v : {st.s, st.omega_p, st.omega_a, st.report, st.ap,
                          st.aa, st.aa_played}) {
                key.push_back(v);
            }
        }
        auto it = memo_.find(key);
        if (it == memo_.end()) {
            OneStepPolicy pol =
                one_step_solve(model_, i + 1, o, target,
                               result_.by_step[i + 2], dimension_, opts_);
            it = memo_.emplace(key, std::move(pol)).first;
        }
        last = &it->second;
    }
    return *last;
}

std::vector<double> PolicyHandle::action_distribution(const History& history,
                                                      int wp, int wr) const {
    const OneStepPolicy& pol = step_policy(history);
    int acts = model_.num_ap() * model_.num_aa();
    int cell = wp * model_.num_wa() + wr;
    return std::vector<double>(pol.pi.begin() + cell * acts,
                               pol.pi.begin() + (cell + 1) * acts);
}

std::vector<double> PolicyHandle::current_target(const History& history) const {
    if (history.empty()) return result_.root_target;
    History prefix(history.begin(), history.end() - 1);
    const OneStepPolicy& pol = step_policy(prefix);
    const StepInteraction& st = history.back();
    return pol.onward_at(model_, st.s, st.omega_p, st.omega_a, st.report,
                         st.ap, st.aa, st.aa_played);
}

Episode simulate_episode(const GameModel& model, const PolicyHandle& handle,
                         const DeviationPlan& plan, Rng& rng) {
    Episode ep;
    const int nAA = model.num_aa();
    for (int h = 1; h < model.horizon; ++h) {
        StateActionKey o = StateActionKey::Root();
        if (!ep.steps.empty()) {
            const StepInteraction& prev = ep.steps.back();
            o = StateActionKey{prev.s, prev.ap, prev.aa_played};
        }
        auto [s, wp, wa] = model.sample_step(h, o, rng);
        int wr = plan.report(h, ep.steps, wa);
        std::vector<double> dist = handle.action_distribution(ep.steps, wp, wr);
        int joint = rng.categorical(dist);
        int ap = joint / nAA;
        int aa = joint % nAA;
        int at = plan.act(h, ep.steps, wa, wr, aa);
        ep.vp += model.reward_p(h, s, ap, at);
        ep.va += model.reward_a(h, s, ap, at);
        ep.steps.push_back({s, wp, wa, wr, ap, aa, at});
    }
    return ep;
}

std::vector<Episode> rollout(const GameModel& model, const PolicyHandle& handle,
                             const DeviationPlan& plan, int episodes,
                             uint64_t seed) {
    Rng rng(seed);
    std::vector<Episode> out;
    out.reserve(episodes);
    for (int t = 0; t < episodes; ++t) {
        out.push_back(simulate_episode(model, handle, plan, rng));
    }
    return out;
}

}  // namespace spag
