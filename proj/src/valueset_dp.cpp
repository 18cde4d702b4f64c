#include "spag/valueset_dp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spag/errors.hpp"

namespace spag {

int SystemLayout::pi_index(int wp, int wr, int ap, int aa) const {
    return pi_base + ((wp * nWA + wr) * nAP + ap) * nAA + aa;
}

int SystemLayout::tuple_index(int s, int wp, int wa, int wr, int ap, int aa,
                              int at) const {
    return ((((((s * nWP + wp) * nWA + wa) * nWA + wr) * nAP + ap) * nAA + aa) *
                nAA +
            at);
}

int SystemLayout::z_index(int s, int wp, int wa, int wr, int ap, int aa,
                          int at, int c) const {
    return z_base + tuple_index(s, wp, wa, wr, ap, aa, at) * dimension + c;
}

int SystemLayout::y_index(int aa, int wa, int wr) const {
    return y_base + (aa * nWA + wa) * nWA + wr;
}

int SystemLayout::v_index(int c) const { return v_base + c; }

int SystemLayout::ys_index(int aa, int wa, int wr) const {
    return ys_base + (aa * nWA + wa) * nWA + wr;
}

int SystemLayout::u_index(int wa) const { return u_base + wa; }

int SystemLayout::tuple_count() const {
    return nS * nWP * nWA * nWA * nAP * nAA * nAA;
}

namespace {

// Accumulates coefficients densely, then emits the sparse row.
class RowBuilder {
  public:
    explicit RowBuilder(int n) : coef_(n, 0.0) {}

    void add(int j, double c) {
        if (c == 0.0) return;
        if (coef_[j] == 0.0) touched_.push_back(j);
        coef_[j] += c;
    }

    void emit(LinearProgram& lp, RowType type, double rhs) {
        std::vector<std::pair<int, double>> entries;
        entries.reserve(touched_.size());
        std::sort(touched_.begin(), touched_.end());
        for (int j : touched_) {
            if (coef_[j] != 0.0) entries.emplace_back(j, coef_[j]);
            coef_[j] = 0.0;
        }
        touched_.clear();
        lp.add_row(type, rhs, entries);
    }

  private:
    std::vector<double> coef_;
    std::vector<int> touched_;
};

}  // namespace

ConstraintSystem assemble_constraints(const GameModel& model, int h,
                                      const StateActionKey& o,
                                      const PolytopeMap& next, int dimension) {
    const int H = model.horizon;
    if (h < 1 || h >= H) {
        throw ValidationError("assemble_constraints: step " + std::to_string(h) +
                              " outside [1, horizon)");
    }
    if ((h == 1) != o.is_root()) {
        throw ValidationError(
            "assemble_constraints: the root key is exactly the step-1 key");
    }
    if (dimension != 2 && dimension != 3) {
        throw ValidationError("assemble_constraints: dimension must be 2 or 3");
    }

    ConstraintSystem sys;
    sys.h = h;
    sys.o = o;
    SystemLayout& L = sys.layout;
    L.dimension = dimension;
    L.nS = model.num_states();
    L.nAP = model.num_ap();
    L.nAA = model.num_aa();
    L.nWP = model.num_wp();
    L.nWA = model.num_wa();

    const double hi = static_cast<double>(H);
    LinearProgram& lp = sys.lp;
    lp.sense = Sense::Maximize;

    L.pi_base = 0;
    for (int i = 0; i < L.nWP * L.nWA * L.nAP * L.nAA; ++i) lp.add_var(0.0, 1.0, 0.0);
    L.z_base = lp.num_vars();
    for (int i = 0; i < L.tuple_count() * dimension; ++i) lp.add_var(0.0, hi, 0.0);
    if (dimension == 2) {
        L.y_base = lp.num_vars();
        for (int i = 0; i < L.nAA * L.nWA * L.nWA; ++i) lp.add_var(0.0, hi, 0.0);
    } else {
        L.ys_base = lp.num_vars();
        for (int i = 0; i < L.nAA * L.nWA * L.nWA; ++i) lp.add_var(0.0, hi, 0.0);
        L.u_base = lp.num_vars();
        for (int i = 0; i < L.nWA; ++i) lp.add_var(0.0, hi, 0.0);
    }
    L.v_base = lp.num_vars();
    for (int c = 0; c < dimension; ++c) lp.add_var(0.0, hi, 0.0);
    L.num_vars = lp.num_vars();

    // Outcome probabilities and report pairs with positive marginal.
    std::vector<double> prob(L.nS * L.nWP * L.nWA, 0.0);
    std::vector<double> marginal(L.nWA, 0.0);
    for (int s = 0; s < L.nS; ++s) {
        for (int wp = 0; wp < L.nWP; ++wp) {
            for (int wa = 0; wa < L.nWA; ++wa) {
                double p = model.outcome_prob(h, o, s, wp, wa);
                prob[(s * L.nWP + wp) * L.nWA + wa] = p;
                marginal[wa] += p;
            }
        }
    }
    for (int wa = 0; wa < L.nWA; ++wa) {
        if (marginal[wa] <= 1e-12) continue;
        for (int wr = 0; wr < L.nWA; ++wr) sys.report_pairs.emplace_back(wa, wr);
    }
    auto p_of = [&](int s, int wp, int wa) {
        return prob[(s * L.nWP + wp) * L.nWA + wa];
    };

    RowBuilder row(L.num_vars);

    // Value rows: v_c equals expected step reward plus promised continuation
    // along the truthful path (report = wa, played = recommended).
    for (int c = 0; c < 2; ++c) {
        row.add(L.v_index(c), 1.0);
        for (int s = 0; s < L.nS; ++s) {
            for (int wp = 0; wp < L.nWP; ++wp) {
                for (int wa = 0; wa < L.nWA; ++wa) {
                    double p = p_of(s, wp, wa);
                    if (p <= 0.0) continue;
                    for (int ap = 0; ap < L.nAP; ++ap) {
                        for (int aa = 0; aa < L.nAA; ++aa) {
                            double r = c == 0 ? model.reward_p(h, s, ap, aa)
                                              : model.reward_a(h, s, ap, aa);
                            row.add(L.pi_index(wp, wa, ap, aa), -p * r);
                            row.add(L.z_index(s, wp, wa, wa, ap, aa, aa, c), -p);
                        }
                    }
                }
            }
        }
        row.emit(lp, RowType::EQ, 0.0);
    }

    if (dimension == 3) {
        // The third coordinate dominates the agent's best deviation value.
        row.add(L.v_index(2), 1.0);
        for (int wa = 0; wa < L.nWA; ++wa) {
            if (marginal[wa] > 1e-12) row.add(L.u_index(wa), -1.0);
        }
        row.emit(lp, RowType::GE, 0.0);

        // u(wa) dominates every report branch.
        for (const auto& [wa, wr] : sys.report_pairs) {
            row.add(L.u_index(wa), 1.0);
            for (int aa = 0; aa < L.nAA; ++aa) row.add(L.ys_index(aa, wa, wr), -1.0);
            row.emit(lp, RowType::GE, 0.0);
        }
    } else {
        // Truthful value given wa dominates every (report, replay) deviation,
        // both sides scaled by the marginal of wa.
        for (const auto& [wa, wr] : sys.report_pairs) {
            for (int s = 0; s < L.nS; ++s) {
                for (int wp = 0; wp < L.nWP; ++wp) {
                    double p = p_of(s, wp, wa);
                    if (p <= 0.0) continue;
                    for (int ap = 0; ap < L.nAP; ++ap) {
                        for (int aa = 0; aa < L.nAA; ++aa) {
                            double r = model.reward_a(h, s, ap, aa);
                            row.add(L.pi_index(wp, wa, ap, aa), p * r);
                            row.add(L.z_index(s, wp, wa, wa, ap, aa, aa, 1), p);
                        }
                    }
                }
            }
            for (int aa = 0; aa < L.nAA; ++aa) row.add(L.y_index(aa, wa, wr), -1.0);
            row.emit(lp, RowType::GE, 0.0);
        }
    }

    // Deviation envelopes: for the agent who saw wa, reported wr, was
    // recommended aa and plays at instead.  The policy is driven by the
    // report; the expectation is over the true outcome.
    const int env_base = dimension == 2 ? L.y_base : L.ys_base;
    const int env_coord = dimension == 2 ? 1 : 2;
    for (const auto& [wa, wr] : sys.report_pairs) {
        for (int aa = 0; aa < L.nAA; ++aa) {
            for (int at = 0; at < L.nAA; ++at) {
                row.add(env_base + (aa * L.nWA + wa) * L.nWA + wr, 1.0);
                for (int s = 0; s < L.nS; ++s) {
                    for (int wp = 0; wp < L.nWP; ++wp) {
                        double p = p_of(s, wp, wa);
                        if (p <= 0.0) continue;
                        for (int ap = 0; ap < L.nAP; ++ap) {
                            double r = model.reward_a(h, s, ap, at);
                            row.add(L.pi_index(wp, wr, ap, aa), -p * r);
                            row.add(L.z_index(s, wp, wa, wr, ap, aa, at, env_coord),
                                    -p);
                        }
                    }
                }
                row.emit(lp, RowType::GE, 0.0);
            }
        }
    }

    // Membership: the promise for each realizable step tuple lies, scaled by
    // the policy weight of its recommendation, in the value set keyed by the
    // played action.
    for (int s = 0; s < L.nS; ++s) {
        for (int wp = 0; wp < L.nWP; ++wp) {
            for (int wa = 0; wa < L.nWA; ++wa) {
                double p = p_of(s, wp, wa);
                for (int wr = 0; wr < L.nWA; ++wr) {
                    for (int ap = 0; ap < L.nAP; ++ap) {
                        for (int aa = 0; aa < L.nAA; ++aa) {
                            for (int at = 0; at < L.nAA; ++at) {
                                if (p <= 0.0 || marginal[wa] <= 1e-12) {
                                    // Never realized: pin the promise to zero.
                                    for (int c = 0; c < dimension; ++c) {
                                        int j = L.z_index(s, wp, wa, wr, ap, aa,
                                                          at, c);
                                        lp.upper[j] = 0.0;
                                    }
                                    continue;
                                }
                                const ValuePolytope& poly =
                                    next.at(StateActionKey{s, ap, at});
                                int pij = L.pi_index(wp, wr, ap, aa);
                                for (std::size_t k = 0; k < poly.normals.size();
                                     ++k) {
                                    for (int c = 0; c < dimension; ++c) {
                                        row.add(L.z_index(s, wp, wa, wr, ap, aa,
                                                          at, c),
                                                poly.normals[k][c]);
                                    }
                                    row.add(pij, -poly.offsets[k]);
                                    row.emit(lp, RowType::LE, 0.0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // One distribution per (observation, report) cell, on or off path.
    for (int wp = 0; wp < L.nWP; ++wp) {
        for (int wr = 0; wr < L.nWA; ++wr) {
            for (int ap = 0; ap < L.nAP; ++ap) {
                for (int aa = 0; aa < L.nAA; ++aa) {
                    row.add(L.pi_index(wp, wr, ap, aa), 1.0);
                }
            }
            row.emit(lp, RowType::EQ, 1.0);
        }
    }

    return sys;
}

namespace {

struct Sweeper {
    const ConstraintSystem& sys;
    LpSolver solver;
    std::vector<double> obj;
    std::vector<std::vector<double>> points;

    Sweeper(const ConstraintSystem& s, const LpOptions& opts)
        : sys(s),
          solver(s.lp, opts, mutable_vars(s)),
          obj(s.layout.num_vars, 0.0) {}

    static std::vector<int> mutable_vars(const ConstraintSystem& s) {
        std::vector<int> m;
        for (int c = 0; c < s.layout.dimension; ++c) {
            m.push_back(s.layout.v_index(c));
        }
        return m;
    }

    // Optimizes coordinate `c`; returns the full v found, or nothing.
    std::optional<std::vector<double>> opt(int c, Sense sense) {
        std::fill(obj.begin(), obj.end(), 0.0);
        obj[sys.layout.v_index(c)] = 1.0;
        solver.set_objective(obj, sense);
        LpResult r = solver.solve();
        if (r.status != LpStatus::Optimal) return std::nullopt;
        std::vector<double> v(sys.layout.dimension);
        for (int k = 0; k < sys.layout.dimension; ++k) {
            v[k] = r.x[sys.layout.v_index(k)];
        }
        return v;
    }

    void fix(int c, double w) {
        solver.set_var_bounds(sys.layout.v_index(c), w, w);
    }
    void release(int c, double hi) {
        solver.set_var_bounds(sys.layout.v_index(c), 0.0, hi);
    }
};

}  // namespace

std::vector<std::vector<double>> slice_polytope(const ConstraintSystem& system,
                                                double epsilon,
                                                const LpOptions& opts) {
    if (system.layout.dimension != 2) {
        throw ValidationError("slice_polytope expects a 2-dimensional system");
    }
    if (epsilon <= 0.0) throw ValidationError("slice spacing must be positive");
    Sweeper sw(system, opts);
    // The v-box upper bound is the horizon; slices are spaced at epsilon / H.
    const double hi = system.lp.upper[system.layout.v_index(0)];

    auto pmax = sw.opt(0, Sense::Maximize);
    if (!pmax) return {};
    auto pmin = sw.opt(0, Sense::Minimize);
    auto amax = sw.opt(1, Sense::Maximize);
    auto amin = sw.opt(1, Sense::Minimize);
    if (!pmin || !amax || !amin) {
        throw NumericalError("slice sweep lost feasibility between solves");
    }
    std::vector<std::vector<double>> pts{*pmax, *pmin, *amax, *amin};

    const double spacing = epsilon / hi;
    const double lo_w = (*pmin)[0], hi_w = (*pmax)[0];
    long k0 = static_cast<long>(std::floor(lo_w / spacing)) - 1;
    long k1 = static_cast<long>(std::ceil(hi_w / spacing)) + 1;
    for (long k = k0; k <= k1; ++k) {
        double w = static_cast<double>(k) * spacing;
        if (w < -1e-12 || w > hi + 1e-12) continue;
        if (w < lo_w - 1e-9 || w > hi_w + 1e-9) continue;
        sw.fix(0, w);
        auto top = sw.opt(1, Sense::Maximize);
        if (top) pts.push_back(*top);
        auto bot = sw.opt(1, Sense::Minimize);
        if (bot) pts.push_back(*bot);
    }
    sw.release(0, hi);
    return pts;
}

std::vector<std::vector<double>> grid_polytope_3d(const ConstraintSystem& system,
                                                  double epsilon,
                                                  const LpOptions& opts) {
    if (system.layout.dimension != 3) {
        throw ValidationError("grid_polytope_3d expects a 3-dimensional system");
    }
    if (epsilon <= 0.0) throw ValidationError("grid spacing must be positive");
    Sweeper sw(system, opts);
    const double hi = system.lp.upper[system.layout.v_index(0)];

    std::vector<std::vector<double>> pts;
    std::vector<std::vector<double>> ext(6);
    for (int c = 0; c < 3; ++c) {
        auto mx = sw.opt(c, Sense::Maximize);
        if (!mx) return {};
        auto mn = sw.opt(c, Sense::Minimize);
        if (!mn) throw NumericalError("grid sweep lost feasibility");
        ext[2 * c] = *mx;
        ext[2 * c + 1] = *mn;
        pts.push_back(*mx);
        pts.push_back(*mn);
    }

    const double spacing = epsilon / hi;
    auto range = [&](int c) {
        return std::pair<double, double>(ext[2 * c + 1][c], ext[2 * c][c]);
    };
    auto [plo, phi] = range(0);
    auto [alo, ahi] = range(1);
    long i0 = static_cast<long>(std::floor(plo / spacing)) - 1;
    long i1 = static_cast<long>(std::ceil(phi / spacing)) + 1;
    long j0 = static_cast<long>(std::floor(alo / spacing)) - 1;
    long j1 = static_cast<long>(std::ceil(ahi / spacing)) + 1;
    for (long i = i0; i <= i1; ++i) {
        double w1 = static_cast<double>(i) * spacing;
        if (w1 < -1e-12 || w1 > hi + 1e-12) continue;
        if (w1 < plo - 1e-9 || w1 > phi + 1e-9) continue;
        sw.fix(0, w1);
        for (long j = j0; j <= j1; ++j) {
            double w2 = static_cast<double>(j) * spacing;
            if (w2 < -1e-12 || w2 > hi + 1e-12) continue;
            if (w2 < alo - 1e-9 || w2 > ahi + 1e-9) continue;
            sw.fix(1, w2);
            auto top = sw.opt(2, Sense::Maximize);
            if (top) pts.push_back(*top);
            auto bot = sw.opt(2, Sense::Minimize);
            if (bot) pts.push_back(*bot);
        }
        sw.release(1, hi);
    }
    sw.release(0, hi);
    return pts;
}

const ValuePolytope& SolveResult::at(int h, const StateActionKey& o) const {
    if (h < 1 || h >= static_cast<int>(by_step.size())) {
        throw ValidationError("value set step out of range");
    }
    auto it = by_step[h].find(o);
    if (it == by_step[h].end()) {
        throw ValidationError("no value set stored for the requested key");
    }
    return it->second;
}

namespace {

ValuePolytope hull_of(int dimension,
                      const std::vector<std::vector<double>>& pts) {
    if (dimension == 2) {
        std::vector<std::array<double, 2>> a(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) a[i] = {pts[i][0], pts[i][1]};
        return polytope_from_points_2d(a);
    }
    std::vector<std::array<double, 3>> a(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        a[i] = {pts[i][0], pts[i][1], pts[i][2]};
    }
    return polytope_from_points_3d(a);
}

ValuePolytope base_point(int dimension, int h, const StateActionKey& o) {
    ValuePolytope poly =
        hull_of(dimension, {std::vector<double>(dimension, 0.0)});
    poly.owner_h = h;
    poly.owner = o;
    return poly;
}

}  // namespace

void build_interior_sets(const GameModel& model, int dimension, double epsilon,
                         const LpOptions& opts, double vertex_tol,
                         std::vector<PolytopeMap>& by_step) {
    const int H = model.horizon;
    for (int s = 0; s < model.num_states(); ++s) {
        for (int ap = 0; ap < model.num_ap(); ++ap) {
            for (int aa = 0; aa < model.num_aa(); ++aa) {
                StateActionKey o{s, ap, aa};
                by_step[H].emplace(o, base_point(dimension, H, o));
            }
        }
    }
    for (int h = H - 1; h >= 2; --h) {
        for (int s = 0; s < model.num_states(); ++s) {
            for (int ap = 0; ap < model.num_ap(); ++ap) {
                for (int aa = 0; aa < model.num_aa(); ++aa) {
                    StateActionKey o{s, ap, aa};
                    ConstraintSystem sys = assemble_constraints(
                        model, h, o, by_step[h + 1], dimension);
                    auto pts = dimension == 2
                                   ? slice_polytope(sys, epsilon, opts)
                                   : grid_polytope_3d(sys, epsilon, opts);
                    if (pts.empty()) {
                        throw EmptyInducibleSet(
                            "no inducible values at step " + std::to_string(h));
                    }
                    ValuePolytope poly = hull_of(dimension, pts);
                    poly.owner_h = h;
                    poly.owner = o;
                    for (const auto& v : poly.vertices) {
                        if (!poly.contains(v, vertex_tol)) {
                            throw NumericalError(
                                "hull vertex fails its own facet check");
                        }
                    }
                    by_step[h].emplace(o, std::move(poly));
                }
            }
        }
    }
}

namespace {

// Lexicographic root optimum: principal first, then the agent, on a fresh
// solver over the root system.
std::pair<double, double> root_lexicographic(const ConstraintSystem& root,
                                             const LpOptions& opts) {
    Sweeper sw(root, opts);
    const double hi = root.lp.upper[root.layout.v_index(0)];
    auto first = sw.opt(0, Sense::Maximize);
    if (!first) throw EmptyInducibleSet("no inducible values at the root");
    double vp = (*first)[0];
    sw.solver.set_var_bounds(root.layout.v_index(0), std::max(0.0, vp - 1e-9),
                             hi);
    auto second = sw.opt(1, Sense::Maximize);
    if (!second) throw NumericalError("agent stage lost feasibility");
    return {vp, (*second)[1]};
}

}  // namespace

SolveResult build_value_polytopes(const GameModel& model,
                                  const ValueSetOptions& options) {
    model.validate();
    const int H = model.horizon;
    SolveResult res;
    res.epsilon = options.epsilon;
    res.by_step.assign(H + 1, {});
    if (H == 1) {
        res.by_step[1].emplace(StateActionKey::Root(),
                               base_point(2, 1, StateActionKey::Root()));
        res.root_target = {0.0, 0.0};
        return res;
    }
    build_interior_sets(model, 2, options.epsilon, options.lp,
                   options.vertex_check_tol, res.by_step);

    ConstraintSystem root = assemble_constraints(
        model, 1, StateActionKey::Root(), res.by_step[2], 2);
    auto pts = slice_polytope(root, options.epsilon, options.lp);
    if (pts.empty()) throw EmptyInducibleSet("no inducible values at the root");
    ValuePolytope poly = hull_of(2, pts);
    poly.owner_h = 1;
    poly.owner = StateActionKey::Root();
    res.by_step[1].emplace(StateActionKey::Root(), std::move(poly));

    std::tie(res.root_vp, res.root_va) = root_lexicographic(root, options.lp);
    res.root_target = {res.root_vp, res.root_va};
    return res;
}

std::pair<double, double> max_principal_value(const GameModel& model,
                                              const ValueSetOptions& options) {
    model.validate();
    const int H = model.horizon;
    if (H == 1) return {0.0, 0.0};
    std::vector<PolytopeMap> by_step(H + 1);
    build_interior_sets(model, 2, options.epsilon, options.lp,
                   options.vertex_check_tol, by_step);
    ConstraintSystem root =
        assemble_constraints(model, 1, StateActionKey::Root(), by_step[2], 2);
    return root_lexicographic(root, options.lp);
}

}  // namespace spag
