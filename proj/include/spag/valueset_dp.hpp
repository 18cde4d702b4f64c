#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "spag/geometry.hpp"
#include "spag/lp.hpp"
#include "spag/model.hpp"

namespace spag {

// Maps the decision variables of a per-(h,o) constraint system to LP column
// indices.  Variables, in block order:
//   pi(ap,aa | wp, wr)        one per (wp, wr, ap, aa)
//   z(sigma)[c]               scaled onward values, one per step tuple and coord
//   y(aa, wa, wr)             deviation envelope, one per (aa, wa, wr); only in
//                             the 2-dimensional system
//   v[c]                      the value vector itself
// and for the 3-dimensional slack-IC variant instead of y:
//   ys(aa, wa, wr)            per-recommendation deviation envelope over the
//                             third z coordinate
//   u(wa)                     per-observation best deviation value
struct SystemLayout {
    int dimension = 2;
    int nS = 0, nAP = 0, nAA = 0, nWP = 0, nWA = 0;
    int pi_base = 0, z_base = 0, y_base = -1, v_base = 0;
    int ys_base = -1, u_base = -1;
    int num_vars = 0;

    int pi_index(int wp, int wr, int ap, int aa) const;
    // Step tuple (s, wp, wa, wr, ap, aa, at); coordinate c of z.
    int z_index(int s, int wp, int wa, int wr, int ap, int aa, int at, int c) const;
    int tuple_index(int s, int wp, int wa, int wr, int ap, int aa, int at) const;
    int y_index(int aa, int wa, int wr) const;
    int v_index(int c) const;
    int ys_index(int aa, int wa, int wr) const;
    int u_index(int wa) const;

    int tuple_count() const;
};

// One-step constraint system for membership of v in the value set at (h, o).
struct ConstraintSystem {
    LinearProgram lp;
    SystemLayout layout;
    int h = 1;
    StateActionKey o;
    // Non-vacuous (wa, wr) report pairs (positive marginal on wa).
    std::vector<std::pair<int, int>> report_pairs;
};

using PolytopeMap =
    std::unordered_map<StateActionKey, ValuePolytope, StateActionKeyHash>;

struct ValueSetOptions {
    double epsilon = 0.1;
    LpOptions lp;
    // Slack allowed when re-verifying hull vertices against the system.
    double vertex_check_tol = 1e-6;
};

// Builds the LP whose feasible v-projections form the value set at (h, o).
// `next` holds the step-(h+1) polytopes.  With dimension = 2 the system
// carries truthfulness and obedience rows; with dimension = 3 those rows are
// dropped and the third coordinate tracks the agent's best deviation value
// instead, to be capped once at the root.
ConstraintSystem assemble_constraints(const GameModel& model, int h,
                                      const StateActionKey& o,
                                      const PolytopeMap& next, int dimension = 2);

// Sweeps principal-value slices at spacing eps / H and collects the agent
// extremes per slice together with the four global extreme points.  Returns
// the slice points; empty means the system is infeasible.
std::vector<std::vector<double>> slice_polytope(const ConstraintSystem& system,
                                                double epsilon,
                                                const LpOptions& opts = {});

// Same for the 3-dimensional variant: per grid column over the first two
// coordinates, the third-coordinate extremes, plus global extremes.
std::vector<std::vector<double>> grid_polytope_3d(const ConstraintSystem& system,
                                                  double epsilon,
                                                  const LpOptions& opts = {});

struct SolveResult {
    // by_step[h] maps o to the approximated value set entering step h, for h
    // in [1, H]; index 0 is unused and h = 1 holds only the root entry.
    std::vector<PolytopeMap> by_step;
    double root_vp = 0.0;
    double root_va = 0.0;
    // The full root vector a forward pass should realize; two entries for the
    // plain system, three for the slack-IC variant.
    std::vector<double> root_target;
    double epsilon = 0.1;

    const ValuePolytope& at(int h, const StateActionKey& o) const;
};

// Backward pass over the non-root steps: zero-point base sets at H, then
// approximated sets for h = H-1 .. 2, all in the requested dimension.
// Fills by_step[2 .. H]; by_step must already have H + 1 entries.
void build_interior_sets(const GameModel& model, int dimension, double epsilon,
                         const LpOptions& opts, double vertex_tol,
                         std::vector<PolytopeMap>& by_step);

// Full backward pass: base sets at H, sliced sets for h = H-1 .. 2, root set
// and the exact (un-sliced) root optimum at h = 1.
SolveResult build_value_polytopes(const GameModel& model,
                                  const ValueSetOptions& options = {});

// Root optimum only: max principal value, ties broken toward the agent.
std::pair<double, double> max_principal_value(const GameModel& model,
                                              const ValueSetOptions& options = {});

}  // namespace spag
