#ifndef SPAG_LP_HPP
#define SPAG_LP_HPP

#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace spag {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class LpStatus { Optimal, Infeasible, Unbounded };
enum class Sense { Minimize, Maximize };
enum class RowType { LE, GE, EQ };

// Sparse-row linear program over box-bounded variables.
struct LinearProgram {
  struct Row {
    RowType type = RowType::LE;
    double rhs = 0.0;
    std::vector<std::pair<int, double>> coeffs;  // (var, coefficient)
  };

  Sense sense = Sense::Maximize;
  std::vector<double> objective;
  std::vector<double> lower, upper;
  std::vector<std::string> var_names;
  std::vector<Row> rows;

  int num_vars() const { return static_cast<int>(objective.size()); }
  int add_var(double lo, double up, double obj = 0.0, std::string name = "");
  void add_row(RowType type, double rhs, std::vector<std::pair<int, double>> coeffs);

  // CPLEX LP text format, for debugging.
  void write_lp_format(std::ostream& os) const;
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;    // original variable space, empty unless Optimal
  std::vector<double> ray;  // improving direction, set when Unbounded
  double max_violation = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feas_tol = 1e-8;
  double obj_tol = 1e-7;
  int max_iters = 0;  // 0 picks a size-based cap
};

// Reusable solver.  Presolve runs once at construction; variables listed in
// mutable_vars keep their identity so their bounds and objective weight can
// be changed between solves, and re-solves warm-start from the last basis.
class LpSolver {
 public:
  explicit LpSolver(LinearProgram program, LpOptions opts = {},
                    std::vector<int> mutable_vars = {});
  ~LpSolver();
  LpSolver(LpSolver&&) noexcept;
  LpSolver& operator=(LpSolver&&) noexcept;

  void set_objective(const std::vector<double>& obj, Sense sense);
  void set_var_bounds(int var, double lo, double up);  // var must be mutable
  LpResult solve();

  const LinearProgram& program() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot solve; the result is re-verified against the rows before return.
LpResult lp_solve(const LinearProgram& p, const LpOptions& opts = {});

// Feasibility probe; fills *witness with a feasible point when one exists.
bool lp_feasible(const LinearProgram& p, std::vector<double>* witness = nullptr,
                 const LpOptions& opts = {});

// Largest constraint or bound violation of x, for external re-checks.
double lp_violation(const LinearProgram& p, const std::vector<double>& x);

}  // namespace spag

#endif  // SPAG_LP_HPP
