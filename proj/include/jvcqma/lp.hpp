#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace jvcqma::lp {

/// maximize c'z  subject to  A z = b,  lower <= z <= upper.
///
/// Bounds may be infinite. `start` must be feasible and `basis` must name k
/// columns of A (k = rows of A) forming a nonsingular matrix. Nonbasic
/// variables of `start` may sit strictly inside their bounds; the solver moves
/// them to a bound or into the basis before it declares optimality.
struct BoundedProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd start;
  std::vector<int> basis;
};

struct Solution {
  Eigen::VectorXd z;
  /// Simplex multipliers pi with B' pi = c_B; the solution of the dual program.
  Eigen::VectorXd multipliers;
  /// Final basic columns, in basis order.
  std::vector<int> basis;
  double objective = 0.0;
  int iterations = 0;
  /// A basic variable sits on a bound or a nonbasic one has zero reduced cost.
  bool degenerate = false;
};

/// Dense primal simplex for bounded variables with Bland's smallest-index
/// rule for both the entering and the leaving variable, so it terminates on
/// degenerate problems. `opt_tol` is the reduced-cost threshold, relative to
/// max(1, |c|_inf).
Solution solve_bounded(const BoundedProblem& problem, double opt_tol = 1e-12);

/// Dual simplex for problems whose bounds are all finite. Every nonbasic
/// variable starts at the bound its reduced cost favours, and infeasible basic
/// variables are removed by largest violation. `start` is ignored. Returns
/// nullopt if the iteration budget runs out, so callers can fall back to
/// solve_bounded.
std::optional<Solution> solve_box_dual(const BoundedProblem& problem, double opt_tol = 1e-12);

}  // namespace jvcqma::lp
