#pragma once

#include <Eigen/Dense>

#include "jvcqma/core_math.hpp"

namespace jvcqma {

inline constexpr double kDefaultSolverTol = 1e-9;
/// Observations weighted below this are removed before an LP is built.
inline constexpr double kMinObservationWeight = 1e-12;

/// minimize sum_i w_i rho_tau(y_i - x_i' beta).
struct WeightedQrProblem {
  Eigen::VectorXd responses;
  Eigen::MatrixXd design;
  Eigen::VectorXd obs_weights;
  QuantileLevel tau{0.5};
};

enum class SolveStatus { Optimal, Degenerate };

struct QrSolution {
  Eigen::VectorXd coefficients;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  /// Primal objective minus dual objective of the certifying LP pair.
  double duality_gap = 0.0;
};

/// Exact weighted linear quantile regression.
///
/// Solved through the dual program  max y'a  s.t.  X'a = 0,
/// a_i in [w_i (tau - 1), w_i tau],  whose simplex multipliers are the
/// regression coefficients. Columns of the design that are linearly dependent
/// on earlier ones (within the kept rows) get coefficient 0.
///
/// Throws UnderdeterminedLocalFit when fewer than `design.cols()` observations
/// carry weight >= kMinObservationWeight, and InternalError when the duality
/// gap exceeds `tol * max(1, objective)`.
QrSolution solve_weighted_qr(const WeightedQrProblem& problem, double tol = kDefaultSolverTol);

/// Weighted check loss of `coefficients` on `problem`.
double weighted_qr_objective(const WeightedQrProblem& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& coefficients);

struct SimplexWeightProblem {
  Eigen::VectorXd responses;
  /// n x p, column s holds the predictions of candidate s.
  Eigen::MatrixXd prediction_matrix;
  QuantileLevel tau{0.5};
};

/// A point of the probability simplex.
class WeightVector {
 public:
  WeightVector() = default;
  /// Validates nonnegativity and unit sum to 1e-10.
  explicit WeightVector(Eigen::VectorXd weights);

  const Eigen::VectorXd& values() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index i) const { return weights_[i]; }

  static WeightVector vertex(Eigen::Index p, Eigen::Index s);
  static WeightVector uniform(Eigen::Index p);

 private:
  Eigen::VectorXd weights_;
};

/// (1/n) sum_i rho_tau(y_i - M_i w).
double evaluate_combination_loss(const SimplexWeightProblem& problem, const WeightVector& w);

/// Minimizes evaluate_combination_loss over the simplex.
///
/// Dual program: max y'a + lambda  s.t.  M'a + lambda 1 + s = 0,
/// a_i in [(tau - 1)/n, tau/n], s >= 0; the weights are its multipliers.
/// Throws EmptyCandidateSet when M has no columns.
WeightVector solve_simplex_weights(const SimplexWeightProblem& problem,
                                   double tol = kDefaultSolverTol);

}  // namespace jvcqma
