#include "jvcqma/qr_core.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jvcqma/errors.hpp"
#include "jvcqma/lp.hpp"

namespace jvcqma {
namespace {

std::string gap_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRankTol = 1e-10;

struct PivotSelection {
  std::vector<int> columns;  // independent design columns, ascending
  std::vector<int> rows;     // one pivot row per selected column
};

// Gaussian elimination with row pivoting: picks a maximal set of independent
// columns (in column order) and a nonsingular row subset for them.
PivotSelection select_pivots(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd work = x;
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  PivotSelection sel;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double col_scale = x.col(c).cwiseAbs().maxCoeff();
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (used[r]) continue;
      const double a = std::fabs(work(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (best < 0 || best_abs <= kRankTol * std::max(col_scale, 1e-300) || col_scale == 0.0) {
      continue;
    }
    used[best] = 1;
    sel.columns.push_back(static_cast<int>(c));
    sel.rows.push_back(static_cast<int>(best));
    if (c + 1 == d) break;
    const auto tail = d - c - 1;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (used[r] || work(r, c) == 0.0) continue;
      const double f = work(r, c) / work(best, c);
      work.row(r).tail(tail) -= f * work.row(best).tail(tail);
    }
  }
  return sel;
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite entries");
}

}  // namespace

double weighted_qr_objective(const WeightedQrProblem& problem,
                             const Eigen::Ref<const Eigen::VectorXd>& coefficients) {
  const Eigen::VectorXd r = problem.responses - problem.design * coefficients;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    total += problem.obs_weights[i] * check_loss(problem.tau, r[i]);
  }
  return total;
}

QrSolution solve_weighted_qr(const WeightedQrProblem& problem, double tol) {
  const Eigen::Index m = problem.responses.size();
  const Eigen::Index d = problem.design.cols();
  if (!(tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  if (m < 1 || d < 1) throw ShapeError("weighted QR needs at least one row and one column");
  if (problem.design.rows() != m || problem.obs_weights.size() != m) {
    throw ShapeError("weighted QR: responses, design and weights disagree in length");
  }
  require_finite(problem.responses, "responses");
  require_finite(problem.design, "design");
  require_finite(problem.obs_weights, "observation weights");
  if ((problem.obs_weights.array() < 0.0).any()) {
    throw InvalidArgument("observation weights must be nonnegative");
  }

  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    if (problem.obs_weights[i] >= kMinObservationWeight) kept.push_back(i);
  }
  const auto mk = static_cast<Eigen::Index>(kept.size());
  if (mk < d) {
    throw UnderdeterminedLocalFit("only " + std::to_string(mk) +
                                  " positively weighted observations for " + std::to_string(d) +
                                  " coefficients");
  }

  Eigen::MatrixXd xk(mk, d);
  Eigen::VectorXd yk(mk);
  Eigen::VectorXd wk(mk);
  for (Eigen::Index r = 0; r < mk; ++r) {
    xk.row(r) = problem.design.row(kept[r]);
    yk[r] = problem.responses[kept[r]];
    wk[r] = problem.obs_weights[kept[r]];
  }

  const PivotSelection sel = select_pivots(xk);
  const auto k = static_cast<Eigen::Index>(sel.columns.size());
  QrSolution out;
  out.coefficients = Eigen::VectorXd::Zero(d);
  if (k == 0) {
    // Every column vanishes on the kept rows; beta = 0 is the only fit.
    out.objective = weighted_qr_objective(problem, out.coefficients);
    out.status = SolveStatus::Degenerate;
    return out;
  }

  const double t = problem.tau.value();
  lp::BoundedProblem lp;
  lp.A.resize(k, mk);
  for (Eigen::Index c = 0; c < k; ++c) lp.A.row(c) = xk.col(sel.columns[c]).transpose();
  lp.b = Eigen::VectorXd::Zero(k);
  lp.c = yk;
  lp.lower = wk * (t - 1.0);
  lp.upper = wk * t;
  lp.start = Eigen::VectorXd::Zero(mk);
  lp.basis = sel.rows;

  std::optional<lp::Solution> fast = lp::solve_box_dual(lp);
  const lp::Solution sol = fast ? std::move(*fast) : lp::solve_bounded(lp);
  for (Eigen::Index c = 0; c < k; ++c) out.coefficients[sel.columns[c]] = sol.multipliers[c];

  auto kept_loss = [&](const Eigen::VectorXd& beta) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < mk; ++r) sum += wk[r] * check_loss(problem.tau, yk[r] - xk.row(r).dot(beta));
    return sum;
  };
  double primal = kept_loss(out.coefficients);

  // The multipliers come from an updated basis inverse. When the basis is ill
  // conditioned (extrapolating windows) the basic residuals drift off zero, so
  // refine against a fresh factorization and keep each step only if it helps.
  Eigen::MatrixXd xb(k, k);
  Eigen::VectorXd yb(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) xb(r, c) = xk(sol.basis[r], sel.columns[c]);
    yb[r] = yk[sol.basis[r]];
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(xb);
  for (int step = 0; step < 2 && lu.isInvertible(); ++step) {
    Eigen::VectorXd basic(k);
    for (Eigen::Index c = 0; c < k; ++c) basic[c] = out.coefficients[sel.columns[c]];
    basic += lu.solve(yb - xb * basic);
    Eigen::VectorXd trial = out.coefficients;
    for (Eigen::Index c = 0; c < k; ++c) trial[sel.columns[c]] = basic[c];
    const double loss = kept_loss(trial);
    if (!(loss < primal)) break;
    out.coefficients = std::move(trial);
    primal = loss;
  }
  // KKT certificate: the dual point must satisfy X'z = 0 up to rounding, and
  // the complementarity gap is measured against z'(y - X beta) rather than y'z.
  // With large coefficients, y'z alone carries beta'X'z of rounding noise.
  const double dual_residual = (lp.A * sol.z).cwiseAbs().maxCoeff();
  const double dual_scale = std::max(1.0, wk.sum() * xk.cwiseAbs().maxCoeff());
  if (dual_residual > tol * dual_scale) {
    throw InternalError("weighted QR: dual residual " + gap_text(dual_residual) + " exceeds tolerance");
  }
  out.duality_gap = primal - sol.z.dot(yk - xk * out.coefficients);
  if (std::fabs(out.duality_gap) > tol * std::max(1.0, std::fabs(primal))) {
    throw InternalError("weighted QR: duality gap " + gap_text(out.duality_gap) + " at objective " +
                        gap_text(primal) + " exceeds tolerance");
  }
  out.objective = weighted_qr_objective(problem, out.coefficients);
  out.status = (sol.degenerate || k < d) ? SolveStatus::Degenerate : SolveStatus::Optimal;
  return out;
}

WeightVector::WeightVector(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw EmptyCandidateSet("weight vector has no components");
  if (!weights_.allFinite()) throw InvalidArgument("weight vector has non-finite components");
  if ((weights_.array() < -1e-10).any()) throw InvalidArgument("weights must be nonnegative");
  if (std::fabs(weights_.sum() - 1.0) > 1e-10) throw InvalidArgument("weights must sum to one");
}

WeightVector WeightVector::vertex(Eigen::Index p, Eigen::Index s) {
  if (s < 0 || s >= p) throw InvalidArgument("simplex vertex index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  w[s] = 1.0;
  return WeightVector(std::move(w));
}

WeightVector WeightVector::uniform(Eigen::Index p) {
  if (p < 1) throw EmptyCandidateSet("equal weights need at least one candidate");
  return WeightVector(Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p)));
}

double evaluate_combination_loss(const SimplexWeightProblem& problem, const WeightVector& w) {
  const auto& m = problem.prediction_matrix;
  if (m.cols() != w.size() || m.rows() != problem.responses.size()) {
    throw ShapeError("combination loss: prediction matrix does not match weights or responses");
  }
  const Eigen::Index n = m.rows();
  if (n == 0) throw ShapeError("combination loss: no observations");
  const Eigen::VectorXd fitted = m * w.values();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += check_loss(problem.tau, problem.responses[i] - fitted[i]);
  }
  return total / static_cast<double>(n);
}

WeightVector solve_simplex_weights(const SimplexWeightProblem& problem, double tol) {
  const auto& m = problem.prediction_matrix;
  const Eigen::Index n = m.rows();
  const Eigen::Index p = m.cols();
  if (p == 0) throw EmptyCandidateSet("no candidate models to combine");
  if (!(tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  if (n != problem.responses.size() || n == 0) {
    throw ShapeError("simplex weights: prediction matrix rows do not match responses");
  }
  require_finite(problem.responses, "responses");
  require_finite(m, "prediction matrix");
  if (p == 1) return WeightVector::vertex(1, 0);

  const double t = problem.tau.value();
  const double inv_n = 1.0 / static_cast<double>(n);
  // Variables: a (n), lambda (1), slack s (p).
  const Eigen::Index nv = n + 1 + p;
  lp::BoundedProblem lp;
  lp.A.resize(p, nv);
  lp.A.leftCols(n) = m.transpose();
  lp.A.col(n).setOnes();
  lp.A.rightCols(p).setIdentity();
  lp.b = Eigen::VectorXd::Zero(p);
  lp.c = Eigen::VectorXd::Zero(nv);
  lp.c.head(n) = problem.responses;
  lp.c[n] = 1.0;
  lp.lower.resize(nv);
  lp.upper.resize(nv);
  lp.lower.head(n).setConstant((t - 1.0) * inv_n);
  lp.upper.head(n).setConstant(t * inv_n);
  lp.lower[n] = -kInf;
  lp.upper[n] = kInf;
  lp.lower.tail(p).setZero();
  lp.upper.tail(p).setConstant(kInf);
  lp.start = Eigen::VectorXd::Zero(nv);
  lp.basis.resize(static_cast<std::size_t>(p));
  for (Eigen::Index s = 0; s < p; ++s) lp.basis[s] = static_cast<int>(n + 1 + s);

  const lp::Solution sol = lp::solve_bounded(lp);
  Eigen::VectorXd w = sol.multipliers.cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw InternalError("simplex weights: multipliers vanished");
  w /= total;
  WeightVector out(std::move(w));

  const double primal = evaluate_combination_loss(problem, out);
  const double gap = primal - sol.objective;
  if (std::fabs(gap) > tol * std::max(1.0, std::fabs(primal))) {
    throw InternalError("simplex weights: duality gap " + gap_text(gap) + " at objective " +
                        gap_text(primal) + " exceeds tolerance");
  }
  return out;
}

}  // namespace jvcqma
