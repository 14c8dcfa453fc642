#include "jvcqma/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "jvcqma/errors.hpp"

namespace jvcqma::lp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-11;

void validate(const BoundedProblem& p) {
  const auto k = p.A.rows();
  const auto n = p.A.cols();
  if (p.b.size() != k || p.c.size() != n || p.lower.size() != n || p.upper.size() != n ||
      p.start.size() != n || static_cast<Eigen::Index>(p.basis.size()) != k) {
    throw ShapeError("bounded LP: inconsistent dimensions");
  }
  for (int j : p.basis) {
    if (j < 0 || j >= n) throw InvalidArgument("bounded LP: basis index out of range");
  }
}

}  // namespace

Solution solve_bounded(const BoundedProblem& p, double opt_tol) {
  validate(p);
  const Eigen::Index k = p.A.rows();
  const Eigen::Index n = p.A.cols();

  Eigen::VectorXd z = p.start;
  std::vector<int> basis = p.basis;
  std::vector<int> position(static_cast<std::size_t>(n), -1);
  for (Eigen::Index r = 0; r < k; ++r) position[basis[r]] = static_cast<int>(r);

  const double scale = std::max(1.0, p.c.cwiseAbs().maxCoeff());
  const double dtol = opt_tol * scale;
  const double ftol = 1e-12 * std::max(1.0, p.start.cwiseAbs().maxCoeff());

  Eigen::MatrixXd B(k, k);
  Eigen::MatrixXd Binv(k, k);
  Eigen::VectorXd pi(k);
  Eigen::VectorXd reduced(n);

  auto refactor = [&] {
    for (Eigen::Index r = 0; r < k; ++r) B.col(r) = p.A.col(basis[r]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv = lu.inverse();
    if (!Binv.allFinite()) throw InternalError("bounded LP: singular basis");
    // Recompute basic values from the nonbasic ones to stop drift.
    Eigen::VectorXd rhs = p.b;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (position[j] < 0 && z[j] != 0.0) rhs.noalias() -= p.A.col(j) * z[j];
    }
    Eigen::VectorXd zb = Binv * rhs;
    Eigen::VectorXd cb(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      z[basis[r]] = zb[r];
      cb[r] = p.c[basis[r]];
    }
    pi.noalias() = Binv.transpose() * cb;
    reduced = p.c;
    reduced.noalias() -= p.A.transpose() * pi;
    for (Eigen::Index r = 0; r < k; ++r) reduced[basis[r]] = 0.0;
  };

  // Direction in which nonbasic j can improve the objective, or 0.
  auto improving = [&](Eigen::Index j) -> int {
    const double d = reduced[j];
    if (d > dtol && z[j] < p.upper[j] - ftol) return 1;
    if (d < -dtol && z[j] > p.lower[j] + ftol) return -1;
    return 0;
  };

  const long max_iter = 50L * (n + k) + 1000;
  int iterations = 0;
  refactor();
  Eigen::Index scan = 0;
  Eigen::VectorXd alpha(k);

  while (true) {
    Eigen::Index entering = -1;
    int dir = 0;
    for (Eigen::Index j = scan; j < n; ++j) {
      if (position[j] >= 0) continue;
      dir = improving(j);
      if (dir != 0) {
        entering = j;
        break;
      }
    }
    if (entering < 0) break;
    if (++iterations > max_iter) throw InternalError("bounded LP: iteration limit reached");

    alpha.noalias() = Binv * p.A.col(entering);
    // Basic values move by -dir * alpha per unit step.
    double step = dir > 0 ? p.upper[entering] - z[entering] : z[entering] - p.lower[entering];
    Eigen::Index leave_var = entering;
    Eigen::Index leave_pos = -1;
    double leave_bound = 0.0;
    for (Eigen::Index r = 0; r < k; ++r) {
      const double delta = -dir * alpha[r];
      const int v = basis[r];
      double limit;
      double bound;
      if (delta > kPivotTol) {
        if (p.upper[v] == kInf) continue;
        bound = p.upper[v];
        limit = std::max(0.0, (bound - z[v]) / delta);
      } else if (delta < -kPivotTol) {
        if (p.lower[v] == -kInf) continue;
        bound = p.lower[v];
        limit = std::max(0.0, (bound - z[v]) / delta);
      } else {
        continue;
      }
      if (limit < step || (limit == step && v < leave_var)) {
        step = limit;
        leave_var = v;
        leave_pos = r;
        leave_bound = bound;
      }
    }
    if (step == kInf) throw InternalError("bounded LP: problem is unbounded");

    z[entering] += dir * step;
    for (Eigen::Index r = 0; r < k; ++r) z[basis[r]] -= dir * step * alpha[r];

    if (leave_pos < 0) {
      // Bound flip: the basis and the multipliers are unchanged.
      z[entering] = dir > 0 ? p.upper[entering] : p.lower[entering];
      scan = entering + 1;
      continue;
    }
    z[leave_var] = leave_bound;
    position[leave_var] = -1;
    basis[leave_pos] = static_cast<int>(entering);
    position[entering] = static_cast<int>(leave_pos);
    refactor();
    scan = 0;
  }

  Solution out;
  out.iterations = iterations;
  out.multipliers = pi;
  out.basis = basis;
  out.z = z;
  out.objective = p.c.dot(z);
  for (Eigen::Index j = 0; j < n && !out.degenerate; ++j) {
    if (position[j] < 0) {
      if (std::fabs(reduced[j]) <= dtol) out.degenerate = true;
    } else if (std::fabs(z[j] - p.lower[j]) <= ftol || std::fabs(z[j] - p.upper[j]) <= ftol) {
      out.degenerate = true;
    }
  }
  return out;
}

std::optional<Solution> solve_box_dual(const BoundedProblem& p, double opt_tol) {
  const Eigen::Index k = p.A.rows();
  const Eigen::Index n = p.A.cols();
  if (p.b.size() != k || p.c.size() != n || p.lower.size() != n || p.upper.size() != n ||
      static_cast<Eigen::Index>(p.basis.size()) != k) {
    throw ShapeError("bounded LP: inconsistent dimensions");
  }
  if (!p.lower.allFinite() || !p.upper.allFinite()) {
    throw InvalidArgument("box dual simplex needs finite bounds");
  }
  std::vector<int> basis = p.basis;
  std::vector<int> position(static_cast<std::size_t>(n), -1);
  for (Eigen::Index r = 0; r < k; ++r) {
    if (basis[r] < 0 || basis[r] >= n) throw InvalidArgument("bounded LP: basis index out of range");
    position[basis[r]] = static_cast<int>(r);
  }

  const double dtol = opt_tol * std::max(1.0, p.c.cwiseAbs().maxCoeff());
  const double ftol =
      1e-12 * std::max({1.0, p.lower.cwiseAbs().maxCoeff(), p.upper.cwiseAbs().maxCoeff()});

  // at_upper[j] for nonbasic j; refreshed from the reduced-cost signs.
  std::vector<char> at_upper(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd z(n);
  Eigen::MatrixXd B(k, k);
  Eigen::MatrixXd Binv(k, k);
  Eigen::VectorXd pi(k);
  Eigen::VectorXd reduced(n);
  Eigen::VectorXd cb(k);
  Eigen::VectorXd alpha(n);

  const long max_iter = 10L * (n + k) + 100;
  for (long iter = 0;; ++iter) {
    for (Eigen::Index r = 0; r < k; ++r) {
      B.col(r) = p.A.col(basis[r]);
      cb[r] = p.c[basis[r]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv = lu.inverse();
    if (!Binv.allFinite()) return std::nullopt;
    pi.noalias() = Binv.transpose() * cb;
    reduced = p.c;
    reduced.noalias() -= p.A.transpose() * pi;

    Eigen::VectorXd rhs = p.b;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (position[j] >= 0) continue;
      if (reduced[j] > dtol) {
        at_upper[j] = 1;
      } else if (reduced[j] < -dtol) {
        at_upper[j] = 0;
      }
      z[j] = at_upper[j] ? p.upper[j] : p.lower[j];
      if (z[j] != 0.0) rhs.noalias() -= p.A.col(j) * z[j];
    }
    const Eigen::VectorXd zb = Binv * rhs;

    Eigen::Index leave = -1;
    double worst = ftol;
    bool above = false;
    for (Eigen::Index r = 0; r < k; ++r) {
      const int v = basis[r];
      z[v] = zb[r];
      const double over = zb[r] - p.upper[v];
      const double under = p.lower[v] - zb[r];
      if (over > worst || (over == worst && leave >= 0 && v < basis[leave])) {
        worst = over;
        leave = r;
        above = true;
      }
      if (under > worst || (under == worst && leave >= 0 && v < basis[leave])) {
        worst = under;
        leave = r;
        above = false;
      }
    }

    if (leave < 0) {
      Solution out;
      out.iterations = static_cast<int>(iter);
      out.multipliers = pi;
      out.basis = basis;
      out.z = z;
      out.objective = p.c.dot(z);
      for (Eigen::Index j = 0; j < n && !out.degenerate; ++j) {
        if (position[j] < 0) {
          if (std::fabs(reduced[j]) <= dtol) out.degenerate = true;
        } else if (std::fabs(z[j] - p.lower[j]) <= ftol || std::fabs(z[j] - p.upper[j]) <= ftol) {
          out.degenerate = true;
        }
      }
      return out;
    }
    if (iter >= max_iter) return std::nullopt;

    alpha.noalias() = p.A.transpose() * Binv.row(leave).transpose();
    double alpha_scale = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (position[j] < 0) alpha_scale = std::max(alpha_scale, std::fabs(alpha[j]));
    }
    const double atol = kPivotTol * std::max(1.0, alpha_scale);
    struct Candidate {
      double ratio;
      Eigen::Index j;
    };
    std::vector<Candidate> candidates;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (position[j] >= 0) continue;
      const double a = alpha[j];
      if (std::fabs(a) <= atol) continue;
      // Moving j off its bound must push the leaving variable back towards
      // the violated bound.
      const bool increases = !at_upper[j];
      const bool lowers_leaving = increases ? a > 0.0 : a < 0.0;
      if (lowers_leaving != above) continue;
      candidates.push_back({std::fabs(reduced[j]) / std::fabs(a), j});
    }
    if (candidates.empty()) return std::nullopt;
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return a.ratio < b.ratio || (a.ratio == b.ratio && a.j < b.j);
    });
    // Long-step ratio test: pass breakpoints (their variables flip to the
    // other bound on the next refresh) while the dual slope stays positive.
    Eigen::Index entering = -1;
    double slope = worst;
    for (const auto& cand : candidates) {
      entering = cand.j;
      slope -= std::fabs(alpha[cand.j]) * (p.upper[cand.j] - p.lower[cand.j]);
      if (slope <= 0.0) break;
    }
    if (entering < 0) return std::nullopt;

    const int leaving_var = basis[leave];
    at_upper[leaving_var] = above ? 1 : 0;
    position[leaving_var] = -1;
    basis[leave] = static_cast<int>(entering);
    position[entering] = static_cast<int>(leave);
  }
}

}  // namespace jvcqma::lp
