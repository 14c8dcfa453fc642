#include "jvcqma/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "jvcqma/errors.hpp"
#include "jvcqma/parallel.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/vcm.hpp"

namespace jvcqma {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinRcond = 1e-13;
constexpr double kRankTol = 1e-10;
constexpr int kDefaultGridSize = 20;

}  // namespace

std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1 || !std::isfinite(hi)) {
    throw InvalidBandwidth("bandwidth grid needs 0 < lo <= hi and at least one point");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
  grid.back() = hi;
  return grid;
}

std::vector<double> default_grid(const Dataset& data, int index_col) {
  const auto col = data.x.col(index_col);
  const Eigen::Index n = col.size();
  if (n < 2) throw DataError("default bandwidth grid needs at least two rows");
  const double mean = col.mean();
  const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0)) {
    throw DataError("column " + std::to_string(index_col) + " is constant; no bandwidth grid");
  }
  const double base = sd * std::pow(static_cast<double>(n), -0.2);
  return geometric_grid(0.1 * base, 3.0 * base, kDefaultGridSize);
}

double least_squares_cv_score(const Dataset& data, int index_col, double h, KernelKind kind) {
  if (!(h > 0.0)) throw InvalidBandwidth("pilot bandwidth must be positive");
  const std::vector<int> rest = non_index_columns(data, index_col);
  const auto r = static_cast<Eigen::Index>(rest.size());
  const Eigen::Index n = data.rows();
  const Eigen::Index d = 2 * data.dims();
  const auto index = data.x.col(index_col);

  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd w(n);
  double score = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x0 = index[i];
    // Same row selection and bandwidth escalation as the local quantile fit.
    double bandwidth = h;
    for (int attempt = 0; attempt <= kMaxEscalations; ++attempt) {
      kept.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double wj = kernel_scaled(kind, bandwidth, index[j] - x0);
        if (wj >= kMinObservationWeight) {
          w[static_cast<Eigen::Index>(kept.size())] = wj;
          kept.push_back(j);
        }
      }
      if (static_cast<Eigen::Index>(kept.size()) >= d) break;
      if (attempt == kMaxEscalations) return kInf;
      bandwidth *= kEscalationFactor;
    }
    const auto m = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd z(m, d);
    Eigen::VectorXd yk(m);
    for (Eigen::Index t = 0; t < m; ++t) {
      const Eigen::Index j = kept[static_cast<std::size_t>(t)];
      const double u = index[j] - x0;
      z(t, 0) = 1.0;
      z(t, r + 1) = u;
      for (Eigen::Index k = 0; k < r; ++k) {
        const double v = data.x(j, rest[static_cast<std::size_t>(k)]);
        z(t, 1 + k) = v;
        z(t, r + 2 + k) = v * u;
      }
      yk[t] = data.y[j];
    }
    const Eigen::MatrixXd wz = z.array().colwise() * w.head(m).array();
    const Eigen::MatrixXd gram = wz.transpose() * z;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    Eigen::VectorXd coef;
    if (llt.info() == Eigen::Success && llt.rcond() > kMinRcond) {
      coef = llt.solve(wz.transpose() * yk);
    } else {
      // Locally dependent columns (e.g. a discrete covariate constant in the
      // window) get zero coefficients, as in the quantile fit.
      const Eigen::VectorXd sw = w.head(m).cwiseSqrt();
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z.array().colwise() * sw.array());
      qr.setThreshold(kRankTol);
      if (qr.rank() == 0) return kInf;
      coef = qr.solve(yk.cwiseProduct(sw));
    }
    double fitted = coef[0];
    for (Eigen::Index k = 0; k < r; ++k) fitted += data.x(i, rest[static_cast<std::size_t>(k)]) * coef[1 + k];
    if (!std::isfinite(fitted)) return kInf;
    const double resid = data.y[i] - fitted;
    score += resid * resid;
  }
  return std::isfinite(score) ? score : kInf;
}

double pilot_bandwidth(const Dataset& data, int index_col, std::span<const double> grid,
                       KernelKind kind, int threads) {
  data.validate();
  if (!data.is_continuous(index_col)) {
    throw InvalidArgument("pilot bandwidth: column " + std::to_string(index_col) +
                          " is not continuous");
  }
  if (grid.empty()) throw InvalidBandwidth("bandwidth grid is empty");
  for (double h : grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidBandwidth("bandwidth grid values must be positive");
  }
  std::vector<double> scores(grid.size(), kInf);
  parallel_for(grid.size(), threads, [&](std::size_t g) {
    scores[g] = least_squares_cv_score(data, index_col, grid[g], kind);
  });
  const double best = *std::min_element(scores.begin(), scores.end());
  if (!std::isfinite(best)) {
    throw InvalidBandwidth("every grid bandwidth gives singular local normal equations on column " +
                           std::to_string(index_col));
  }
  const double tss = (data.y.array() - data.y.mean()).square().sum();
  const double tie = 1e-10 * tss;
  double chosen = kInf;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (scores[g] <= best + tie) chosen = std::min(chosen, grid[g]);
  }
  return chosen;
}

PilotBandwidths select_pilots(const Dataset& data, std::span<const double> grid, KernelKind kind,
                              int threads) {
  data.validate();
  if (data.continuous_cols.empty()) throw EmptyCandidateSet("dataset has no continuous columns");
  PilotBandwidths out;
  out.index_cols = data.continuous_cols;
  for (int s : data.continuous_cols) {
    std::vector<double> g = grid.empty() ? default_grid(data, s)
                                         : std::vector<double>(grid.begin(), grid.end());
    out.pilot.push_back(pilot_bandwidth(data, s, g, kind, threads));
    out.grids.push_back(std::move(g));
  }
  return out;
}

BandwidthPlan adjust_for_quantile(const PilotBandwidths& pilots, QuantileLevel tau) {
  BandwidthPlan plan;
  plan.index_cols = pilots.index_cols;
  plan.pilot = pilots.pilot;
  plan.grids = pilots.grids;
  plan.tau = tau;
  const double factor = quantile_adjust_factor(tau);
  for (double h : pilots.pilot) plan.adjusted.push_back(h * factor);
  return plan;
}

BandwidthPlan plan_bandwidths(const Dataset& data, QuantileLevel tau, std::span<const double> grid,
                              KernelKind kind, int threads) {
  return adjust_for_quantile(select_pilots(data, grid, kind, threads), tau);
}

}  // namespace jvcqma
