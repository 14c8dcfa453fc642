#pragma once

#include <span>
#include <vector>

#include "jvcqma/core_math.hpp"
#include "jvcqma/dataset.hpp"

namespace jvcqma {

/// Pilot least-squares bandwidths and their quantile-adjusted versions, one
/// entry per continuous column (same order as Dataset::continuous_cols).
struct BandwidthPlan {
  std::vector<int> index_cols;
  std::vector<double> pilot;
  std::vector<double> adjusted;
  QuantileLevel tau{0.5};
  /// Candidate pilot bandwidths searched for each index.
  std::vector<std::vector<double>> grids;
};

/// Geometric grid of `count` values on [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, int count);

/// 20 geometric values from 0.1 to 3 times sd(x_s) n^{-1/5}.
std::vector<double> default_grid(const Dataset& data, int index_col);

/// Exact leave-one-out least-squares CV score of the local-linear
/// varying-coefficient mean fit. Each local fit uses the rows and bandwidth
/// escalation of fit_local; columns that are linearly dependent in the window
/// get zero coefficients. Returns +inf when some fit stays underdetermined.
double least_squares_cv_score(const Dataset& data, int index_col, double h, KernelKind kind);

/// Grid minimizer of least_squares_cv_score. Scores within 1e-10 times the
/// response's total sum of squares of the minimum count as ties, resolved
/// towards the smaller bandwidth.
double pilot_bandwidth(const Dataset& data, int index_col, std::span<const double> grid,
                       KernelKind kind, int threads = 1);

/// Pilot bandwidth for every continuous column. An empty `grid` selects
/// default_grid per column.
struct PilotBandwidths {
  std::vector<int> index_cols;
  std::vector<double> pilot;
  std::vector<std::vector<double>> grids;
};
PilotBandwidths select_pilots(const Dataset& data, std::span<const double> grid, KernelKind kind,
                              int threads = 1);

/// Applies quantile_adjust_factor(tau) to pilot bandwidths.
BandwidthPlan adjust_for_quantile(const PilotBandwidths& pilots, QuantileLevel tau);

/// select_pilots followed by adjust_for_quantile.
BandwidthPlan plan_bandwidths(const Dataset& data, QuantileLevel tau, std::span<const double> grid,
                              KernelKind kind, int threads = 1);

}  // namespace jvcqma
