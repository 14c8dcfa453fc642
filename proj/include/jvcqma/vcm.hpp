#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "jvcqma/core_math.hpp"
#include "jvcqma/dataset.hpp"

namespace jvcqma {

/// Local-linear varying-coefficient quantile fit of the candidate indexed by
/// `index_col`, evaluated at `eval_point`.
struct VcLocalFit {
  int index_col = -1;
  double eval_point = 0.0;
  double alpha = 0.0;
  /// Coefficients on the covariates other than the index, in column order.
  Eigen::VectorXd beta;
  double alpha_slope = 0.0;
  Eigen::VectorXd beta_slope;
  /// Bandwidth after escalation.
  double bandwidth = 0.0;
};

/// Bandwidth escalation: grow h by this factor at most kMaxEscalations times
/// while fewer than 2(p + q) observations carry kernel weight.
inline constexpr double kEscalationFactor = 1.5;
inline constexpr int kMaxEscalations = 5;

/// Covariate columns other than `index_col`, in column order.
std::vector<int> non_index_columns(const Dataset& data, int index_col);

/// Throws UnderdeterminedLocalFit when the local problem stays too small after
/// escalation, InvalidBandwidth for h <= 0, InvalidArgument when `index_col`
/// is not a continuous column.
VcLocalFit fit_local(const Dataset& data, int index_col, double eval_point, QuantileLevel tau,
                     double h, KernelKind kind, std::optional<Eigen::Index> exclude = {});

/// alpha + x_rest' beta for one query row.
double predict_from_fit(const VcLocalFit& fit, std::span<const double> query,
                        std::span<const int> rest);

struct CandidatePrediction {
  int index_col = -1;
  /// NaN where the local fit failed.
  Eigen::VectorXd values;
  std::vector<char> failed;

  std::size_t failure_count() const;
};

/// Fits the candidate at each query's own index value. A failed fit flags
/// only its own row.
CandidatePrediction predict_candidate(const Dataset& data, int index_col,
                                      const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                      QuantileLevel tau, double h, KernelKind kind,
                                      int threads = 1);

/// Leave-one-out candidate predictions. Entry (i, j) predicts row i from
/// candidate continuous_cols[j] fit without row i, evaluated at X_{i, s}.
struct LooPredictionMatrix {
  Eigen::MatrixXd matrix;
  std::vector<int> column_index_map;
  QuantileLevel tau{0.5};
  /// Row-major n x p flags of failed entries (matrix holds NaN there).
  std::vector<char> failed;

  Eigen::Index rows() const noexcept { return matrix.rows(); }
  Eigen::Index cols() const noexcept { return matrix.cols(); }
  bool entry_failed(Eigen::Index i, Eigen::Index j) const {
    return failed[static_cast<std::size_t>(i * matrix.cols() + j)] != 0;
  }
  /// Rows without any failed entry.
  std::vector<Eigen::Index> complete_rows() const;
};

/// Largest tolerated share of failed entries in one LOO column.
inline constexpr double kMaxLooFailureShare = 0.05;

/// `bandwidths[j]` belongs to continuous_cols[j]. Throws FailureBudgetExceeded
/// when some column has more than 5% failed entries.
LooPredictionMatrix loo_prediction_matrix(const Dataset& data, QuantileLevel tau,
                                          std::span<const double> bandwidths, KernelKind kind,
                                          int threads = 1);

}  // namespace jvcqma
