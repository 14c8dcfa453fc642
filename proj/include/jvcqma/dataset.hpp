#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace jvcqma {

/// Responses plus a covariate matrix whose columns are split into continuous
/// (candidate index) and discrete columns. Column ids index `x` directly.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<int> continuous_cols;
  std::vector<int> discrete_cols;
  std::vector<std::string> column_names;
  std::string response_name = "y";

  Eigen::Index rows() const noexcept { return y.size(); }
  /// p + q.
  Eigen::Index dims() const noexcept { return x.cols(); }
  Eigen::Index num_candidates() const noexcept {
    return static_cast<Eigen::Index>(continuous_cols.size());
  }

  /// Shapes, finiteness and that the column roles partition the covariates.
  void validate() const;
  /// validate() plus n > 2(p + q), the row budget for a local-linear fit.
  void require_fittable() const;

  bool is_continuous(int col) const;

  Dataset select_rows(std::span<const Eigen::Index> rows) const;
  Dataset without_row(Eigen::Index row) const;
};

/// Dataset with every covariate continuous and default names y, x1..xd.
Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd x);

}  // namespace jvcqma
