#include "jvcqma/dataset.hpp"

#include <algorithm>
#include <string>

#include "jvcqma/errors.hpp"

namespace jvcqma {

void Dataset::validate() const {
  if (x.rows() != y.size()) throw ShapeError("dataset: response and covariate row counts differ");
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != x.cols()) {
    throw ShapeError("dataset: column name count does not match covariates");
  }
  if (!y.allFinite() || !x.allFinite()) throw DataError("dataset contains non-finite values");
  std::vector<int> seen(static_cast<std::size_t>(x.cols()), 0);
  auto mark = [&](const std::vector<int>& cols) {
    for (int c : cols) {
      if (c < 0 || c >= x.cols()) throw ShapeError("dataset: column id out of range");
      ++seen[c];
    }
  };
  mark(continuous_cols);
  mark(discrete_cols);
  if (std::any_of(seen.begin(), seen.end(), [](int v) { return v != 1; })) {
    throw InvalidArgument("dataset: continuous and discrete columns must partition the covariates");
  }
}

void Dataset::require_fittable() const {
  validate();
  if (continuous_cols.empty()) throw EmptyCandidateSet("dataset has no continuous columns");
  if (rows() <= 2 * dims()) {
    throw InvalidArgument("dataset has " + std::to_string(rows()) + " rows; local-linear fits over " +
                          std::to_string(dims()) + " covariates need more than " +
                          std::to_string(2 * dims()));
  }
}

bool Dataset::is_continuous(int col) const {
  return std::find(continuous_cols.begin(), continuous_cols.end(), col) != continuous_cols.end();
}

Dataset Dataset::select_rows(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = rows[r];
    if (src < 0 || src >= y.size()) throw ShapeError("dataset: row id out of range");
    out.y[static_cast<Eigen::Index>(r)] = y[src];
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
  }
  out.continuous_cols = continuous_cols;
  out.discrete_cols = discrete_cols;
  out.column_names = column_names;
  out.response_name = response_name;
  return out;
}

Dataset Dataset::without_row(Eigen::Index row) const {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(rows()));
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (i != row) keep.push_back(i);
  }
  return select_rows(keep);
}

Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd x) {
  Dataset d;
  d.y = std::move(y);
  d.x = std::move(x);
  for (Eigen::Index c = 0; c < d.x.cols(); ++c) {
    d.continuous_cols.push_back(static_cast<int>(c));
    d.column_names.push_back("x" + std::to_string(c + 1));
  }
  d.validate();
  return d;
}

}  // namespace jvcqma
