#include "jvcqma/vcm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "jvcqma/errors.hpp"
#include "jvcqma/parallel.hpp"
#include "jvcqma/qr_core.hpp"

namespace jvcqma {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_index(const Dataset& data, int index_col) {
  if (!data.is_continuous(index_col)) {
    throw InvalidArgument("column " + std::to_string(index_col) +
                          " is not a continuous candidate index");
  }
}

}  // namespace

std::vector<int> non_index_columns(const Dataset& data, int index_col) {
  std::vector<int> rest;
  rest.reserve(static_cast<std::size_t>(data.dims()));
  for (int c = 0; c < data.dims(); ++c) {
    if (c != index_col) rest.push_back(c);
  }
  return rest;
}

VcLocalFit fit_local(const Dataset& data, int index_col, double eval_point, QuantileLevel tau,
                     double h, KernelKind kind, std::optional<Eigen::Index> exclude) {
  require_index(data, index_col);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidBandwidth("local fit bandwidth must be positive, got " + std::to_string(h));
  }
  if (!std::isfinite(eval_point)) throw InvalidArgument("local fit: non-finite evaluation point");

  const std::vector<int> rest = non_index_columns(data, index_col);
  const auto r = static_cast<Eigen::Index>(rest.size());
  const Eigen::Index d = 2 * data.dims();
  const Eigen::Index n = data.rows();
  const auto index = data.x.col(index_col);

  std::vector<Eigen::Index> kept;
  Eigen::VectorXd weights(n);
  double bandwidth = h;
  for (int attempt = 0; attempt <= kMaxEscalations; ++attempt) {
    kept.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (exclude && *exclude == i) continue;
      const double w = kernel_scaled(kind, bandwidth, index[i] - eval_point);
      if (w >= kMinObservationWeight) {
        weights[static_cast<Eigen::Index>(kept.size())] = w;
        kept.push_back(i);
      }
    }
    if (static_cast<Eigen::Index>(kept.size()) >= d) break;
    if (attempt == kMaxEscalations) {
      throw UnderdeterminedLocalFit("local fit at " + std::to_string(eval_point) + " on column " +
                                    std::to_string(index_col) + " has " +
                                    std::to_string(kept.size()) +
                                    " weighted observations after bandwidth escalation");
    }
    bandwidth *= kEscalationFactor;
  }

  const auto m = static_cast<Eigen::Index>(kept.size());
  WeightedQrProblem problem{Eigen::VectorXd(m), Eigen::MatrixXd(m, d), weights.head(m), tau};
  for (Eigen::Index t = 0; t < m; ++t) {
    const Eigen::Index i = kept[static_cast<std::size_t>(t)];
    const double u = index[i] - eval_point;
    problem.responses[t] = data.y[i];
    problem.design(t, 0) = 1.0;
    problem.design(t, r + 1) = u;
    for (Eigen::Index k = 0; k < r; ++k) {
      const double v = data.x(i, rest[static_cast<std::size_t>(k)]);
      problem.design(t, 1 + k) = v;
      problem.design(t, r + 2 + k) = v * u;
    }
  }

  const QrSolution sol = solve_weighted_qr(problem);
  VcLocalFit fit;
  fit.index_col = index_col;
  fit.eval_point = eval_point;
  fit.bandwidth = bandwidth;
  fit.alpha = sol.coefficients[0];
  fit.beta = sol.coefficients.segment(1, r);
  fit.alpha_slope = sol.coefficients[r + 1];
  fit.beta_slope = sol.coefficients.segment(r + 2, r);
  return fit;
}

double predict_from_fit(const VcLocalFit& fit, std::span<const double> query,
                        std::span<const int> rest) {
  double value = fit.alpha;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    value += query[static_cast<std::size_t>(rest[k])] * fit.beta[static_cast<Eigen::Index>(k)];
  }
  return value;
}

std::size_t CandidatePrediction::failure_count() const {
  std::size_t count = 0;
  for (char f : failed) count += f != 0;
  return count;
}

CandidatePrediction predict_candidate(const Dataset& data, int index_col,
                                      const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                      QuantileLevel tau, double h, KernelKind kind,
                                      int threads) {
  data.validate();
  require_index(data, index_col);
  if (queries.cols() != data.dims()) {
    throw ShapeError("queries have " + std::to_string(queries.cols()) + " columns, expected " +
                     std::to_string(data.dims()));
  }
  const std::vector<int> rest = non_index_columns(data, index_col);
  const Eigen::Index k = queries.rows();
  CandidatePrediction out;
  out.index_col = index_col;
  out.values = Eigen::VectorXd::Constant(k, kNaN);
  out.failed.assign(static_cast<std::size_t>(k), 0);
  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t t) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::RowVectorXd q = queries.row(row);
    try {
      const VcLocalFit fit = fit_local(data, index_col, q[index_col], tau, h, kind);
      out.values[row] = predict_from_fit(fit, {q.data(), static_cast<std::size_t>(q.size())}, rest);
    } catch (const UnderdeterminedLocalFit&) {
      out.failed[t] = 1;
    }
  });
  return out;
}

std::vector<Eigen::Index> LooPredictionMatrix::complete_rows() const {
  std::vector<Eigen::Index> rows_ok;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    bool ok = true;
    for (Eigen::Index j = 0; j < matrix.cols() && ok; ++j) ok = !entry_failed(i, j);
    if (ok) rows_ok.push_back(i);
  }
  return rows_ok;
}

LooPredictionMatrix loo_prediction_matrix(const Dataset& data, QuantileLevel tau,
                                          std::span<const double> bandwidths, KernelKind kind,
                                          int threads) {
  data.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.num_candidates();
  if (p == 0) throw EmptyCandidateSet("dataset has no continuous candidate indexes");
  if (static_cast<Eigen::Index>(bandwidths.size()) != p) {
    throw ShapeError("expected one bandwidth per continuous column");
  }

  LooPredictionMatrix loo;
  loo.tau = tau;
  loo.column_index_map = data.continuous_cols;
  loo.matrix = Eigen::MatrixXd::Constant(n, p, kNaN);
  loo.failed.assign(static_cast<std::size_t>(n * p), 0);

  std::vector<std::vector<int>> rests;
  for (int s : data.continuous_cols) rests.push_back(non_index_columns(data, s));

  parallel_for(static_cast<std::size_t>(n * p), threads, [&](std::size_t task) {
    const auto j = static_cast<Eigen::Index>(task) / n;
    const auto i = static_cast<Eigen::Index>(task) % n;
    const int s = data.continuous_cols[static_cast<std::size_t>(j)];
    const Eigen::RowVectorXd xi = data.x.row(i);
    try {
      const VcLocalFit fit = fit_local(data, s, xi[s], tau, bandwidths[j], kind, i);
      loo.matrix(i, j) = predict_from_fit(
          fit, {xi.data(), static_cast<std::size_t>(xi.size())}, rests[static_cast<std::size_t>(j)]);
    } catch (const UnderdeterminedLocalFit&) {
      loo.failed[static_cast<std::size_t>(i * p + j)] = 1;
    }
  });

  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index failures = 0;
    for (Eigen::Index i = 0; i < n; ++i) failures += loo.entry_failed(i, j);
    if (static_cast<double>(failures) > kMaxLooFailureShare * static_cast<double>(n)) {
      throw FailureBudgetExceeded("candidate on column " +
                                  std::to_string(loo.column_index_map[static_cast<std::size_t>(j)]) +
                                  " failed " + std::to_string(failures) + " of " +
                                  std::to_string(n) + " leave-one-out fits");
    }
  }
  return loo;
}

}  // namespace jvcqma
