#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jvcqma/core_math.hpp"
#include "jvcqma/dataset.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/sim_suite.hpp"

namespace jvcqma::eval {

/// Mean check loss of `predictions` on the test responses.
double fpe(const Eigen::Ref<const Eigen::VectorXd>& y_test,
           const Eigen::Ref<const Eigen::VectorXd>& predictions, QuantileLevel tau);

/// Global linear quantile regression with an intercept over all covariates.
struct LinearQrPredictor {
  /// Intercept first, then one slope per covariate column.
  Eigen::VectorXd coefficients;

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& queries) const;
};

LinearQrPredictor linear_qr_baseline(const Dataset& data, QuantileLevel tau);

enum class MethodKind { Jvcqma, Vcqma1, Vcqma2, Vcqr, Lqr };

struct Method {
  MethodKind kind = MethodKind::Jvcqma;
  /// Index column of a VCQR method.
  int index_col = -1;

  /// JVCQMA, VCQMA1, VCQMA2, VCQR<col + 1>, LQR.
  std::string name() const;
  static Method parse(const std::string& name);
  friend bool operator==(const Method&, const Method&) = default;
};

/// JVCQMA, VCQMA1, VCQMA2, VCQR_s for every continuous column, LQR.
std::vector<Method> all_methods(const Dataset& like);

/// Method names kept in reports for comparison numbers produced elsewhere.
inline const std::vector<std::string> kReservedMethods{"PLQR", "LQMA", "AQR"};

struct EvalOptions {
  KernelKind kernel = KernelKind::Gaussian;
  /// Pilot grid shared by every index; empty selects the per-column default.
  std::vector<double> grid;
  int threads = 1;
  /// Keep per-replication test predictions (see ReplicationRecord).
  bool keep_records = false;
  /// Largest tolerated share of failed replications per method and tau.
  double max_failure_share = 0.10;
};

struct MethodStats {
  std::string method;
  double tau = 0.5;
  double mean_fpe = 0.0;
  double sd_fpe = 0.0;
  int replications = 0;
  int failures = 0;
};

struct FpeReport {
  nlohmann::ordered_json design;
  std::vector<double> taus;
  std::vector<std::string> methods;
  /// Ordered by tau, then method.
  std::vector<MethodStats> stats;
  int replications = 0;
  /// Comparisons of the LOO criterion at the jackknife weights against
  /// every vertex and equal weights; violations must stay at zero.
  long loo_optimality_checks = 0;
  long loo_optimality_violations = 0;
  std::vector<double> seconds_per_replication;

  const MethodStats& at(const std::string& method, double tau) const;
};

struct WeightSummary {
  std::vector<double> taus;
  std::vector<std::string> candidate_names;
  /// [tau][candidate].
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> sd;
  /// Bootstrap intervals mean -/+ 1.96 sd; empty for simulation summaries.
  std::vector<std::vector<double>> lower;
  std::vector<std::vector<double>> upper;
  /// [tau][replication] estimated weights.
  std::vector<std::vector<Eigen::VectorXd>> draws;
  int failures = 0;
};

/// Everything needed to recompute test-set losses for arbitrary weights.
struct ReplicationRecord {
  int replication = 0;
  double tau = 0.5;
  Eigen::VectorXd y_test;
  /// n_test x p candidate predictions (NaN on failure).
  Eigen::MatrixXd test_candidates;
  Eigen::VectorXd jvcqma_weights;
};

struct RunResult {
  FpeReport report;
  WeightSummary weights;
  std::vector<ReplicationRecord> records;
};

/// Simulation protocol: per replication r the design is regenerated with seed
/// stream_seed(master_seed, r); bandwidths are selected on the training set,
/// every method is fitted and scored on the test set for each tau.
RunResult run_replications(const sim::SimDesign& design, const std::vector<double>& taus,
                           const std::vector<Method>& methods, int reps,
                           std::uint64_t master_seed, const EvalOptions& options = {});

/// Real-data protocol: `reps` random splits with `n_test` test rows.
RunResult run_split_replications(const Dataset& data, int n_test, const std::vector<double>& taus,
                                 const std::vector<Method>& methods, int reps,
                                 std::uint64_t master_seed, const EvalOptions& options = {});

/// Uniform random partition; both parts keep the original row order.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, int n_test, std::uint64_t seed);

struct BootstrapOptions {
  KernelKind kernel = KernelKind::Gaussian;
  std::vector<double> grid;
  int threads = 1;
  /// Reuse the full-data pilot bandwidths instead of reselecting per resample.
  bool fixed_bandwidth = false;
  double max_failure_share = 0.10;
};

/// Pairs bootstrap of the jackknife weights: B row resamples of size n, the
/// full weight pipeline on each, and mean -/+ 1.96 sd intervals.
WeightSummary bootstrap_weight_intervals(const Dataset& data, const std::vector<double>& taus,
                                         int resamples, std::uint64_t master_seed,
                                         const BootstrapOptions& options = {});

nlohmann::ordered_json report_to_json(const FpeReport& report);
/// Rows: tau; columns: mean FPE per method.
std::string report_to_tsv(const FpeReport& report);
nlohmann::ordered_json weights_to_json(const WeightSummary& summary);
/// Rows: tau; columns: mean and sd (and interval bounds when present) per
/// candidate.
std::string weights_to_tsv(const WeightSummary& summary);

}  // namespace jvcqma::eval
