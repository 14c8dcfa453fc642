#include "jvcqma/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "jvcqma/bandwidth.hpp"
#include "jvcqma/data_io.hpp"
#include "jvcqma/errors.hpp"
#include "jvcqma/model_average.hpp"
#include "jvcqma/parallel.hpp"
#include "jvcqma/rng.hpp"
#include "jvcqma/vcm.hpp"

namespace jvcqma::eval {
namespace {

constexpr double kLooOptimalityTol = 1e-9;

// FPE per tau and method; nullopt marks a failed fit.
struct Outcome {
  std::vector<std::vector<std::optional<double>>> fpe;  // [tau][method]
  std::vector<std::optional<Eigen::VectorXd>> weights;  // [tau]
  std::vector<ReplicationRecord> records;
  long checks = 0;
  long violations = 0;
  double seconds = 0.0;
};

bool uses_candidates(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(),
                     [](const Method& m) { return m.kind != MethodKind::Lqr; });
}

Eigen::VectorXd combine(const Eigen::MatrixXd& candidates, const Eigen::VectorXd& w) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(candidates.rows());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] >= kSkipWeight) out += w[j] * candidates.col(j);
  }
  return out;
}

Eigen::Index candidate_position(const Dataset& data, int col) {
  const auto it = std::find(data.continuous_cols.begin(), data.continuous_cols.end(), col);
  if (it == data.continuous_cols.end()) {
    throw InvalidArgument("VCQR index column " + std::to_string(col) + " is not continuous");
  }
  return it - data.continuous_cols.begin();
}

// CV(w_hat) <= CV(e_s) for all s and <= CV(uniform) on the rows used by the LP.
void check_loo_optimality(const LooPredictionMatrix& loo, const Eigen::VectorXd& y,
                          const WeightVector& w, Outcome& out) {
  const auto rows = loo.complete_rows();
  SimplexWeightProblem problem{Eigen::VectorXd(static_cast<Eigen::Index>(rows.size())),
                               Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), loo.cols()),
                               loo.tau};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    problem.responses[static_cast<Eigen::Index>(r)] = y[rows[r]];
    problem.prediction_matrix.row(static_cast<Eigen::Index>(r)) = loo.matrix.row(rows[r]);
  }
  const double best = evaluate_combination_loss(problem, w);
  const double slack = kLooOptimalityTol * std::max(1.0, std::fabs(best));
  auto compare = [&](const WeightVector& other) {
    ++out.checks;
    if (best > evaluate_combination_loss(problem, other) + slack) ++out.violations;
  };
  for (Eigen::Index s = 0; s < loo.cols(); ++s) compare(WeightVector::vertex(loo.cols(), s));
  compare(WeightVector::uniform(loo.cols()));
}

Outcome evaluate_split(const Dataset& train, const Dataset& test, const std::vector<double>& taus,
                       const std::vector<Method>& methods, const EvalOptions& options,
                       int inner_threads, int replication) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  out.fpe.assign(taus.size(), std::vector<std::optional<double>>(methods.size()));
  out.weights.assign(taus.size(), std::nullopt);

  std::optional<PilotBandwidths> pilots;
  if (uses_candidates(methods)) {
    try {
      train.require_fittable();
      pilots = select_pilots(train, options.grid, options.kernel, inner_threads);
    } catch (const Error&) {
      pilots.reset();
    }
  }

  for (std::size_t t = 0; t < taus.size(); ++t) {
    const QuantileLevel tau(taus[t]);
    std::optional<BandwidthPlan> plan;
    std::optional<Eigen::MatrixXd> test_cand;
    if (pilots) {
      plan = adjust_for_quantile(*pilots, tau);
      try {
        test_cand = candidate_prediction_matrix(train, test.x, tau, plan->adjusted, options.kernel,
                                                inner_threads);
      } catch (const Error&) {
        test_cand.reset();
      }
    }
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const Method& method = methods[k];
      try {
        Eigen::VectorXd pred;
        if (method.kind == MethodKind::Lqr) {
          pred = linear_qr_baseline(train, tau).predict(test.x);
        } else {
          if (!test_cand) continue;
          switch (method.kind) {
            case MethodKind::Jvcqma: {
              const LooPredictionMatrix loo =
                  loo_prediction_matrix(train, tau, plan->adjusted, options.kernel, inner_threads);
              const WeightVector w = loocv_weights(loo, train.y);
              check_loo_optimality(loo, train.y, w, out);
              out.weights[t] = w.values();
              pred = combine(*test_cand, w.values());
              if (options.keep_records) {
                out.records.push_back({replication, taus[t], test.y, *test_cand, w.values()});
              }
              break;
            }
            case MethodKind::Vcqma1:
              pred = combine(*test_cand, equal_weights(test_cand->cols()).values());
              break;
            case MethodKind::Vcqma2:
              pred = combine(*test_cand, smoothed_bic_weights(train, tau, *plan, options.kernel,
                                                              inner_threads)
                                             .values());
              break;
            case MethodKind::Vcqr:
              pred = test_cand->col(candidate_position(train, method.index_col));
              break;
            case MethodKind::Lqr:
              break;
          }
        }
        if (!pred.allFinite()) continue;
        out.fpe[t][k] = fpe(test.y, pred, tau);
      } catch (const InvalidArgument&) {
        throw;
      } catch (const Error&) {
        // Recorded as a failed fit for this replication.
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RunResult aggregate(std::vector<Outcome>& outcomes, const std::vector<double>& taus,
                    const std::vector<Method>& methods, const Dataset& like,
                    nlohmann::ordered_json design, double max_failure_share) {
  RunResult result;
  FpeReport& report = result.report;
  report.design = std::move(design);
  report.taus = taus;
  report.replications = static_cast<int>(outcomes.size());
  for (const auto& m : methods) report.methods.push_back(m.name());
  const double reps = static_cast<double>(outcomes.size());

  for (std::size_t t = 0; t < taus.size(); ++t) {
    for (std::size_t k = 0; k < methods.size(); ++k) {
      std::vector<double> values;
      for (const auto& o : outcomes) {
        if (o.fpe[t][k]) values.push_back(*o.fpe[t][k]);
      }
      MethodStats stats;
      stats.method = report.methods[k];
      stats.tau = taus[t];
      stats.replications = static_cast<int>(values.size());
      stats.failures = static_cast<int>(outcomes.size() - values.size());
      if (static_cast<double>(stats.failures) > max_failure_share * reps || values.empty()) {
        throw FailureBudgetExceeded(stats.method + " failed in " + std::to_string(stats.failures) +
                                    " of " + std::to_string(outcomes.size()) +
                                    " replications at tau " + io::format_double(taus[t]));
      }
      const double n = static_cast<double>(values.size());
      stats.mean_fpe = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : values) ss += (v - stats.mean_fpe) * (v - stats.mean_fpe);
      stats.sd_fpe = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      report.stats.push_back(stats);
    }
  }

  WeightSummary& ws = result.weights;
  ws.taus = taus;
  for (int c : like.continuous_cols) {
    ws.candidate_names.push_back(like.column_names.empty() ? "x" + std::to_string(c + 1)
                                                           : like.column_names[static_cast<std::size_t>(c)]);
  }
  const auto p = static_cast<Eigen::Index>(like.continuous_cols.size());
  ws.draws.resize(taus.size());
  for (std::size_t t = 0; t < taus.size(); ++t) {
    for (const auto& o : outcomes) {
      if (o.weights[t]) ws.draws[t].push_back(*o.weights[t]);
    }
    std::vector<double> mean(static_cast<std::size_t>(p), 0.0);
    std::vector<double> sd(static_cast<std::size_t>(p), 0.0);
    const auto& draws = ws.draws[t];
    if (!draws.empty()) {
      const double n = static_cast<double>(draws.size());
      for (Eigen::Index s = 0; s < p; ++s) {
        double total = 0.0;
        for (const auto& w : draws) total += w[s];
        const double m = total / n;
        double ss = 0.0;
        for (const auto& w : draws) ss += (w[s] - m) * (w[s] - m);
        mean[static_cast<std::size_t>(s)] = m;
        sd[static_cast<std::size_t>(s)] = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      }
    }
    ws.mean.push_back(std::move(mean));
    ws.sd.push_back(std::move(sd));
  }

  for (auto& o : outcomes) {
    report.loo_optimality_checks += o.checks;
    report.loo_optimality_violations += o.violations;
    report.seconds_per_replication.push_back(o.seconds);
    for (auto& rec : o.records) result.records.push_back(std::move(rec));
  }
  return result;
}

void validate_request(const std::vector<double>& taus, const std::vector<Method>& methods, int reps) {
  if (taus.empty()) throw InvalidArgument("at least one quantile level is required");
  for (double t : taus) QuantileLevel{t};
  if (methods.empty()) throw InvalidArgument("at least one method is required");
  if (reps < 1) throw InvalidArgument("replication count must be positive");
}

std::pair<int, int> split_threads(int threads, int reps) {
  const int outer = std::max(1, std::min(threads, reps));
  return {outer, std::max(1, threads / outer)};
}

nlohmann::ordered_json grid_json(const std::vector<double>& grid) {
  if (grid.empty()) return "default";
  return grid;
}

}  // namespace

double fpe(const Eigen::Ref<const Eigen::VectorXd>& y_test,
           const Eigen::Ref<const Eigen::VectorXd>& predictions, QuantileLevel tau) {
  if (y_test.size() != predictions.size()) throw ShapeError("fpe: length mismatch");
  if (y_test.size() == 0) throw InvalidArgument("fpe: empty test set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_test.size(); ++i) total += check_loss(tau, y_test[i] - predictions[i]);
  return total / static_cast<double>(y_test.size());
}

Eigen::VectorXd LinearQrPredictor::predict(const Eigen::Ref<const Eigen::MatrixXd>& queries) const {
  if (queries.cols() + 1 != coefficients.size()) throw ShapeError("LQR: query width mismatch");
  return (queries * coefficients.tail(queries.cols())).array() + coefficients[0];
}

LinearQrPredictor linear_qr_baseline(const Dataset& data, QuantileLevel tau) {
  data.validate();
  WeightedQrProblem problem{data.y, Eigen::MatrixXd(data.rows(), data.dims() + 1),
                            Eigen::VectorXd::Ones(data.rows()), tau};
  problem.design.col(0).setOnes();
  problem.design.rightCols(data.dims()) = data.x;
  return LinearQrPredictor{solve_weighted_qr(problem).coefficients};
}

std::string Method::name() const {
  switch (kind) {
    case MethodKind::Jvcqma:
      return "JVCQMA";
    case MethodKind::Vcqma1:
      return "VCQMA1";
    case MethodKind::Vcqma2:
      return "VCQMA2";
    case MethodKind::Vcqr:
      return "VCQR" + std::to_string(index_col + 1);
    case MethodKind::Lqr:
      return "LQR";
  }
  return "?";
}

Method Method::parse(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "JVCQMA") return {MethodKind::Jvcqma, -1};
  if (upper == "VCQMA1") return {MethodKind::Vcqma1, -1};
  if (upper == "VCQMA2") return {MethodKind::Vcqma2, -1};
  if (upper == "LQR") return {MethodKind::Lqr, -1};
  if (upper.starts_with("VCQR") && upper.size() > 4) {
    const std::string digits = upper.substr(4);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const int col = std::stoi(digits) - 1;
      if (col >= 0) return {MethodKind::Vcqr, col};
    }
  }
  throw InvalidArgument("unknown method '" + name + "'");
}

std::vector<Method> all_methods(const Dataset& like) {
  std::vector<Method> methods{{MethodKind::Jvcqma, -1}, {MethodKind::Vcqma1, -1}, {MethodKind::Vcqma2, -1}};
  for (int c : like.continuous_cols) methods.push_back({MethodKind::Vcqr, c});
  methods.push_back({MethodKind::Lqr, -1});
  return methods;
}

const MethodStats& FpeReport::at(const std::string& method, double tau) const {
  for (const auto& s : stats) {
    if (s.method == method && s.tau == tau) return s;
  }
  throw InvalidArgument("report has no entry for " + method + " at tau " + io::format_double(tau));
}

RunResult run_replications(const sim::SimDesign& design, const std::vector<double>& taus,
                           const std::vector<Method>& methods, int reps,
                           std::uint64_t master_seed, const EvalOptions& options) {
  design.validate();
  validate_request(taus, methods, reps);
  const auto [outer, inner] = split_threads(options.threads, reps);
  std::vector<Outcome> outcomes(static_cast<std::size_t>(reps));
  Dataset like;
  parallel_for(static_cast<std::size_t>(reps), outer, [&](std::size_t r) {
    sim::SimDesign d = design;
    d.seed = stream_seed(master_seed, r);
    const sim::GeneratedSample sample = sim::generate(d);
    outcomes[r] = evaluate_split(sample.train, sample.test, taus, methods, options, inner,
                                 static_cast<int>(r));
    if (r == 0) like = sample.train;
  });
  nlohmann::ordered_json desc{{"kind", "simulation"},
                              {"example", static_cast<int>(design.example)},
                              {"error_case", static_cast<int>(design.error_case)},
                              {"n", design.n},
                              {"p", like.dims()},
                              {"n_test", design.n_test},
                              {"reps", reps},
                              {"master_seed", master_seed},
                              {"kernel", kernel_name(options.kernel)},
                              {"grid", grid_json(options.grid)}};
  return aggregate(outcomes, taus, methods, like, std::move(desc), options.max_failure_share);
}

RunResult run_split_replications(const Dataset& data, int n_test, const std::vector<double>& taus,
                                 const std::vector<Method>& methods, int reps,
                                 std::uint64_t master_seed, const EvalOptions& options) {
  data.validate();
  validate_request(taus, methods, reps);
  const auto [outer, inner] = split_threads(options.threads, reps);
  std::vector<Outcome> outcomes(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), outer, [&](std::size_t r) {
    auto [train, test] = train_test_split(data, n_test, stream_seed(master_seed, r));
    outcomes[r] = evaluate_split(train, test, taus, methods, options, inner, static_cast<int>(r));
  });
  nlohmann::ordered_json desc{{"kind", "split"},
                              {"n", data.rows()},
                              {"n_train", data.rows() - n_test},
                              {"n_test", n_test},
                              {"reps", reps},
                              {"master_seed", master_seed},
                              {"kernel", kernel_name(options.kernel)},
                              {"grid", grid_json(options.grid)}};
  return aggregate(outcomes, taus, methods, data, std::move(desc), options.max_failure_share);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, int n_test, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  if (n_test <= 0 || n_test >= n) {
    throw InvalidArgument("test size must lie strictly between 0 and " + std::to_string(n));
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  CounterRng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> test(order.begin(), order.begin() + n_test);
  std::vector<Eigen::Index> train(order.begin() + n_test, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.select_rows(train), data.select_rows(test)};
}

WeightSummary bootstrap_weight_intervals(const Dataset& data, const std::vector<double>& taus,
                                         int resamples, std::uint64_t master_seed,
                                         const BootstrapOptions& options) {
  data.require_fittable();
  if (resamples < 2) throw InvalidArgument("bootstrap needs at least two resamples");
  if (taus.empty()) throw InvalidArgument("at least one quantile level is required");
  for (double t : taus) QuantileLevel{t};

  std::optional<PilotBandwidths> fixed;
  if (options.fixed_bandwidth) fixed = select_pilots(data, options.grid, options.kernel, options.threads);

  const auto [outer, inner] = split_threads(options.threads, resamples);
  const Eigen::Index n = data.rows();
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> draws(
      static_cast<std::size_t>(resamples), std::vector<std::optional<Eigen::VectorXd>>(taus.size()));
  parallel_for(static_cast<std::size_t>(resamples), outer, [&](std::size_t b) {
    CounterRng rng = CounterRng::substream(master_seed, b);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = pick(rng);
    const Dataset sample = data.select_rows(rows);
    try {
      const PilotBandwidths pilots =
          fixed ? *fixed : select_pilots(sample, options.grid, options.kernel, inner);
      for (std::size_t t = 0; t < taus.size(); ++t) {
        try {
          const BandwidthPlan plan = adjust_for_quantile(pilots, QuantileLevel(taus[t]));
          const LooPredictionMatrix loo = loo_prediction_matrix(
              sample, QuantileLevel(taus[t]), plan.adjusted, options.kernel, inner);
          draws[b][t] = loocv_weights(loo, sample.y).values();
        } catch (const InvalidArgument&) {
          throw;
        } catch (const Error&) {
        }
      }
    } catch (const InvalidArgument&) {
      throw;
    } catch (const Error&) {
    }
  });

  WeightSummary ws;
  ws.taus = taus;
  for (int c : data.continuous_cols) {
    ws.candidate_names.push_back(data.column_names.empty() ? "x" + std::to_string(c + 1)
                                                           : data.column_names[static_cast<std::size_t>(c)]);
  }
  const auto p = data.num_candidates();
  ws.draws.resize(taus.size());
  for (std::size_t t = 0; t < taus.size(); ++t) {
    int failed = 0;
    for (const auto& per : draws) {
      if (per[t]) {
        ws.draws[t].push_back(*per[t]);
      } else {
        ++failed;
      }
    }
    ws.failures += failed;
    if (static_cast<double>(failed) > options.max_failure_share * resamples || ws.draws[t].size() < 2) {
      throw FailureBudgetExceeded(std::to_string(failed) + " of " + std::to_string(resamples) +
                                  " bootstrap resamples failed at tau " + io::format_double(taus[t]));
    }
    const double count = static_cast<double>(ws.draws[t].size());
    std::vector<double> mean(static_cast<std::size_t>(p)), sd(mean.size()), lo(mean.size()), hi(mean.size());
    for (Eigen::Index s = 0; s < p; ++s) {
      double total = 0.0;
      for (const auto& w : ws.draws[t]) total += w[s];
      const double m = total / count;
      double ss = 0.0;
      for (const auto& w : ws.draws[t]) ss += (w[s] - m) * (w[s] - m);
      const double dev = std::sqrt(ss / (count - 1.0));
      const auto k = static_cast<std::size_t>(s);
      mean[k] = m;
      sd[k] = dev;
      lo[k] = m - 1.96 * dev;
      hi[k] = m + 1.96 * dev;
    }
    ws.mean.push_back(std::move(mean));
    ws.sd.push_back(std::move(sd));
    ws.lower.push_back(std::move(lo));
    ws.upper.push_back(std::move(hi));
  }
  return ws;
}

nlohmann::ordered_json report_to_json(const FpeReport& report) {
  nlohmann::ordered_json doc;
  doc["design"] = report.design;
  doc["taus"] = report.taus;
  doc["methods"] = report.methods;
  doc["reserved_methods"] = kReservedMethods;
  doc["replications"] = report.replications;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : report.stats) {
    rows.push_back({{"tau", s.tau},
                    {"method", s.method},
                    {"mean_fpe", s.mean_fpe},
                    {"sd_fpe", s.sd_fpe},
                    {"replications", s.replications},
                    {"failures", s.failures}});
  }
  doc["results"] = rows;
  doc["loo_optimality"] = {{"checks", report.loo_optimality_checks},
                           {"violations", report.loo_optimality_violations}};
  return doc;
}

std::string report_to_tsv(const FpeReport& report) {
  std::ostringstream out;
  out << "tau";
  for (const auto& m : report.methods) out << '\t' << m;
  out << '\n';
  for (double tau : report.taus) {
    out << io::format_double(tau);
    for (const auto& m : report.methods) out << '\t' << io::format_double(report.at(m, tau).mean_fpe);
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json weights_to_json(const WeightSummary& summary) {
  nlohmann::ordered_json doc;
  doc["taus"] = summary.taus;
  doc["candidates"] = summary.candidate_names;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < summary.taus.size(); ++t) {
    nlohmann::ordered_json row{{"tau", summary.taus[t]},
                               {"draws", summary.draws[t].size()},
                               {"mean", summary.mean[t]},
                               {"sd", summary.sd[t]}};
    if (!summary.lower.empty()) {
      row["lower"] = summary.lower[t];
      row["upper"] = summary.upper[t];
    }
    rows.push_back(std::move(row));
  }
  doc["weights"] = rows;
  doc["failures"] = summary.failures;
  return doc;
}

std::string weights_to_tsv(const WeightSummary& summary) {
  std::ostringstream out;
  const bool intervals = !summary.lower.empty();
  out << "tau";
  for (const auto& name : summary.candidate_names) {
    out << '\t' << name << "_mean\t" << name << "_sd";
    if (intervals) out << '\t' << name << "_lower\t" << name << "_upper";
  }
  out << '\n';
  for (std::size_t t = 0; t < summary.taus.size(); ++t) {
    out << io::format_double(summary.taus[t]);
    for (std::size_t s = 0; s < summary.candidate_names.size(); ++s) {
      out << '\t' << io::format_double(summary.mean[t][s]) << '\t' << io::format_double(summary.sd[t][s]);
      if (intervals) {
        out << '\t' << io::format_double(summary.lower[t][s]) << '\t'
            << io::format_double(summary.upper[t][s]);
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace jvcqma::eval
