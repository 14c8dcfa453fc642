#include "jvcqma/model_average.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jvcqma/errors.hpp"

namespace jvcqma {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

WeightScheme parse_scheme(std::string_view name) {
  if (name == "loocv" || name == "jvcqma") return WeightScheme::Loocv;
  if (name == "equal" || name == "vcqma1") return WeightScheme::Equal;
  if (name == "bic" || name == "vcqma2") return WeightScheme::SmoothedBic;
  throw InvalidArgument("unknown weight scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(WeightScheme scheme) noexcept {
  switch (scheme) {
    case WeightScheme::Loocv:
      return "loocv";
    case WeightScheme::Equal:
      return "equal";
    case WeightScheme::SmoothedBic:
      return "bic";
  }
  return "loocv";
}

WeightVector clamp_small_weights(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  Eigen::VectorXd w = raw;
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    if (w[s] < kWeightClamp) w[s] = 0.0;
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw InternalError("all weights fell below the clamp threshold");
  w /= total;
  return WeightVector(std::move(w));
}

WeightVector loocv_weights(const LooPredictionMatrix& loo, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (loo.rows() != y.size()) throw ShapeError("LOO matrix rows do not match responses");
  if (loo.cols() == 0) throw EmptyCandidateSet("LOO matrix has no candidates");
  const std::vector<Eigen::Index> rows = loo.complete_rows();
  if (rows.empty()) throw FailureBudgetExceeded("every LOO row has a failed entry");
  const auto n = static_cast<Eigen::Index>(rows.size());
  SimplexWeightProblem problem{Eigen::VectorXd(n), Eigen::MatrixXd(n, loo.cols()), loo.tau};
  for (Eigen::Index r = 0; r < n; ++r) {
    problem.responses[r] = y[rows[static_cast<std::size_t>(r)]];
    problem.prediction_matrix.row(r) = loo.matrix.row(rows[static_cast<std::size_t>(r)]);
  }
  return clamp_small_weights(solve_simplex_weights(problem).values());
}

WeightVector equal_weights(Eigen::Index p) { return WeightVector::uniform(p); }

std::vector<double> smoothed_bic_values(std::span<const double> mean_losses, Eigen::Index n,
                                        Eigen::Index dims) {
  if (n < 1) throw InvalidArgument("BIC needs at least one observation");
  const double nn = static_cast<double>(n);
  const double penalty = static_cast<double>(dims - 1) * std::log(nn);
  std::vector<double> bic;
  bic.reserve(mean_losses.size());
  for (double loss : mean_losses) {
    if (!(loss >= 0.0)) throw InvalidArgument("BIC: in-sample loss must be nonnegative");
    bic.push_back(loss == 0.0 ? -std::numeric_limits<double>::infinity()
                              : 2.0 * nn * std::log(loss) + penalty);
  }
  return bic;
}

WeightVector bic_softmax(std::span<const double> bic) {
  if (bic.empty()) throw EmptyCandidateSet("no BIC values");
  const auto p = static_cast<Eigen::Index>(bic.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  const double lowest = *std::min_element(bic.begin(), bic.end());
  if (std::isnan(lowest)) throw InvalidArgument("BIC values must not be NaN");
  if (std::isinf(lowest)) {
    for (Eigen::Index s = 0; s < p; ++s) w[s] = std::isinf(bic[static_cast<std::size_t>(s)]) ? 1.0 : 0.0;
  } else {
    for (Eigen::Index s = 0; s < p; ++s) w[s] = std::exp(-0.5 * (bic[static_cast<std::size_t>(s)] - lowest));
  }
  w /= w.sum();
  return WeightVector(std::move(w));
}

Eigen::MatrixXd candidate_prediction_matrix(const Dataset& data,
                                            const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                            QuantileLevel tau, std::span<const double> bandwidths,
                                            KernelKind kind, int threads) {
  const Eigen::Index p = data.num_candidates();
  if (static_cast<Eigen::Index>(bandwidths.size()) != p) {
    throw ShapeError("expected one bandwidth per continuous column");
  }
  Eigen::MatrixXd out(queries.rows(), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    out.col(j) = predict_candidate(data, data.continuous_cols[static_cast<std::size_t>(j)], queries,
                                   tau, bandwidths[static_cast<std::size_t>(j)], kind, threads)
                     .values;
  }
  return out;
}

WeightVector smoothed_bic_weights(const Dataset& data, QuantileLevel tau, const BandwidthPlan& plan,
                                  KernelKind kind, int threads) {
  const Eigen::MatrixXd fitted =
      candidate_prediction_matrix(data, data.x, tau, plan.adjusted, kind, threads);
  std::vector<double> losses;
  for (Eigen::Index j = 0; j < fitted.cols(); ++j) {
    double total = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
      if (std::isnan(fitted(i, j))) continue;
      total += check_loss(tau, data.y[i] - fitted(i, j));
      ++used;
    }
    if (used == 0) throw FailureBudgetExceeded("a candidate failed on every in-sample row");
    losses.push_back(total / static_cast<double>(used));
  }
  const std::vector<double> bic = smoothed_bic_values(losses, data.rows(), data.dims());
  return bic_softmax(bic);
}

AveragedModel fit_averaged_model(std::shared_ptr<const Dataset> data, QuantileLevel tau,
                                 const PilotBandwidths& pilots, WeightScheme scheme,
                                 KernelKind kind, int threads) {
  if (!data) throw InvalidArgument("fit_averaged_model: no training data");
  data->require_fittable();
  AveragedModel model;
  model.scheme = scheme;
  model.tau = tau;
  model.kernel = kind;
  model.bandwidths = adjust_for_quantile(pilots, tau);
  switch (scheme) {
    case WeightScheme::Loocv: {
      const LooPredictionMatrix loo =
          loo_prediction_matrix(*data, tau, model.bandwidths.adjusted, kind, threads);
      model.weights = loocv_weights(loo, data->y);
      break;
    }
    case WeightScheme::Equal:
      model.weights = equal_weights(data->num_candidates());
      break;
    case WeightScheme::SmoothedBic:
      model.weights = smoothed_bic_weights(*data, tau, model.bandwidths, kind, threads);
      break;
  }
  model.training_data = std::move(data);
  return model;
}

Eigen::VectorXd predict_averaged(const AveragedModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& queries, int threads) {
  if (!model.training_data) throw InvalidArgument("model has no training data attached");
  const Dataset& data = *model.training_data;
  if (model.weights.size() != data.num_candidates() ||
      static_cast<Eigen::Index>(model.bandwidths.adjusted.size()) != data.num_candidates()) {
    throw ShapeError("model weights or bandwidths do not match the training data");
  }
  if (queries.cols() != data.dims()) throw ShapeError("query width does not match the model");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(queries.rows());
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) {
    const double w = model.weights[j];
    if (w < kSkipWeight) continue;
    const CandidatePrediction pred =
        predict_candidate(data, data.continuous_cols[static_cast<std::size_t>(j)], queries,
                          model.tau, model.bandwidths.adjusted[static_cast<std::size_t>(j)],
                          model.kernel, threads);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = pred.failed[static_cast<std::size_t>(i)] ? kNaN : out[i] + w * pred.values[i];
    }
  }
  return out;
}

nlohmann::ordered_json model_to_json(const AveragedModel& model) {
  nlohmann::ordered_json doc;
  doc["tau"] = model.tau.value();
  doc["scheme"] = scheme_name(model.scheme);
  doc["kernel"] = kernel_name(model.kernel);
  doc["weights"] = std::vector<double>(model.weights.values().begin(), model.weights.values().end());
  doc["column_index_map"] = model.bandwidths.index_cols;
  if (model.training_data && !model.training_data->column_names.empty()) {
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (int c : model.bandwidths.index_cols) {
      names.push_back(model.training_data->column_names[static_cast<std::size_t>(c)]);
    }
    doc["candidate_names"] = names;
  }
  doc["bandwidths"] = {{"pilot", model.bandwidths.pilot},
                       {"adjusted", model.bandwidths.adjusted},
                       {"grids", model.bandwidths.grids}};
  doc["training_data"] = {{"path", model.data_ref.path}, {"sha256", model.data_ref.sha256}};
  return doc;
}

AveragedModel model_from_json(const nlohmann::ordered_json& doc,
                              std::shared_ptr<const Dataset> data) {
  AveragedModel model;
  try {
    model.tau = QuantileLevel(doc.at("tau").get<double>());
    model.scheme = parse_scheme(doc.at("scheme").get<std::string>());
    model.kernel = parse_kernel(doc.at("kernel").get<std::string>());
    const auto weights = doc.at("weights").get<std::vector<double>>();
    model.weights = WeightVector(Eigen::Map<const Eigen::VectorXd>(
        weights.data(), static_cast<Eigen::Index>(weights.size())));
    model.bandwidths.tau = model.tau;
    model.bandwidths.index_cols = doc.at("column_index_map").get<std::vector<int>>();
    const auto& bw = doc.at("bandwidths");
    model.bandwidths.pilot = bw.at("pilot").get<std::vector<double>>();
    model.bandwidths.adjusted = bw.at("adjusted").get<std::vector<double>>();
    model.bandwidths.grids = bw.at("grids").get<std::vector<std::vector<double>>>();
    model.data_ref.path = doc.at("training_data").at("path").get<std::string>();
    model.data_ref.sha256 = doc.at("training_data").at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
  if (data && model.bandwidths.index_cols != data->continuous_cols) {
    throw ShapeError("model candidate columns do not match the training data");
  }
  model.training_data = std::move(data);
  return model;
}

}  // namespace jvcqma
