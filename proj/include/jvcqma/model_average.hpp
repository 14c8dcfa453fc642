#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jvcqma/bandwidth.hpp"
#include "jvcqma/core_math.hpp"
#include "jvcqma/dataset.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/vcm.hpp"

namespace jvcqma {

enum class WeightScheme { Loocv, Equal, SmoothedBic };

WeightScheme parse_scheme(std::string_view name);
std::string_view scheme_name(WeightScheme scheme) noexcept;

/// Weights below this are treated as exact zeros.
inline constexpr double kWeightClamp = 1e-10;
/// Candidates lighter than this are skipped when predicting.
inline constexpr double kSkipWeight = 1e-12;

/// Zeroes components below kWeightClamp and renormalizes.
WeightVector clamp_small_weights(const Eigen::Ref<const Eigen::VectorXd>& raw);

/// Jackknife weights: minimizes the LOO check-loss criterion over the
/// simplex. Rows holding a failed LOO entry are left out of the criterion.
WeightVector loocv_weights(const LooPredictionMatrix& loo, const Eigen::Ref<const Eigen::VectorXd>& y);

WeightVector equal_weights(Eigen::Index p);

/// BIC_s = 2n ln(loss_s) + (dims - 1) ln n for mean in-sample check losses.
std::vector<double> smoothed_bic_values(std::span<const double> mean_losses, Eigen::Index n,
                                        Eigen::Index dims);

/// exp(-BIC_s / 2) normalized, computed after subtracting min BIC. Candidates
/// with BIC = -inf (zero in-sample loss) share all the weight.
WeightVector bic_softmax(std::span<const double> bic);

/// Smoothed-BIC weights from in-sample candidate fits.
WeightVector smoothed_bic_weights(const Dataset& data, QuantileLevel tau, const BandwidthPlan& plan,
                                  KernelKind kind, int threads = 1);

/// Predictions of every candidate at `queries`; column j belongs to
/// continuous_cols[j]. Failed entries are NaN.
Eigen::MatrixXd candidate_prediction_matrix(const Dataset& data,
                                            const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                            QuantileLevel tau, std::span<const double> bandwidths,
                                            KernelKind kind, int threads = 1);

struct TrainingDataRef {
  std::string path;
  std::string sha256;
};

struct AveragedModel {
  WeightVector weights;
  WeightScheme scheme = WeightScheme::Loocv;
  BandwidthPlan bandwidths;
  QuantileLevel tau{0.5};
  KernelKind kernel = KernelKind::Gaussian;
  std::shared_ptr<const Dataset> training_data;
  TrainingDataRef data_ref;
};

/// Bandwidth plan, weights by `scheme`, and the assembled model.
AveragedModel fit_averaged_model(std::shared_ptr<const Dataset> data, QuantileLevel tau,
                                 const PilotBandwidths& pilots, WeightScheme scheme,
                                 KernelKind kind, int threads = 1);

/// sum_s w_s mu_s(x). A row is NaN only if a candidate with weight >=
/// kSkipWeight failed on it.
Eigen::VectorXd predict_averaged(const AveragedModel& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                 int threads = 1);

/// Model document without the training data itself.
nlohmann::ordered_json model_to_json(const AveragedModel& model);
/// Inverse of model_to_json; `data` becomes the model's training data.
AveragedModel model_from_json(const nlohmann::ordered_json& doc,
                              std::shared_ptr<const Dataset> data);

}  // namespace jvcqma
