#include <doctest.h>

#include <cmath>
#include <random>

#include "jvcqma/errors.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/rng.hpp"
#include "jvcqma/sim_suite.hpp"
#include "jvcqma/vcm.hpp"

using namespace jvcqma;

namespace {

Dataset example1(int n, std::uint64_t seed) {
  sim::SimDesign d;
  d.n = n;
  d.n_test = 5;
  d.seed = seed;
  return sim::generate(d).train;
}

// Y = X2 exactly, three continuous covariates.
Dataset noiseless(int n) {
  CounterRng rng(77);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
  }
  Eigen::VectorXd y = x.col(1);
  return make_dataset(std::move(y), std::move(x));
}

}  // namespace

TEST_SUITE("vcm_estimator") {
  TEST_CASE("noiseless linear truth: alpha 0, beta on X2 is 1") {
    const Dataset data = noiseless(60);
    const VcLocalFit fit = fit_local(data, 0, 0.1, QuantileLevel(0.5), 2.0, KernelKind::Gaussian);
    CHECK(std::fabs(fit.alpha) <= 1e-6);
    CHECK(fit.beta.size() == 2);
    CHECK(fit.beta[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::fabs(fit.beta[1]) <= 1e-6);
  }

  TEST_CASE("excluding a row equals deleting it, bit for bit") {
    const Dataset data = example1(40, 5);
    for (Eigen::Index i : {0, 7, 39}) {
      const VcLocalFit a = fit_local(data, 1, data.x(i, 1), QuantileLevel(0.3), 0.6, KernelKind::Gaussian, i);
      const VcLocalFit b = fit_local(data.without_row(i), 1, data.x(i, 1), QuantileLevel(0.3), 0.6,
                                     KernelKind::Gaussian);
      CHECK(a.alpha == b.alpha);
      CHECK(a.beta == b.beta);
      CHECK(a.alpha_slope == b.alpha_slope);
      CHECK(a.beta_slope == b.beta_slope);
    }
  }

  TEST_CASE("local fit matches a directly materialized weighted problem") {
    const Dataset data = example1(50, 9);
    const double h = 0.5;
    const VcLocalFit fit = fit_local(data, 0, 0.0, QuantileLevel(0.5), h, KernelKind::Gaussian);
    const Eigen::Index n = data.rows();
    WeightedQrProblem p{data.y, Eigen::MatrixXd(n, 10), Eigen::VectorXd(n), QuantileLevel(0.5)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = data.x(i, 0);
      p.design(i, 0) = 1.0;
      for (int k = 0; k < 4; ++k) p.design(i, 1 + k) = data.x(i, 1 + k);
      p.design(i, 5) = u;
      for (int k = 0; k < 4; ++k) p.design(i, 6 + k) = data.x(i, 1 + k) * u;
      p.obs_weights[i] = std::exp(-0.5 * (u / h) * (u / h)) / (h * std::sqrt(2.0 * M_PI));
    }
    const QrSolution direct = solve_weighted_qr(p);
    // The direct problem keeps every row; compare objectives, then coefficients.
    Eigen::VectorXd coef(10);
    coef << fit.alpha, fit.beta, fit.alpha_slope, fit.beta_slope;
    CHECK(weighted_qr_objective(p, coef) == doctest::Approx(direct.objective).epsilon(1e-9));
    if (direct.status == SolveStatus::Optimal) {
      for (int k = 0; k < 10; ++k) CHECK(coef[k] == doctest::Approx(direct.coefficients[k]).epsilon(1e-7));
    }
  }

  TEST_CASE("predicting a training point of a noiseless dataset returns its response") {
    const Dataset data = noiseless(60);
    const Eigen::MatrixXd q = data.x.topRows(3);
    const CandidatePrediction pred = predict_candidate(data, 2, q, QuantileLevel(0.5), 1.5, KernelKind::Gaussian);
    for (int i = 0; i < 3; ++i) CHECK(pred.values[i] == doctest::Approx(data.y[i]).epsilon(1e-6));
    CHECK(pred.failure_count() == 0);
  }

  TEST_CASE("identical query rows give identical predictions") {
    const Dataset data = example1(50, 3);
    Eigen::MatrixXd q(2, 5);
    q.row(0) = data.x.row(4);
    q.row(1) = data.x.row(4);
    const auto pred = predict_candidate(data, 0, q, QuantileLevel(0.5), 0.7, KernelKind::Gaussian);
    CHECK(pred.values[0] == pred.values[1]);
  }

  TEST_CASE("candidate prediction composes fit_local with the inner product") {
    const Dataset data = example1(100, 21);
    const Eigen::MatrixXd q = example1(5, 22).x;
    const auto pred = predict_candidate(data, 1, q, QuantileLevel(0.75), 0.6, KernelKind::Gaussian, 2);
    const auto rest = non_index_columns(data, 1);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const VcLocalFit fit = fit_local(data, 1, q(i, 1), QuantileLevel(0.75), 0.6, KernelKind::Gaussian);
      double manual = fit.alpha;
      for (std::size_t k = 0; k < rest.size(); ++k) manual += q(i, rest[k]) * fit.beta[static_cast<Eigen::Index>(k)];
      CHECK(pred.values[i] == manual);
    }
  }

  TEST_CASE("leave-one-out entries match refitting without the row") {
    const Dataset data = example1(30, 13);
    const std::vector<double> h{0.8, 0.8, 0.9, 1.0, 0.7};
    const auto loo = loo_prediction_matrix(data, QuantileLevel(0.5), h, KernelKind::Gaussian);
    CHECK(loo.rows() == 30);
    CHECK(loo.cols() == 5);
    CHECK(loo.column_index_map == data.continuous_cols);
    for (Eigen::Index i : {0, 3, 29}) {
      const Dataset reduced = data.without_row(i);
      for (Eigen::Index s = 0; s < 5; ++s) {
        const auto pred = predict_candidate(reduced, static_cast<int>(s), data.x.row(i), QuantileLevel(0.5),
                                            h[static_cast<std::size_t>(s)], KernelKind::Gaussian);
        CHECK(loo.matrix(i, s) == doctest::Approx(pred.values[0]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("leave-one-out matrix follows a row permutation") {
    const Dataset data = example1(25, 14);
    std::vector<Eigen::Index> perm(25);
    for (Eigen::Index i = 0; i < 25; ++i) perm[static_cast<std::size_t>(i)] = (i * 7) % 25;
    const Dataset shuffled = data.select_rows(perm);
    const std::vector<double> h(5, 0.9);
    const auto a = loo_prediction_matrix(data, QuantileLevel(0.4), h, KernelKind::Gaussian);
    const auto b = loo_prediction_matrix(shuffled, QuantileLevel(0.4), h, KernelKind::Gaussian, 3);
    for (Eigen::Index i = 0; i < 25; ++i) {
      for (Eigen::Index s = 0; s < 5; ++s) {
        CHECK(b.matrix(i, s) == doctest::Approx(a.matrix(perm[static_cast<std::size_t>(i)], s)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("thread count does not change results") {
    const Dataset data = example1(30, 15);
    const std::vector<double> h(5, 0.8);
    const auto a = loo_prediction_matrix(data, QuantileLevel(0.5), h, KernelKind::Gaussian, 1);
    const auto b = loo_prediction_matrix(data, QuantileLevel(0.5), h, KernelKind::Gaussian, 4);
    CHECK(a.matrix == b.matrix);
  }

  TEST_CASE("shifting the responses shifts every prediction") {
    Dataset data = example1(50, 16);
    const Eigen::MatrixXd q = example1(5, 17).x;
    const auto base = predict_candidate(data, 0, q, QuantileLevel(0.5), 0.8, KernelKind::Gaussian);
    data.y.array() += 3.25;
    const auto shifted = predict_candidate(data, 0, q, QuantileLevel(0.5), 0.8, KernelKind::Gaussian);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(shifted.values[i] - base.values[i] == doctest::Approx(3.25).epsilon(1e-8));
  }

  TEST_CASE("upper quantile predictions exceed lower ones on average") {
    const Dataset data = example1(400, 18);
    const Eigen::MatrixXd q = example1(40, 19).x;
    const auto hi = predict_candidate(data, 0, q, QuantileLevel(0.75), 0.5, KernelKind::Gaussian);
    const auto lo = predict_candidate(data, 0, q, QuantileLevel(0.25), 0.5, KernelKind::Gaussian);
    CHECK((hi.values - lo.values).mean() > 0.0);
  }

  TEST_CASE("estimation error shrinks with the sample size") {
    // Y = a(X1) + X2 b(X1) + noise with h shrinking like n^(-1/5); coefficient
    // error on a grid of x1 values.
    auto max_error = [](int n) {
      CounterRng rng(1234);
      std::normal_distribution<double> nd;
      Eigen::MatrixXd x(n, 2);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        x(i, 0) = nd(rng);
        x(i, 1) = nd(rng);
        y[i] = std::sin(x(i, 0)) + x(i, 1) * std::cos(x(i, 0)) + 0.3 * nd(rng);
      }
      const Dataset data = make_dataset(y, x);
      const double h = std::pow(static_cast<double>(n), -0.2);
      double worst = 0.0;
      for (double u = -1.0; u <= 1.0 + 1e-9; u += 0.25) {
        const VcLocalFit fit = fit_local(data, 0, u, QuantileLevel(0.5), h, KernelKind::Gaussian);
        worst = std::max({worst, std::fabs(fit.alpha - std::sin(u)), std::fabs(fit.beta[0] - std::cos(u))});
      }
      return worst;
    };
    CHECK(max_error(2000) < 0.7 * max_error(200));
  }

  TEST_CASE("errors: wrong index, bad bandwidth, underdetermined window") {
    const Dataset data = example1(30, 20);
    CHECK_THROWS_AS(fit_local(data, 9, 0.0, QuantileLevel(0.5), 1.0, KernelKind::Gaussian), InvalidArgument);
    CHECK_THROWS_AS(fit_local(data, 0, 0.0, QuantileLevel(0.5), 0.0, KernelKind::Gaussian), InvalidBandwidth);
    // Far outside the data with a compact kernel even five escalations leave no rows.
    CHECK_THROWS_AS(fit_local(data, 0, 1e3, QuantileLevel(0.5), 0.1, KernelKind::Epanechnikov),
                    UnderdeterminedLocalFit);
  }

  TEST_CASE("escalation rescues a sparse compact window") {
    const Dataset data = example1(80, 21);
    const VcLocalFit fit = fit_local(data, 0, 0.0, QuantileLevel(0.5), 0.05, KernelKind::Epanechnikov);
    CHECK(fit.bandwidth > 0.05);
    CHECK(fit.bandwidth <= 0.05 * std::pow(kEscalationFactor, kMaxEscalations) * (1 + 1e-12));
  }

  TEST_CASE("failed query rows are flagged without poisoning the others") {
    const Dataset data = example1(40, 22);
    Eigen::MatrixXd q = data.x.topRows(2);
    q(1, 0) = 1e3;
    const auto pred = predict_candidate(data, 0, q, QuantileLevel(0.5), 0.3, KernelKind::Epanechnikov);
    CHECK(pred.failure_count() == 1);
    CHECK(std::isfinite(pred.values[0]));
    CHECK(std::isnan(pred.values[1]));
  }
}
