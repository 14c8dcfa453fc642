#include <doctest.h>

#include <algorithm>
#include <random>

#include "jvcqma/core_math.hpp"
#include "jvcqma/data_io.hpp"
#include "jvcqma/errors.hpp"
#include "jvcqma/evaluation.hpp"
#include "jvcqma/lp.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/rng.hpp"
#include "oracles.hpp"

using namespace jvcqma;

namespace {

WeightedQrProblem intercept_only(std::vector<double> y, double tau) {
  const auto m = static_cast<Eigen::Index>(y.size());
  return {Eigen::Map<Eigen::VectorXd>(y.data(), m), Eigen::MatrixXd::Ones(m, 1),
          Eigen::VectorXd::Ones(m), QuantileLevel(tau)};
}

WeightedQrProblem random_problem(CounterRng& rng, int m, int d, double tau, bool zero_some) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.05, 2.0);
  WeightedQrProblem p{Eigen::VectorXd(m), Eigen::MatrixXd(m, d), Eigen::VectorXd(m), QuantileLevel(tau)};
  for (int i = 0; i < m; ++i) {
    p.design(i, 0) = 1.0;
    for (int j = 1; j < d; ++j) p.design(i, j) = nd(rng);
    p.responses[i] = nd(rng) * 2.0 + p.design.row(i).sum();
    p.obs_weights[i] = ud(rng);
  }
  if (zero_some && m > d + 1) p.obs_weights[m - 1] = 0.0;
  return p;
}

}  // namespace

TEST_SUITE("qr_core") {
  TEST_CASE("median of three points") {
    const auto sol = solve_weighted_qr(intercept_only({1, 2, 3}, 0.5));
    CHECK(sol.coefficients[0] == doctest::Approx(2.0));
    CHECK(sol.objective == doctest::Approx(1.0));
  }

  TEST_CASE("lower quartile of four points matches breakpoint enumeration") {
    const auto p = intercept_only({1, 2, 3, 4}, 0.25);
    const auto sol = solve_weighted_qr(p);
    double best = 1e300;
    for (double c : {1.0, 2.0, 3.0, 4.0}) {
      best = std::min(best, weighted_qr_objective(p, Eigen::VectorXd::Constant(1, c)));
    }
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-12));
    CHECK(sol.coefficients[0] == doctest::Approx(1.0));
  }

  TEST_CASE("noiseless linear truth is recovered") {
    CounterRng rng(3);
    std::normal_distribution<double> nd;
    WeightedQrProblem p{Eigen::VectorXd(40), Eigen::MatrixXd(40, 3), Eigen::VectorXd::Ones(40),
                        QuantileLevel(0.3)};
    for (int i = 0; i < 40; ++i) {
      p.design.row(i) << 1.0, nd(rng), nd(rng);
      p.responses[i] = 1.5 - 2.0 * p.design(i, 1) + 0.25 * p.design(i, 2);
    }
    const auto sol = solve_weighted_qr(p);
    CHECK(sol.coefficients[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(sol.coefficients[1] == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(sol.coefficients[2] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(sol.objective <= 1e-9);
  }

  TEST_CASE("random weighted problems match basic-solution enumeration") {
    CounterRng rng(2024);
    for (int k = 0; k < 60; ++k) {
      const int m = 3 + k % 6;
      const int d = 1 + k % 3;
      const double tau = (1 + k % 9) / 10.0;
      const auto p = random_problem(rng, m, d, tau, k % 4 == 0);
      const auto sol = solve_weighted_qr(p);
      const double best = oracle::enumerate_basic_solutions(p.responses, p.design, p.obs_weights, tau);
      CHECK(sol.objective == doctest::Approx(best).epsilon(1e-10));
      CHECK(std::fabs(sol.duality_gap) <= 1e-9 * std::max(1.0, sol.objective));
    }
  }

  TEST_CASE("objective is reported at the returned coefficients") {
    CounterRng rng(5);
    const auto p = random_problem(rng, 30, 4, 0.7, false);
    const auto sol = solve_weighted_qr(p);
    CHECK(sol.objective == doctest::Approx(weighted_qr_objective(p, sol.coefficients)).epsilon(1e-14));
  }

  TEST_CASE("no coordinate perturbation improves the optimum") {
    CounterRng rng(17);
    for (int k = 0; k < 10; ++k) {
      const auto p = random_problem(rng, 25, 3, 0.2 + 0.06 * k, false);
      const auto sol = solve_weighted_qr(p);
      for (Eigen::Index j = 0; j < 3; ++j) {
        for (double step : {1e-4, -1e-4}) {
          Eigen::VectorXd b = sol.coefficients;
          b[j] += step;
          CHECK(weighted_qr_objective(p, b) >= sol.objective - 1e-9);
        }
      }
    }
  }

  TEST_CASE("scaling responses scales coefficients and objective") {
    CounterRng rng(23);
    auto p = random_problem(rng, 20, 2, 0.4, false);
    const auto base = solve_weighted_qr(p);
    p.responses *= 3.0;
    const auto scaled = solve_weighted_qr(p);
    CHECK(scaled.objective == doctest::Approx(3.0 * base.objective).epsilon(1e-10));
  }

  TEST_CASE("intercept-only fits return a sample quantile") {
    CounterRng rng(99);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 100; ++k) {
      const int m = 1 + k % 25;
      std::vector<double> y(static_cast<std::size_t>(m));
      for (auto& v : y) v = nd(rng);
      const double tau = (1 + k % 9) / 10.0;
      const auto p = intercept_only(y, tau);
      const auto sol = solve_weighted_qr(p);
      double best = 1e300;
      for (double c : y) best = std::min(best, weighted_qr_objective(p, Eigen::VectorXd::Constant(1, c)));
      CHECK(sol.objective <= best + 1e-12);
    }
  }

  TEST_CASE("dependent columns get zero coefficients") {
    WeightedQrProblem p{Eigen::VectorXd(5), Eigen::MatrixXd(5, 3), Eigen::VectorXd::Ones(5), QuantileLevel(0.5)};
    p.design << 1, 0, 0, 1, 1, 0, 1, 2, 0, 1, 3, 0, 1, 4, 0;
    p.responses << 0.1, 1.2, 1.9, 3.0, 4.2;
    const auto sol = solve_weighted_qr(p);
    CHECK(sol.coefficients[2] == 0.0);
    CHECK(sol.status == SolveStatus::Degenerate);
  }

  TEST_CASE("too few weighted rows is underdetermined") {
    WeightedQrProblem p{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Zero(3),
                        QuantileLevel(0.5)};
    p.obs_weights[0] = 1.0;
    CHECK_THROWS_AS(solve_weighted_qr(p), UnderdeterminedLocalFit);
    p.obs_weights[1] = 1e-13;
    CHECK_THROWS_AS(solve_weighted_qr(p), UnderdeterminedLocalFit);
  }

  TEST_CASE("shape and argument errors") {
    WeightedQrProblem p{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Ones(2, 1), Eigen::VectorXd::Ones(3),
                        QuantileLevel(0.5)};
    CHECK_THROWS_AS(solve_weighted_qr(p), ShapeError);
    p.design = Eigen::MatrixXd::Ones(3, 1);
    p.obs_weights[1] = -1.0;
    CHECK_THROWS_AS(solve_weighted_qr(p), InvalidArgument);
  }

  TEST_CASE("dual and primal simplex agree on box problems") {
    CounterRng rng(41);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 20; ++k) {
      const int m = 30 + k;
      const int d = 2 + k % 4;
      lp::BoundedProblem p;
      p.A.resize(d, m);
      p.c.resize(m);
      for (int i = 0; i < m; ++i) {
        p.A(0, i) = 1.0;
        for (int j = 1; j < d; ++j) p.A(j, i) = nd(rng);
        p.c[i] = nd(rng);
      }
      p.b = Eigen::VectorXd::Zero(d);
      p.lower = Eigen::VectorXd::Constant(m, -0.3);
      p.upper = Eigen::VectorXd::Constant(m, 0.7);
      p.start = Eigen::VectorXd::Zero(m);
      for (int j = 0; j < d; ++j) p.basis.push_back(j);
      const auto dual = lp::solve_box_dual(p);
      REQUIRE(dual.has_value());
      const auto primal = lp::solve_bounded(p);
      CHECK(dual->objective == doctest::Approx(primal.objective).epsilon(1e-10));
    }
  }

  TEST_CASE("simplex weights: perfect column wins") {
    CounterRng rng(8);
    std::normal_distribution<double> nd;
    SimplexWeightProblem p{Eigen::VectorXd(15), Eigen::MatrixXd(15, 3), QuantileLevel(0.5)};
    for (int i = 0; i < 15; ++i) {
      p.responses[i] = nd(rng);
      p.prediction_matrix(i, 0) = p.responses[i];
      p.prediction_matrix(i, 1) = nd(rng);
      p.prediction_matrix(i, 2) = p.responses[i] + 1.0;
    }
    const WeightVector w = solve_simplex_weights(p);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(evaluate_combination_loss(p, w) <= 1e-12);
  }

  TEST_CASE("simplex weights: identical columns") {
    SimplexWeightProblem p{Eigen::VectorXd(4), Eigen::MatrixXd(4, 3), QuantileLevel(0.3)};
    p.responses << 1, 2, 3, 4;
    for (int s = 0; s < 3; ++s) p.prediction_matrix.col(s) << 0.5, 2.5, 2.0, 5.0;
    const WeightVector w = solve_simplex_weights(p);
    CHECK(evaluate_combination_loss(p, w) ==
          doctest::Approx(evaluate_combination_loss(p, WeightVector::vertex(3, 0))).epsilon(1e-12));
  }

  TEST_CASE("simplex weights beat the 0.01 grid") {
    CounterRng rng(12);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 15; ++k) {
      const int n = 20;
      SimplexWeightProblem p{Eigen::VectorXd(n), Eigen::MatrixXd(n, 3), QuantileLevel(0.1 + 0.05 * k)};
      for (int i = 0; i < n; ++i) {
        p.responses[i] = nd(rng);
        for (int s = 0; s < 3; ++s) p.prediction_matrix(i, s) = p.responses[i] + nd(rng) * (s + 1) * 0.5;
      }
      const WeightVector w = solve_simplex_weights(p);
      const double grid = oracle::simplex_grid_min3(p.responses, p.prediction_matrix, p.tau.value(), 100);
      CHECK(evaluate_combination_loss(p, w) <= grid + 1e-6);
      for (Eigen::Index s = 0; s < 3; ++s) {
        CHECK(evaluate_combination_loss(p, w) <= evaluate_combination_loss(p, WeightVector::vertex(3, s)) + 1e-9);
      }
      CHECK(evaluate_combination_loss(p, w) <= evaluate_combination_loss(p, WeightVector::uniform(3)) + 1e-9);
    }
  }

  TEST_CASE("simplex weights permute with the candidate columns") {
    CounterRng rng(31);
    std::normal_distribution<double> nd;
    SimplexWeightProblem p{Eigen::VectorXd(25), Eigen::MatrixXd(25, 4), QuantileLevel(0.6)};
    for (int i = 0; i < 25; ++i) {
      p.responses[i] = nd(rng);
      for (int s = 0; s < 4; ++s) p.prediction_matrix(i, s) = p.responses[i] * 0.5 * s + nd(rng);
    }
    SimplexWeightProblem q = p;
    const std::vector<int> perm{2, 0, 3, 1};
    for (int s = 0; s < 4; ++s) q.prediction_matrix.col(s) = p.prediction_matrix.col(perm[s]);
    CHECK(evaluate_combination_loss(q, solve_simplex_weights(q)) ==
          doctest::Approx(evaluate_combination_loss(p, solve_simplex_weights(p))).epsilon(1e-10));
  }

  TEST_CASE("combination loss matches a scalar loop") {
    SimplexWeightProblem p{Eigen::VectorXd(2), Eigen::MatrixXd::Zero(2, 2), QuantileLevel(0.5)};
    p.responses << 1, -1;
    CHECK(evaluate_combination_loss(p, WeightVector::uniform(2)) == doctest::Approx(0.5));
    CounterRng rng(4);
    std::normal_distribution<double> nd;
    SimplexWeightProblem r{Eigen::VectorXd(30), Eigen::MatrixXd(30, 3), QuantileLevel(0.35)};
    for (int i = 0; i < 30; ++i) {
      r.responses[i] = nd(rng);
      for (int s = 0; s < 3; ++s) r.prediction_matrix(i, s) = nd(rng);
    }
    const WeightVector w(Eigen::Vector3d(0.2, 0.3, 0.5));
    CHECK(evaluate_combination_loss(r, w) ==
          doctest::Approx(oracle::combination_loss(r.responses, r.prediction_matrix, {0.2, 0.3, 0.5}, 0.35))
              .epsilon(1e-13));
    CHECK_THROWS_AS(evaluate_combination_loss(r, WeightVector::uniform(2)), ShapeError);
  }

  TEST_CASE("weight vector validation") {
    CHECK_THROWS_AS(WeightVector(Eigen::Vector2d(0.7, 0.7)), InvalidArgument);
    CHECK_THROWS_AS(WeightVector(Eigen::Vector2d(-0.5, 1.5)), InvalidArgument);
    CHECK_THROWS_AS(WeightVector(Eigen::VectorXd()), EmptyCandidateSet);
    SimplexWeightProblem p{Eigen::VectorXd::Zero(3), Eigen::MatrixXd(3, 0), QuantileLevel(0.5)};
    CHECK_THROWS_AS(solve_simplex_weights(p), EmptyCandidateSet);
  }
  // Boston CRIM window centred 3.96 sd out: an ill-conditioned final basis
  // with coefficients near 300. Reference optimum computed with HiGHS.
  TEST_CASE("extrapolating local window certifies at the optimum") {
    const std::string dir = JVCQMA_DATA_DIR;
    const io::Schema schema = io::load_schema(dir + "/boston_schema.json");
    const Dataset data = io::standardize(io::load_csv(dir + "/boston.csv", schema), schema).first;
    const auto [train, test] = eval::train_test_split(data, 50, stream_seed(20240611, 0));
    const double x0 = test.x(44, 0);
    const double h = 0.6220 * quantile_adjust_factor(QuantileLevel(0.2));
    const Eigen::Index dims = train.dims();
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      if (kernel_scaled(KernelKind::Gaussian, h, train.x(i, 0) - x0) >= 1e-12) rows.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    WeightedQrProblem p{Eigen::VectorXd(m), Eigen::MatrixXd(m, 2 * dims), Eigen::VectorXd(m), QuantileLevel(0.2)};
    for (Eigen::Index t = 0; t < m; ++t) {
      const Eigen::Index i = rows[static_cast<std::size_t>(t)];
      const double u = train.x(i, 0) - x0;
      p.responses[t] = train.y[i];
      p.obs_weights[t] = kernel_scaled(KernelKind::Gaussian, h, u);
      p.design(t, 0) = 1.0;
      p.design(t, dims) = u;
      for (Eigen::Index c = 1; c < dims; ++c) {
        p.design(t, c) = train.x(i, c);
        p.design(t, dims + c) = train.x(i, c) * u;
      }
    }
    REQUIRE(m == 455);
    const QrSolution sol = solve_weighted_qr(p);
    CHECK(sol.objective == doctest::Approx(0.04903405174519876).epsilon(1e-10));
    CHECK(std::fabs(sol.duality_gap) <= 1e-9);
  }
}
