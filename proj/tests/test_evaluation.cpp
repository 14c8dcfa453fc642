#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "jvcqma/errors.hpp"
#include "jvcqma/evaluation.hpp"
#include "jvcqma/rng.hpp"
#include "oracles.hpp"

using namespace jvcqma;
using namespace jvcqma::eval;

namespace {

sim::SimDesign small_design(int n) {
  sim::SimDesign d;
  d.n = n;
  d.n_test = 30;
  return d;
}

EvalOptions fixed_grid() {
  EvalOptions o;
  o.grid = {0.6, 0.9, 1.3};
  return o;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("FPE examples and a scalar-loop oracle") {
    const Eigen::Vector2d y(1.0, -1.0);
    CHECK(fpe(y, Eigen::Vector2d::Zero(), QuantileLevel(0.5)) == 0.5);
    CHECK(fpe(y, y, QuantileLevel(0.3)) == 0.0);
    CounterRng rng(2);
    std::normal_distribution<double> nd;
    Eigen::VectorXd a(40), b(40);
    for (int i = 0; i < 40; ++i) {
      a[i] = nd(rng);
      b[i] = nd(rng);
    }
    double loop = 0.0;
    for (int i = 0; i < 40; ++i) loop += oracle::check_loss(0.2, a[i] - b[i]);
    CHECK(fpe(a, b, QuantileLevel(0.2)) == doctest::Approx(loop / 40).epsilon(1e-14));
    CHECK_THROWS_AS(fpe(Eigen::VectorXd(), Eigen::VectorXd(), QuantileLevel(0.5)), InvalidArgument);
    CHECK_THROWS_AS(fpe(a, b.head(3), QuantileLevel(0.5)), ShapeError);
  }

  TEST_CASE("linear QR baseline recovers an exact line and the median") {
    Eigen::MatrixXd x(20, 2);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = i * 0.37 - 2.0;
      x(i, 1) = std::cos(i * 1.1);
      y[i] = 1.0 + 2.0 * x(i, 0) - x(i, 1);
    }
    const auto lqr = linear_qr_baseline(make_dataset(y, x), QuantileLevel(0.3));
    CHECK(lqr.coefficients[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(lqr.coefficients[1] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(lqr.coefficients[2] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK((lqr.predict(x) - y).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("method names") {
    CHECK(Method::parse("jvcqma") == Method{MethodKind::Jvcqma, -1});
    CHECK(Method::parse("VCQR3") == Method{MethodKind::Vcqr, 2});
    CHECK(Method{MethodKind::Vcqr, 2}.name() == "VCQR3");
    CHECK_THROWS_AS(Method::parse("VCQR0"), InvalidArgument);
    CHECK_THROWS_AS(Method::parse("PLQR"), InvalidArgument);
    sim::SimDesign d;
    d.n = 10;
    d.n_test = 1;
    CHECK(all_methods(sim::generate(d).train).size() == 9);
  }

  TEST_CASE("one replication: determinism, shapes, and FPE identities") {
    const std::vector<double> taus{0.25, 0.5};
    EvalOptions opts = fixed_grid();
    opts.keep_records = true;
    const sim::SimDesign d = small_design(80);
    const std::vector<Method> methods{Method::parse("JVCQMA"), Method::parse("VCQMA1"), Method::parse("VCQR2"),
                                      Method::parse("LQR")};
    const RunResult a = run_replications(d, taus, methods, 1, 17, opts);
    const RunResult b = run_replications(d, taus, methods, 1, 17, opts);
    CHECK(report_to_json(a.report).dump() == report_to_json(b.report).dump());
    CHECK(a.report.replications == 1);
    CHECK(a.report.stats.size() == 8);
    CHECK(a.report.loo_optimality_violations == 0);
    CHECK(a.report.loo_optimality_checks > 0);
    REQUIRE(a.records.size() == 2);
    for (const auto& rec : a.records) {
      const QuantileLevel tau(rec.tau);
      const Eigen::VectorXd vertex = rec.test_candidates.col(1);
      CHECK(a.report.at("VCQR2", rec.tau).mean_fpe == doctest::Approx(fpe(rec.y_test, vertex, tau)).epsilon(1e-12));
      const Eigen::VectorXd even = rec.test_candidates.rowwise().mean();
      CHECK(a.report.at("VCQMA1", rec.tau).mean_fpe == doctest::Approx(fpe(rec.y_test, even, tau)).epsilon(1e-12));
      const Eigen::VectorXd jk = rec.test_candidates * rec.jvcqma_weights;
      CHECK(a.report.at("JVCQMA", rec.tau).mean_fpe == doctest::Approx(fpe(rec.y_test, jk, tau)).epsilon(1e-10));
      CHECK(std::fabs(rec.jvcqma_weights.sum() - 1.0) <= 1e-10);
      CHECK(rec.jvcqma_weights.minCoeff() >= 0.0);
      CHECK(a.report.at("JVCQMA", rec.tau).sd_fpe == 0.0);
    }
    CHECK(a.weights.draws.size() == 2);
    CHECK(a.weights.mean[0].size() == 5);

    const std::string tsv = report_to_tsv(a.report);
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
    CHECK(tsv.rfind("tau\tJVCQMA\tVCQMA1\tVCQR2\tLQR", 0) == 0);
  }

  TEST_CASE("a baseline-only run needs no bandwidths") {
    const std::vector<double> taus{0.5};
    const RunResult r = run_replications(small_design(40), taus, {Method::parse("LQR")}, 3, 5);
    CHECK(r.report.stats.size() == 1);
    CHECK(r.report.stats[0].replications == 3);
    CHECK(r.report.stats[0].mean_fpe > 0.0);
    CHECK(r.report.loo_optimality_checks == 0);
  }

  TEST_CASE("train/test split") {
    sim::SimDesign d;
    d.n = 506;
    d.n_test = 1;
    const Dataset data = sim::generate(d).train;
    const auto [train, test] = train_test_split(data, 100, 3);
    CHECK(train.rows() == 406);
    CHECK(test.rows() == 100);
    std::set<double> seen;
    for (Eigen::Index i = 0; i < train.rows(); ++i) seen.insert(train.y[i]);
    for (Eigen::Index i = 0; i < test.rows(); ++i) CHECK(seen.insert(test.y[i]).second);
    std::set<double> all(data.y.data(), data.y.data() + data.rows());
    CHECK(seen == all);
    const auto again = train_test_split(data, 100, 3);
    CHECK(again.first.y == train.y);
    CHECK(train_test_split(data, 100, 4).second.y != test.y);
    CHECK_THROWS_AS(train_test_split(data, 0, 3), InvalidArgument);
    CHECK_THROWS_AS(train_test_split(data, 506, 3), InvalidArgument);
  }

  TEST_CASE("bootstrap intervals: reproducible, ordered, dominant candidate") {
    // Only the first index can express sin(x1); the other candidate is linear in x1.
    CounterRng rng(8);
    std::normal_distribution<double> nd;
    const int n = 120;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = nd(rng);
      x(i, 1) = nd(rng);
      y[i] = 2.0 * std::sin(2.0 * x(i, 0)) + x(i, 1) + 0.05 * nd(rng);
    }
    const Dataset data = make_dataset(y, x);
    BootstrapOptions opts;
    opts.grid = {0.25, 0.4, 0.6};
    const std::vector<double> taus{0.5};
    const WeightSummary a = bootstrap_weight_intervals(data, taus, 3, 11, opts);
    const WeightSummary b = bootstrap_weight_intervals(data, taus, 3, 11, opts);
    CHECK(weights_to_json(a).dump() == weights_to_json(b).dump());
    for (std::size_t s = 0; s < 2; ++s) {
      CHECK(a.lower[0][s] <= a.mean[0][s]);
      CHECK(a.mean[0][s] <= a.upper[0][s]);
    }
    CHECK(a.mean[0][0] >= 0.9);
    CHECK_THROWS_AS(bootstrap_weight_intervals(data, taus, 1, 11, opts), InvalidArgument);
  }
}
