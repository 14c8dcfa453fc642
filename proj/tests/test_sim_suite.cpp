#include <doctest.h>

#include <cmath>
#include <vector>

#include "jvcqma/errors.hpp"
#include "jvcqma/sim_suite.hpp"

using namespace jvcqma;
using namespace jvcqma::sim;

namespace {

SimDesign design(Example ex, ErrorCase ec, int n, std::uint64_t seed) {
  SimDesign d;
  d.example = ex;
  d.error_case = ec;
  d.n = n;
  d.n_test = 10;
  d.seed = seed;
  return d;
}

std::vector<double> row(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> v(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) v[static_cast<std::size_t>(j)] = x(i, j);
  return v;
}

}  // namespace

TEST_SUITE("sim_suite") {
  TEST_CASE("Example 1 coefficients at zero") {
    const Eigen::VectorXd b = ex1_beta(0.0, 5);
    REQUIRE(b.size() == 4);
    CHECK(b[0] == 0.0);
    CHECK(b[1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(b[2] == 0.0);
    CHECK(b[3] == 1.0);
    const Eigen::VectorXd padded = ex1_beta(0.3, 10);
    CHECK(padded.size() == 9);
    CHECK(padded.head(4) == ex1_beta(0.3, 5));
    CHECK(padded.tail(5).isZero(0.0));
  }

  TEST_CASE("Example 2 covariates lie in [-2, 2]") {
    const auto s = generate(design(Example::Ex2, ErrorCase::Case4, 2000, 3));
    CHECK(s.train.x.minCoeff() >= -2.0);
    CHECK(s.train.x.maxCoeff() <= 2.0);
  }

  TEST_CASE("a fixed seed reproduces the sample bit for bit") {
    for (Example ex : {Example::Ex1, Example::Ex2, Example::Ex3, Example::Ex4}) {
      const ErrorCase ec = ex == Example::Ex2 ? ErrorCase::Case5 : ErrorCase::Case2;
      const auto a = generate(design(ex, ec, 50, 9));
      const auto b = generate(design(ex, ec, 50, 9));
      const auto c = generate(design(ex, ec, 50, 10));
      CHECK(a.train.x == b.train.x);
      CHECK(a.train.y == b.train.y);
      CHECK(a.test.y == b.test.y);
      CHECK(a.train.y != c.train.y);
      CHECK(a.train.y != a.test.y.head(10).replicate(5, 1));
    }
  }

  TEST_CASE("AR(1) covariates: Monte Carlo covariance and Cholesky identity") {
    const Eigen::MatrixXd x = gaussian_copula_covariates(100000, 4, 0.5, std::uint64_t{21});
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / (x.rows() - 1.0);
    const Eigen::MatrixXd target = ar1_covariance(4, 0.5);
    CHECK((cov - target).cwiseAbs().maxCoeff() <= 0.02);
    CHECK(target(0, 3) == 0.125);

    const Eigen::MatrixXd c3 = ar1_covariance(3, 0.5);
    const Eigen::MatrixXd l = c3.llt().matrixL();
    CHECK((l * l.transpose() - c3).cwiseAbs().maxCoeff() <= 1e-12);

    const Eigen::MatrixXd one = gaussian_copula_covariates(50000, 1, 0.5, std::uint64_t{22});
    CHECK(std::fabs(one.mean()) <= 0.02);
    CHECK(std::fabs((one.array() - one.mean()).square().mean() - 1.0) <= 0.03);
  }

  TEST_CASE("mixture errors have variance 2.2") {
    CounterRng rng(5);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double e = draw_error(ErrorCase::Case3, rng);
      sum += e;
      sq += e * e;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(std::fabs(var - 2.2) <= 0.02 * 2.2);
  }

  TEST_CASE("error quantiles invert the sampling distributions") {
    for (ErrorCase ec : {ErrorCase::Case1, ErrorCase::Case2, ErrorCase::Case3, ErrorCase::Case4,
                         ErrorCase::Case5, ErrorCase::Case6}) {
      CounterRng rng(6);
      const int n = 200000;
      int below = 0;
      const double q = error_quantile(ec, 0.3);
      for (int i = 0; i < n; ++i) below += draw_error(ec, rng) <= q;
      CHECK(static_cast<double>(below) / n == doctest::Approx(0.3).epsilon(0.02));
    }
    CHECK(error_quantile(ErrorCase::Case1, 0.5) == doctest::Approx(0.0));
    CHECK(error_quantile(ErrorCase::Case5, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }

  TEST_CASE("Example 3: scale factor at least 0.5, positive errors keep their sign") {
    for (ErrorCase ec : {ErrorCase::Case4, ErrorCase::Case5, ErrorCase::Case6}) {
      const auto s = generate(design(Example::Ex3, ec, 2000, 31));
      const double q1 = error_quantile(ec, 0.2);
      const double q2 = error_quantile(ec, 0.8);
      for (Eigen::Index i = 0; i < s.train.rows(); ++i) {
        const auto x = row(s.train.x, i);
        const double a = s.true_quantile(x, 0.2);
        const double b = s.true_quantile(x, 0.8);
        const double scale = (b - a) / (q2 - q1);
        const double location = a - scale * q1;
        CHECK(scale >= 0.5 - 1e-12);
        CHECK(s.train.y[i] - location >= -1e-9);
      }
    }
  }

  TEST_CASE("Examples 3 and 4 have six continuous and four binomial columns") {
    for (Example ex : {Example::Ex3, Example::Ex4}) {
      const auto s = generate(design(ex, ErrorCase::Case1, 100, 4));
      CHECK(s.train.dims() == 10);
      CHECK(s.train.num_candidates() == 6);
      CHECK(s.train.discrete_cols.size() == 4);
      for (int c : s.train.discrete_cols) {
        const auto col = s.train.x.col(c);
        CHECK((col.array() == col.array().round()).all());
        CHECK(col.minCoeff() >= 0.0);
      }
    }
  }

  TEST_CASE("pairing and shapes") {
    CHECK_THROWS_AS(generate(design(Example::Ex1, ErrorCase::Case4, 50, 1)), InvalidArgument);
    CHECK_THROWS_AS(generate(design(Example::Ex2, ErrorCase::Case1, 50, 1)), InvalidArgument);
    SimDesign any = design(Example::Ex1, ErrorCase::Case4, 50, 1);
    any.allow_any_pairing = true;
    CHECK_NOTHROW(generate(any));

    SimDesign d = design(Example::Ex1, ErrorCase::Case1, 200, 2);
    d.n_test = 100;
    const auto s = generate(d);
    CHECK(s.train.rows() == 200);
    CHECK(s.train.dims() == 5);
    CHECK(s.test.rows() == 100);
    d.p = 10;
    CHECK(generate(d).train.dims() == 10);
    d.p = 4;
    CHECK_THROWS_AS(generate(d), InvalidArgument);

    CHECK(parse_example("ex3") == Example::Ex3);
    CHECK(parse_error_case("case6") == ErrorCase::Case6);
    CHECK_THROWS_AS(parse_error_case("7"), InvalidArgument);
  }
}
