#include "jvcqma/sim_suite.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "jvcqma/core_math.hpp"
#include "jvcqma/errors.hpp"

namespace jvcqma::sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double student_t3_cdf(double t) {
  const double theta = std::atan(t / std::numbers::sqrt3);
  return 0.5 + (theta + std::sin(theta) * std::cos(theta)) / std::numbers::pi;
}

double normal_mixture_cdf(double x) { return 0.95 * normal_cdf(x) + 0.05 * normal_cdf(x / 5.0); }

template <typename Cdf>
double invert_cdf(Cdf cdf, double tau) {
  double lo = -1e4;
  double hi = 1e4;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int covariate_count(const SimDesign& d) {
  return (d.example == Example::Ex1 || d.example == Example::Ex2) ? d.p : 10;
}

Eigen::VectorXd ex2_beta1(double u, int p) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p - 1);
  b[0] = (2.0 + u * u) / (1.0 + u * u);
  b[1] = u;
  return b;
}

Eigen::VectorXd ex2_beta2(double u, int p) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p - 1);
  b[0] = 2.0 * std::sin(kTwoPi * u) / (2.0 - std::cos(kTwoPi * u));
  b[1] = std::exp(-0.5 * u * u);
  b[2] = 1.0;
  b[3] = -1.0;
  return b;
}

// x_{\s}' beta with the index column dropped.
double dot_without(std::span<const double> x, int skip, const Eigen::VectorXd& beta) {
  double total = 0.0;
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (static_cast<int>(j) == skip) continue;
    total += x[j] * beta[k++];
  }
  return total;
}

// Conditional location and error scale of each example.
double location(Example ex, std::span<const double> x) {
  const int p = static_cast<int>(x.size());
  switch (ex) {
    case Example::Ex1:
      return x[0] + dot_without(x, 0, ex1_beta(x[0], p)) + dot_without(x, 1, ex1_beta(x[1], p));
    case Example::Ex2:
      return x[0] * (1.0 - x[0]) + dot_without(x, 2, ex2_beta1(x[2], p)) +
             dot_without(x, 3, ex2_beta2(x[3], p));
    case Example::Ex3:
      return -std::sin(2.0 * x[0]) + 0.5 * (x[1] * x[1] - 25.0 / 12.0) + x[2] +
             (std::exp(-x[3]) - 0.4 * std::sinh(2.5)) + x[4] - 2.0 * x[5] + x[6] - 2.0 * x[7] +
             x[8] - 2.0 * x[9];
    case Example::Ex4:
      return 4.0 * std::cos(x[0] * x[1] * x[2] * x[3]) - x[4] * x[5] + x[6] * x[7] * x[8] * x[9];
  }
  return 0.0;
}

double scale(Example ex, std::span<const double> x) {
  switch (ex) {
    case Example::Ex1:
      return 1.0;
    case Example::Ex2: {
      const double s = std::sin(x[0]);
      const double c = std::cos(x[1]);
      return 0.5 * (s * s + c * c + 0.5);
    }
    case Example::Ex3:
    case Example::Ex4:
      return std::fabs(0.5 * x[0] - 0.5 * x[1]) + 0.5;
  }
  return 1.0;
}

Dataset draw_dataset(const SimDesign& design, int rows, CounterRng& rng) {
  const int dims = covariate_count(design);
  Eigen::MatrixXd x(rows, dims);
  switch (design.example) {
    case Example::Ex1:
      x = gaussian_copula_covariates(rows, dims, 0.5, rng);
      break;
    case Example::Ex2: {
      std::uniform_real_distribution<double> unif(-2.0, 2.0);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < dims; ++j) x(i, j) = unif(rng);
      }
      break;
    }
    case Example::Ex3:
    case Example::Ex4: {
      x.leftCols(6) = gaussian_copula_covariates(rows, 6, 0.5, rng);
      const bool ex3 = design.example == Example::Ex3;
      const int trials[4] = {ex3 ? 2 : 1, ex3 ? 2 : 1, ex3 ? 3 : 2, ex3 ? 3 : 2};
      for (int j = 0; j < 4; ++j) {
        std::binomial_distribution<int> binom(trials[j], 0.5);
        for (int i = 0; i < rows; ++i) x(i, 6 + j) = binom(rng);
      }
      break;
    }
  }
  Dataset data;
  data.x = std::move(x);
  data.y.resize(rows);
  std::vector<double> row(static_cast<std::size_t>(dims));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dims; ++j) row[static_cast<std::size_t>(j)] = data.x(i, j);
    const double e = draw_error(design.error_case, rng);
    data.y[i] = location(design.example, row) + scale(design.example, row) * e;
  }
  const int n_cont = (design.example == Example::Ex3 || design.example == Example::Ex4) ? 6 : dims;
  for (int j = 0; j < dims; ++j) {
    (j < n_cont ? data.continuous_cols : data.discrete_cols).push_back(j);
    data.column_names.push_back("x" + std::to_string(j + 1));
  }
  data.validate();
  return data;
}

}  // namespace

Example parse_example(std::string_view text) {
  if (text == "1" || text == "ex1" || text == "Ex1") return Example::Ex1;
  if (text == "2" || text == "ex2" || text == "Ex2") return Example::Ex2;
  if (text == "3" || text == "ex3" || text == "Ex3") return Example::Ex3;
  if (text == "4" || text == "ex4" || text == "Ex4") return Example::Ex4;
  throw InvalidArgument("unknown example '" + std::string(text) + "'");
}

ErrorCase parse_error_case(std::string_view text) {
  if (text.starts_with("case")) text.remove_prefix(4);
  if (text.size() == 1 && text[0] >= '1' && text[0] <= '6') {
    return static_cast<ErrorCase>(text[0] - '0');
  }
  throw InvalidArgument("unknown error case '" + std::string(text) + "'");
}

void SimDesign::validate() const {
  if (n < 1 || n_test < 0) throw InvalidArgument("simulation sizes must be positive");
  const int c = static_cast<int>(error_case);
  if (c < 1 || c > 6) throw InvalidArgument("error case must be 1..6");
  if ((example == Example::Ex1 || example == Example::Ex2) && p < 5) {
    throw InvalidArgument("Examples 1 and 2 need p >= 5 covariates");
  }
  if (!allow_any_pairing) {
    if (example == Example::Ex1 && c > 3) {
      throw InvalidArgument("Example 1 is paired with error cases 1-3");
    }
    if (example == Example::Ex2 && c < 4) {
      throw InvalidArgument("Example 2 is paired with error cases 4-6");
    }
  }
}

Eigen::VectorXd ex1_beta(double u, int p) {
  if (p < 5) throw InvalidArgument("Example 1 coefficients need p >= 5");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p - 1);
  const double g = std::exp(-0.5 * u * u);
  b[0] = u * (1.0 - 0.5 * u);
  b[1] = std::exp(u / 2.0 - 0.5);
  b[2] = std::sin(kTwoPi * u) - u;
  b[3] = 2.0 * g / (g + 1.0);
  return b;
}

Eigen::MatrixXd ar1_covariance(int dim, double rho) {
  if (dim < 1) throw InvalidArgument("covariance dimension must be positive");
  Eigen::MatrixXd c(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int l = 0; l < dim; ++l) c(j, l) = std::pow(rho, std::abs(j - l));
  }
  return c;
}

Eigen::MatrixXd gaussian_copula_covariates(int n, int dim, double rho, CounterRng& rng) {
  const Eigen::MatrixXd lower = ar1_covariance(dim, rho).llt().matrixL();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) z(i, j) = normal(rng);
  }
  return z * lower.transpose();
}

Eigen::MatrixXd gaussian_copula_covariates(int n, int dim, double rho, std::uint64_t seed) {
  CounterRng rng(seed);
  return gaussian_copula_covariates(n, dim, rho, rng);
}

double draw_error(ErrorCase error_case, CounterRng& rng) {
  switch (error_case) {
    case ErrorCase::Case1:
      return std::normal_distribution<double>()(rng);
    case ErrorCase::Case2:
      return std::student_t_distribution<double>(3.0)(rng);
    case ErrorCase::Case3: {
      const bool wide = std::bernoulli_distribution(0.05)(rng);
      return std::normal_distribution<double>(0.0, wide ? 5.0 : 1.0)(rng);
    }
    case ErrorCase::Case4:
      return std::chi_squared_distribution<double>(1.0)(rng);
    case ErrorCase::Case5:
      return std::gamma_distribution<double>(1.0, 1.0)(rng);
    case ErrorCase::Case6:
      return std::lognormal_distribution<double>(0.5, 0.5)(rng);
  }
  throw InvalidArgument("unknown error case");
}

double error_quantile(ErrorCase error_case, double tau) {
  const QuantileLevel level(tau);
  switch (error_case) {
    case ErrorCase::Case1:
      return normal_quantile(level.value());
    case ErrorCase::Case2:
      return invert_cdf(student_t3_cdf, tau);
    case ErrorCase::Case3:
      return invert_cdf(normal_mixture_cdf, tau);
    case ErrorCase::Case4: {
      const double z = normal_quantile(0.5 * (1.0 + tau));
      return z * z;
    }
    case ErrorCase::Case5:
      return -std::log1p(-tau);
    case ErrorCase::Case6:
      return std::exp(0.5 + 0.5 * normal_quantile(tau));
  }
  throw InvalidArgument("unknown error case");
}

GeneratedSample generate(const SimDesign& design) {
  design.validate();
  GeneratedSample out;
  CounterRng train_rng = CounterRng::substream(design.seed, 0);
  CounterRng test_rng = CounterRng::substream(design.seed, 1);
  out.train = draw_dataset(design, design.n, train_rng);
  out.test = draw_dataset(design, design.n_test, test_rng);
  const Example ex = design.example;
  const ErrorCase ec = design.error_case;
  out.true_quantile = [ex, ec](std::span<const double> x, double tau) {
    return location(ex, x) + scale(ex, x) * error_quantile(ec, tau);
  };
  return out;
}

}  // namespace jvcqma::sim
