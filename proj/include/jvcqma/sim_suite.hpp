#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "jvcqma/dataset.hpp"
#include "jvcqma/rng.hpp"

namespace jvcqma::sim {

enum class Example { Ex1 = 1, Ex2, Ex3, Ex4 };
enum class ErrorCase { Case1 = 1, Case2, Case3, Case4, Case5, Case6 };

Example parse_example(std::string_view text);
ErrorCase parse_error_case(std::string_view text);

struct SimDesign {
  Example example = Example::Ex1;
  ErrorCase error_case = ErrorCase::Case1;
  int n = 200;
  /// Number of covariates for Ex1/Ex2 (5 or 10 in the published designs,
  /// any p >= 5 accepted). Ex3/Ex4 always use 6 continuous + 4 binomial.
  int p = 5;
  std::uint64_t seed = 1;
  int n_test = 100;
  /// Accept error cases outside the published pairing (Ex1: 1-3, Ex2: 4-6).
  bool allow_any_pairing = false;

  void validate() const;
};

/// Q_tau(Y | X = x) of the generating model.
using TrueQuantileFn = std::function<double(std::span<const double> x, double tau)>;

struct GeneratedSample {
  Dataset train;
  Dataset test;
  TrueQuantileFn true_quantile;
};

/// Train and test sets come from substreams 0 and 1 of `design.seed`.
GeneratedSample generate(const SimDesign& design);

/// 0.5^{|j - l|}-type AR(1) correlation matrix.
Eigen::MatrixXd ar1_covariance(int dim, double rho);

/// n draws of N(0, ar1_covariance(dim, rho)) through its Cholesky factor.
Eigen::MatrixXd gaussian_copula_covariates(int n, int dim, double rho, CounterRng& rng);
Eigen::MatrixXd gaussian_copula_covariates(int n, int dim, double rho, std::uint64_t seed);

double draw_error(ErrorCase error_case, CounterRng& rng);
/// tau-quantile of the error distribution.
double error_quantile(ErrorCase error_case, double tau);

/// Coefficient functions of Example 1, length p - 1.
Eigen::VectorXd ex1_beta(double u, int p);

}  // namespace jvcqma::sim
