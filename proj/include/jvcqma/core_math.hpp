#pragma once

#include <string_view>

namespace jvcqma {

/// A quantile level strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau);

  double value() const noexcept { return tau_; }

  friend bool operator==(QuantileLevel, QuantileLevel) = default;

 private:
  double tau_;
};

enum class KernelKind { Gaussian, Epanechnikov };

KernelKind parse_kernel(std::string_view name);
std::string_view kernel_name(KernelKind kind) noexcept;

/// rho_tau(u) = u * (tau - I(u <= 0)). Throws on non-finite u.
double check_loss(QuantileLevel tau, double u);

/// psi_tau(u) = tau - I(u <= 0); the closed inequality puts u = 0 on the
/// lower branch.
double check_subgradient(QuantileLevel tau, double u) noexcept;

double kernel_eval(KernelKind kind, double u) noexcept;

/// K(u / h) / h. Throws InvalidBandwidth unless h > 0.
double kernel_scaled(KernelKind kind, double h, double u);

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;

/// Inverse of the standard normal CDF (Wichura's AS241, ~1e-16 relative).
double normal_quantile(double p);

/// {tau(1 - tau) / phi^2(Phi^{-1}(tau))}^{1/5}, the factor mapping a
/// least-squares bandwidth to a quantile-regression bandwidth.
double quantile_adjust_factor(QuantileLevel tau);

}  // namespace jvcqma
