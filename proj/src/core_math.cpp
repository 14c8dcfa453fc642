#include "jvcqma/core_math.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "jvcqma/errors.hpp"

namespace jvcqma {

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw InvalidArgument("quantile level must lie in (0, 1), got " + std::to_string(tau));
  }
}

KernelKind parse_kernel(std::string_view name) {
  if (name == "gauss" || name == "gaussian") return KernelKind::Gaussian;
  if (name == "epanechnikov" || name == "epa") return KernelKind::Epanechnikov;
  throw InvalidArgument("unknown kernel '" + std::string(name) + "'");
}

std::string_view kernel_name(KernelKind kind) noexcept {
  return kind == KernelKind::Gaussian ? "gauss" : "epanechnikov";
}

double check_loss(QuantileLevel tau, double u) {
  if (!std::isfinite(u)) throw InvalidArgument("check_loss: non-finite residual");
  return u > 0.0 ? tau.value() * u : (tau.value() - 1.0) * u;
}

double check_subgradient(QuantileLevel tau, double u) noexcept {
  return u > 0.0 ? tau.value() : tau.value() - 1.0;
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kernel_eval(KernelKind kind, double u) noexcept {
  switch (kind) {
    case KernelKind::Gaussian:
      return normal_pdf(u);
    case KernelKind::Epanechnikov: {
      double v = 1.0 - u * u;
      return v > 0.0 ? 0.75 * v : 0.0;
    }
  }
  return 0.0;
}

double kernel_scaled(KernelKind kind, double h, double u) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidBandwidth("bandwidth must be positive and finite, got " + std::to_string(h));
  }
  return kernel_eval(kind, u / h) / h;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
  // AS241 PPND16.
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double quantile_adjust_factor(QuantileLevel tau) {
  const double t = tau.value();
  // Evaluate at min(tau, 1 - tau) so the factor is exactly symmetric.
  const double tl = t <= 0.5 ? t : 1.0 - t;
  const double phi = normal_pdf(normal_quantile(tl));
  return std::pow(tl * (1.0 - tl) / (phi * phi), 0.2);
}

}  // namespace jvcqma
