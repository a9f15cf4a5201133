#include <cmath>
#include <numbers>

#include "compete/discretization.hpp"
#include "compete/error.hpp"

namespace compete {

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int points) {
  if (points < 1) throw PreconditionError("Gauss-Legendre rule needs at least one point");
  const auto n = static_cast<std::size_t>(points);
  std::vector<double> x(n), w(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= points; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = points * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    w[n - 1 - i] = w[i];
  }
  return {x, w};
}

ReferenceRule segment_rule(int points) {
  auto [x, w] = gauss_legendre(points);
  ReferenceRule rule;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = 0.5 * (1.0 + x[i]);
    rule.barycentric.push_back({1.0 - xi, xi, 0.0});
    rule.weights.push_back(0.5 * w[i]);
  }
  return rule;
}

ReferenceRule triangle_rule(int points) {
  auto [x, w] = gauss_legendre(points);
  ReferenceRule rule;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = 0.5 * (1.0 + x[i]);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double eta = 0.5 * (1.0 + x[j]);
      const double px = xi;
      const double py = eta * (1.0 - xi);
      rule.barycentric.push_back({1.0 - px - py, px, py});
      // (1 - xi) is the collapse Jacobian; factor 2 normalizes the reference area.
      rule.weights.push_back(2.0 * (0.5 * w[i]) * (0.5 * w[j]) * (1.0 - xi));
    }
  }
  return rule;
}

}  // namespace compete
