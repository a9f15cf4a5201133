#pragma once

// Intrinsic operators T: W_0^{1,p} -> W^{1,p} composed inside the convection
// term, and their growth certificates
//   ‖T(u)‖_{p̂}^α <= K1 ‖∇u‖_p^{p-1} + K3,   ‖∇T(u)‖_p^β <= K2 ‖∇u‖_p^{p-1} + K3.
//
// Identity constants are not given in closed form by the theory; they follow
// from ‖u‖_{p̂} <= S_{p̂}‖∇u‖_p and the split t^a <= t^{p-1} + 1 for a <= p-1:
//   K1 = S_{p̂}^α, K2 = 1, K3 = K1 + 1.

#include <span>
#include <string>

#include "compete/discretization.hpp"
#include "json.hpp"

namespace compete {

class EmbeddingConstants;

/// Closed-form convolution kernel ρ with exact ‖ρ‖_1 = mass. In 2D the kernel
/// is the tensor product of the normalized 1D profile, scaled by mass.
struct Kernel {
  enum class Shape { box, hat, gaussian };
  Shape shape = Shape::box;
  double width = 0.25;     // full support width
  double mass = 1.0;       // ‖ρ‖_1
  double std_dev = 0.0;    // gaussian only; 0 selects width / 4

  /// Normalized 1D profile (unit mass) at t.
  double profile(double t) const;
  double l1_norm() const noexcept { return mass; }
  void validate() const;

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);
  bool operator==(const Kernel&) const = default;
};

/// Closed-form boundary datum u_0 ∈ W^{1,p}.
///   affine: a + b x + c y;   cosine: offset + amplitude cos(frequency π x)
struct LiftProfile {
  std::string kind = "affine";
  double a = 0.0, b = 0.0, c = 0.0;
  double amplitude = 0.0, frequency = 1.0, offset = 0.0;

  double operator()(const Point& x) const;
  nlohmann::json to_json() const;
  static LiftProfile from_json(const nlohmann::json& j);
  bool operator==(const LiftProfile&) const = default;
};

class IntrinsicOperator {
 public:
  enum class Kind { identity, boundary_lift, convolution };

  static IntrinsicOperator identity();
  static IntrinsicOperator boundary_lift(LiftProfile u0);
  /// `refine_factor`: 2D stencil spacing is (finest mesh size)/refine_factor; 1D
  /// integrates piecewise between kinks and ignores it.
  /// `window`: largest admissible kernel support; 0 means the domain extent.
  static IntrinsicOperator convolution(Kernel kernel, int refine_factor = 4, double window = 0.0);

  static IntrinsicOperator from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Kind kind() const noexcept { return kind_; }
  std::string kind_name() const;
  const LiftProfile& lift() const noexcept { return lift_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  int refine_factor() const noexcept { return refine_factor_; }
  double window() const noexcept { return window_; }
  /// Identity and lift have ∂T(u)/∂u = I, so Newton can differentiate through them.
  bool is_local() const noexcept { return kind_ != Kind::convolution; }

  /// Interpolant of u_0 on a level (zero unless kind is boundary_lift).
  NodalFunction lift_nodal(const SpaceHierarchy& h, int level) const;

  bool operator==(const IntrinsicOperator&) const = default;

 private:
  Kind kind_ = Kind::identity;
  LiftProfile lift_;
  Kernel kernel_;
  int refine_factor_ = 4;
  double window_ = 0.0;
};

/// Values and gradients of T(u) at the quadrature points of u's level. For
/// convolution, u is extended by zero outside the domain.
QuadratureSamples apply(const IntrinsicOperator& T, const SpaceHierarchy& h, const FEFunction& u);

/// ρ*(∇u) at the quadrature points (the gradient half of `apply` for convolution).
QuadratureSamples convolve_gradient(const IntrinsicOperator& T, const SpaceHierarchy& h,
                                    const FEFunction& u);

/// Convolution value at an arbitrary point (zero-extended u).
double convolve_at(const IntrinsicOperator& T, const SpaceHierarchy& h, const FEFunction& u,
                   const Point& x);

struct IntrinsicCertificate {
  double K1 = 0.0;
  double K2 = 0.0;
  double K3 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::string provenance;
};

/// max{2^{p-2}, 1}.
double lift_growth_factor(double p);
/// Boundary-lift constants (α = β = p-1).
IntrinsicCertificate lift_certificate(double p, double s_phat, double u0_phat_norm, double u0_grad_norm);
/// Convolution constants (α = β = p-1): K1 = S^{p-1}N^{p-1}‖ρ‖_1^{p-1}, K2 = N^{p-1}‖ρ‖_1^{p-1}, K3 = 0.
IntrinsicCertificate convolution_certificate(double p, int N, double kernel_l1, double s_whole);
/// Identity constants for α, β <= p-1.
IntrinsicCertificate identity_certificate(double p, double alpha, double beta, double s_phat);

/// Analytic certificate for T. Lift norms of u_0 are maximized over all levels.
IntrinsicCertificate certificate(const IntrinsicOperator& T, const SpaceHierarchy& h, double p,
                                 double alpha, double beta, const EmbeddingConstants& constants);

struct CertificateCheck {
  double worst_margin = 0.0;
  double value_margin = 0.0;     // max ‖T(u)‖_{p̂}^α - K1‖∇u‖^{p-1} - K3
  double gradient_margin = 0.0;  // max ‖∇T(u)‖_p^β - K2‖∇u‖^{p-1} - K3
  std::size_t trials = 0;
  std::size_t worst_trial = 0;
};

CertificateCheck certificate_check(const IntrinsicOperator& T, const IntrinsicCertificate& cert,
                                   const SpaceHierarchy& h, std::span<const FEFunction> trials,
                                   double p, double p_hat);

}  // namespace compete
