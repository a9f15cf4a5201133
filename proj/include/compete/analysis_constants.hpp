#pragma once

// Embedding constants S_r, the first p-Laplacian eigenvalue, the hypothesis
// checkers and the coercivity radius.
//
// All estimates maximize (or minimize) over a finite element subspace, so the
// raw numbers are one-sided: S_r estimates are lower bounds of the true
// constant and λ_{1,p} estimates are upper bounds. Reported S_r values are the
// raw value times a safety factor.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "compete/discretization.hpp"
#include "json.hpp"

namespace compete {

struct IntrinsicCertificate;

/// p* = Np/(N-p) when p < N, otherwise the configured finite surrogate
/// (default 2p).
double critical_exponent_surrogate(int N, double p, std::optional<double> configured = std::nullopt);

struct ConstantEstimate {
  double raw = 0.0;
  double value = 0.0;  // raw * safety
  double safety = 1.0;
  std::string provenance;  // "maximization", "rayleigh", "analytic", "supplied"
  bool converged = true;
  int iterations = 0;
};

class EmbeddingConstants {
 public:
  EmbeddingConstants(int N, double p, double p_hat, double safety = 1.1);

  int N() const noexcept { return N_; }
  double p() const noexcept { return p_; }
  double p_hat() const noexcept { return p_hat_; }
  double safety() const noexcept { return safety_; }

  void set(double r, ConstantEstimate estimate);
  /// Stores `value` as both raw and inflated value (used for supplied constants).
  void set_exact(double r, double value);
  bool has(double r) const;
  /// Inflated S_r; throws PreconditionError naming r when absent.
  double S(double r) const;
  const ConstantEstimate& estimate(double r) const;
  const std::vector<std::pair<double, ConstantEstimate>>& entries() const noexcept { return S_; }

  std::optional<ConstantEstimate> lambda1p;
  /// Whole-space constant of the convolution certificate. When unset, S_{p̂}
  /// of the domain is used as the surrogate and `whole_space_surrogate` is set.
  std::optional<double> whole_space_S;
  double whole_space() const;
  bool whole_space_surrogate() const noexcept { return !whole_space_S.has_value(); }

  nlohmann::json to_json() const;

 private:
  int N_;
  double p_;
  double p_hat_;
  double safety_;
  std::vector<std::pair<double, ConstantEstimate>> S_;
};

struct EigenEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> history;  // quotient per accepted step
};

struct DescentOptions {
  int max_iterations = 2000;
  double tol = 1e-12;
};

/// Rayleigh-quotient minimization of ‖∇u‖_p^p/‖u‖_p^p on `level` by
/// H^1_0-preconditioned gradient descent with backtracking, started from `start`
/// (the interpolant of a sine bump when empty). Iterates are monotone.
EigenEstimate minimize_rayleigh(const SpaceHierarchy& h, int level, double p,
                                const DescentOptions& opts, const FEFunction* start = nullptr);

/// λ_{1,p} on the finest level.
EigenEstimate estimate_lambda1p(const SpaceHierarchy& h, double p, int iters = 2000, double tol = 1e-12);

/// λ_{1,p} on every level, each warm-started from the prolongated previous
/// minimizer, so the sequence is nonincreasing.
std::vector<EigenEstimate> estimate_lambda1p_levels(const SpaceHierarchy& h, double p,
                                                    int iters = 2000, double tol = 1e-12);

struct EmbeddingOptions {
  int starts = 8;
  double safety = 1.1;
  int max_iterations = 2000;
  double tol = 1e-12;
  std::uint64_t seed = 0;
};

/// Maximizes ‖u‖_r over {‖∇u‖_p = 1} on the finest level with multi-start
/// preconditioned ascent. Start 0 is a sine bump; the others are seeded random
/// sine combinations. Ties go to the lowest start index.
ConstantEstimate estimate_embedding_constant(const SpaceHierarchy& h, double r, double p,
                                             const EmbeddingOptions& opts = {});

struct HypothesisReport {
  std::string name;  // "H2", "T2" or "T3"
  double value = 0.0;
  double margin = 0.0;  // 1 - value
  bool pass = false;
  std::map<std::string, double> constants;

  nlohmann::json to_json() const;
};

/// a1 K1 S_{p̂/(p̂-α)} + a2 K2 S_{p/(p-β)} < 1.
HypothesisReport check_h2(double a1, double a2, const IntrinsicCertificate& cert,
                          const EmbeddingConstants& constants, double alpha, double beta);
/// max{2^{p-2},1}(a1 S_{p̂}^{p-1} S_{p̂/(p̂-p+1)} + a2 S_1) < 1, evaluated as
/// check_h2 with the boundary-lift constants at u_0 = 0.
HypothesisReport check_t2_condition(double a1, double a2, double p, const EmbeddingConstants& constants);
/// N^{p-1}‖ρ‖_1^{p-1}(a1 S^{p-1} S_{p̂/(p̂-p+1)} + a2 S_1) < 1, evaluated as
/// check_h2 with the convolution constants.
HypothesisReport check_t3_condition(double a1, double a2, double p, int N, double kernel_l1,
                                    const EmbeddingConstants& constants);

/// The smallness quantity κ = a1 K1 S_{p̂/(p̂-α)} + a2 K2 S_{p/(p-β)}.
double h2_value(double a1, double a2, double K1, double K2, double S_alpha, double S_beta);

/// c0 = S_r‖σ‖_{r'} + a1 K3 S_{p̂/(p̂-α)} + a2 K3 S_{p/(p-β)}: the constant of
/// the linear term in the coercivity estimate.
double coercivity_constant(double S_r, double sigma_norm, double a1, double a2, double K3,
                           double S_alpha, double S_beta);

/// Largest root R of g(t) = (1-κ)t^{p-1} - |Ω|^{(p-q)/p} t^{q-1} - c0.
double coercivity_radius(double kappa, double omega_measure, double p, double q, double c0);
/// g(t) above.
double coercivity_function(double t, double kappa, double omega_measure, double p, double q, double c0);

}  // namespace compete
