#pragma once

// Level-by-level Galerkin solve of -Δp u + Δq u = f(x, T(u), ∇T(u)).
//
// Each level is a finite-dimensional zero problem A_n(u) = 0 posed inside the
// ball ‖∇u‖_p <= R, where R comes from the coercivity estimate. Zeros are
// found by damped Newton with a homotopy fallback; the sphere condition
// ⟨A_n(v), v⟩ >= 0 on ‖∇v‖_p = R is checked by sampling.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "compete/analysis_constants.hpp"
#include "compete/discretization.hpp"
#include "compete/intrinsic.hpp"
#include "compete/operators.hpp"
#include "json.hpp"

namespace compete {

// ---------------------------------------------------------------- zero finder

/// A continuous map F on R^d together with the norm of the ball it lives in.
struct ZeroProblem {
  Eigen::Index dimension = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
  /// Optional; forward differences are used when empty.
  std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)> jacobian;
  /// Ball norm; Euclidean when empty. Must be positively homogeneous.
  std::function<double(const Eigen::VectorXd&)> norm;
};

struct BrouwerOptions {
  double tol = 1e-10;
  int max_newton = 100;
  int max_depth = 30;       // halvings of the continuation step before giving up
  double initial_dt = 0.25;  // first continuation step
  double armijo = 1e-4;
  double min_step = 1e-12;
  std::optional<Eigen::VectorXd> x0;  // Newton start; 0 when absent
  bool continuation = true;           // false: Newton from x0 (and 0) only
};

struct BrouwerResult {
  Eigen::VectorXd v;  // converged zero, or the best iterate on failure
  double residual_sup = 0.0;
  double norm = 0.0;
  bool converged = false;
  int newton_iterations = 0;
  int continuation_stages = 0;
  std::vector<double> history;  // residual sup per Newton step
  std::string message;
};

/// Zero of F inside {‖v‖ <= R}. Never returns an unconverged iterate as a
/// success: failures carry `converged = false` and the best iterate seen.
BrouwerResult brouwer_zero(const ZeroProblem& F, double R, const BrouwerOptions& opts = {});

// ---------------------------------------------------------------- problem

enum class HypothesisPolicy { refuse, warn };

struct SolverOptions {
  double tol = 0.0;  // 0: 1e-10 in 1D, 1e-8 in 2D
  int max_newton = 100;
  int max_depth = 30;
  int outer_max = 50;
  double outer_damping = 0.5;
  int sphere_samples = 1000;
  int test_set_size = 16;
  int constant_starts = 8;
  int constant_iterations = 2000;

  double tolerance(int dimension) const { return tol > 0.0 ? tol : (dimension == 1 ? 1e-10 : 1e-8); }
};

struct Problem {
  CompetingOperator op;
  ConvectionTerm f = ConvectionTerm::from_catalog("zero", nlohmann::json::object(), 3.0);
  IntrinsicOperator T;
  std::optional<double> p_hat_override;
  double safety = 1.1;
  HypothesisPolicy policy = HypothesisPolicy::refuse;
  SolverOptions solver;
  std::uint64_t seed = 0;

  double p_hat(int N) const { return critical_exponent_surrogate(N, op.p, p_hat_override); }
};

/// Exponents r whose S_r the problem's checks need: r, p̂, p̂/(p̂-α),
/// p/(p-β), 1 and p.
std::vector<double> required_exponents(const Problem& problem, int N);

/// λ_{1,p} and every required S_r, estimated on the finest level.
EmbeddingConstants estimate_problem_constants(const Problem& problem, const SpaceHierarchy& h);

// ---------------------------------------------------------------- level solve

struct SphereCertificate {
  int samples = 0;
  int negatives = 0;
  double min_pairing = 0.0;  // min ⟨A_n(v), v⟩ over the samples
};

/// Samples ⟨A_n(v), v⟩ at random v with ‖∇v‖_p = R on level n.
SphereCertificate sphere_certificate(const Problem& problem, const SpaceHierarchy& h, int n, double R,
                                     int samples, std::uint64_t seed);

struct LevelSolve {
  int level = 0;
  FEFunction u;
  double residual_sup = 0.0;
  double grad_norm_p = 0.0;
  double R = 0.0;
  bool converged = false;
  int newton_iterations = 0;
  int continuation_stages = 0;
  int outer_iterations = 0;
  SphereCertificate sphere;
  std::string message;
};

/// Galerkin solve on level n inside the ball of radius R (infinity disables
/// the ball). `warm` is prolongated to level n and used as the Newton start.
LevelSolve solve_level(const Problem& problem, const SpaceHierarchy& h, int n, double R,
                       const FEFunction* warm = nullptr);

/// Residual of the level-n equation at u, with T applied to u.
ResidualVector level_residual(const Problem& problem, const SpaceHierarchy& h, const FEFunction& u);

// ---------------------------------------------------------------- diagnostics

struct D1Entry {
  int level = 0;
  double a = 0.0;         // max_j |∫ φ_j (u_n - u)| / ‖φ_j‖_2
  double b = 0.0;         // max_j |⟨residual of u_n on the finest level, φ_j⟩| / ‖∇φ_j‖_p
  double c_strong = 0.0;  // ⟨-Δp u_n + Δq u_n, u_n - u⟩
  double c_full = 0.0;    // c_strong - ∫ f(T(u_n)) (u_n - u)
  double f_integral = 0.0;
};

struct D1Diagnostics {
  std::vector<D1Entry> entries;  // one per level below the finest
};

/// Finest-level test functions: the first `test_set_size` hats and the
/// interpolants of sin(kπx), k = 1..4.
std::vector<FEFunction> d1_test_set(const SpaceHierarchy& h, int test_set_size);

D1Diagnostics d1_diagnostics(const Problem& problem, const SpaceHierarchy& h,
                             const std::vector<LevelSolve>& solves, const FEFunction& u,
                             int test_set_size);

// ---------------------------------------------------------------- hierarchy run

enum class RunStatus { ok, hypothesis_failed, solver_failed };

struct LevelRecord {
  LevelSolve solve;
  double mesh_size = 0.0;
  double apriori_margin = 0.0;  // R - ‖∇u_n‖_p
  double energy_defect = 0.0;   // |⟨A_n(u_n), u_n⟩|
  double energy_bound = 0.0;    // tol · ‖u_n‖_coeff · dim
  std::optional<D1Entry> diag;
};

struct HierarchyResult {
  RunStatus status = RunStatus::ok;
  std::string message;
  EmbeddingConstants constants{1, 3.0, 6.0};
  std::optional<IntrinsicCertificate> certificate;
  std::vector<HypothesisReport> hypotheses;
  double kappa = 0.0;
  double c0 = 0.0;
  double R = 0.0;  // infinity when (H2) fails under the warn policy
  std::vector<LevelRecord> levels;
  std::vector<double> increments;  // ‖∇(u_{n+1} - u_n)‖_p
  bool non_cauchy = false;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Runs every level of `h`. Constants are estimated unless `constants` is given.
HierarchyResult run_hierarchy(const Problem& problem, const SpaceHierarchy& h,
                              const EmbeddingConstants* constants = nullptr);

}  // namespace compete
