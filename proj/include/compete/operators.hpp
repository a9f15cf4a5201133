#pragma once

// Competing operator -Δp + Δq (plain and lift-shifted), the convection
// right-hand side f(x, T(u), ∇T(u)) and its (H1) growth envelope.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "compete/discretization.hpp"
#include "json.hpp"

namespace compete {

/// Exponents of -Δp + Δq. `q_weight` scales the +Δq term (1 for the competing
/// operator); `eps_reg` regularizes the Jacobian coefficients only.
struct CompetingOperator {
  double p = 3.0;
  double q = 2.0;
  double q_weight = 1.0;
  double eps_reg = 0.0;

  /// Throws PreconditionError unless 1 < q < p and eps_reg >= 0.
  void validate() const;
};

/// Nonnegative weight σ(x) from a closed-form catalog or nodal samples (1D).
///
/// Catalog: `zero`, `constant` {value}, `abs_linear` {a, b} meaning
/// a|1-2x|+b, `nodal` {x: [...], values: [...]} (piecewise linear, zero outside).
class WeightFunction {
 public:
  WeightFunction() = default;
  static WeightFunction zero();
  static WeightFunction constant(double value);
  static WeightFunction abs_linear(double a, double b);
  static WeightFunction nodal(std::vector<double> x, std::vector<double> values);
  static WeightFunction from_json(const nlohmann::json& j);

  double operator()(const Point& x) const;
  nlohmann::json to_json() const;
  const std::string& kind() const noexcept { return kind_; }
  bool operator==(const WeightFunction&) const = default;

 private:
  std::string kind_ = "zero";
  double a_ = 0.0;
  double b_ = 0.0;
  std::vector<double> xs_;
  std::vector<double> values_;
};

/// |f(x,s,ξ)| <= σ(x) + a1|s|^α + a2|ξ|^β with σ ∈ L^{r'}.
struct GrowthEnvelope {
  WeightFunction sigma;
  double a1 = 0.0;
  double a2 = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  double r = 2.0;

  double bound(const Point& x, double s, const Vec2& xi) const;
  /// Checks α ∈ (0, p̂-1), β ∈ (0, p/p̂'), r ∈ [1, p̂), a1, a2 >= 0.
  void validate(double p, double p_hat) const;
  /// Hölder conjugate r' (infinity when r = 1).
  double r_conjugate() const;
  /// ‖σ‖_{r'} by the level's quadrature (sup over quadrature points and nodes when r = 1).
  double sigma_norm(const Level& level) const;

  nlohmann::json to_json() const;
  static GrowthEnvelope from_json(const nlohmann::json& j, double p);
  bool operator==(const GrowthEnvelope&) const = default;
};

/// Closed-form exact solution attached to manufactured catalog entries.
struct ExactSolution {
  std::function<double(const Point&)> value;
  std::function<Vec2(const Point&)> gradient;
};

/// Convection term f(x, s, ξ) together with the envelope it claims to satisfy.
class ConvectionTerm {
 public:
  using Evaluator = std::function<double(const Point&, double, const Vec2&)>;
  struct Partials {
    double ds = 0.0;
    Vec2 dxi{0.0, 0.0};
  };
  using PartialsFn = std::function<Partials(const Point&, double, const Vec2&)>;

  /// Built-in catalog entry. `p` supplies default exponents (p-1) for
  /// envelopes of entries that do not depend on s or ξ.
  static ConvectionTerm from_catalog(const std::string& kind, const nlohmann::json& params, double p);
  /// Extension point for evaluators outside the catalog. Without `partials`,
  /// derivatives are taken by central differences.
  static ConvectionTerm custom(std::string name, Evaluator f, GrowthEnvelope envelope,
                               bool exactly_bounded, PartialsFn partials = {});

  double operator()(const Point& x, double s, const Vec2& xi) const { return f_(x, s, xi); }
  Partials partials(const Point& x, double s, const Vec2& xi) const;

  const std::string& kind() const noexcept { return kind_; }
  const nlohmann::json& params() const noexcept { return params_; }
  const GrowthEnvelope& envelope() const noexcept { return envelope_; }
  void set_envelope(GrowthEnvelope env) { envelope_ = std::move(env); }
  bool exactly_bounded() const noexcept { return exactly_bounded_; }
  /// False when f depends on x only; Newton can then skip the f-derivative.
  bool depends_on_solution() const noexcept { return depends_on_solution_; }
  const std::optional<ExactSolution>& exact_solution() const noexcept { return exact_; }

 private:
  std::string kind_;
  nlohmann::json params_;
  Evaluator f_;
  PartialsFn partials_;
  GrowthEnvelope envelope_;
  bool exactly_bounded_ = true;
  bool depends_on_solution_ = true;
  std::optional<ExactSolution> exact_;
};

/// Component i: ⟨-Δp(u+u0) + Δq(u+u0), φ_i⟩ - ∫ f(x, T(u), ∇T(u)) φ_i.
struct ResidualVector {
  int level = 0;
  Eigen::VectorXd values;
};

/// Elementwise flux (|g|^{p-2} - q_weight |g|^{q-2}) g; zero at g = 0.
Vec2 competing_flux(const Vec2& g, const CompetingOperator& op);

/// ⟨-Δp w + Δq w, v⟩ with w = u + lift, evaluated exactly per element.
double competing_pairing(const SpaceHierarchy& h, const FEFunction& u, const FEFunction& v,
                         const CompetingOperator& op, const NodalFunction* lift = nullptr);

/// ∫ f(x, T(u), ∇T(u)) v dx by the level's quadrature.
double convection_integral(const SpaceHierarchy& h, const FEFunction& v,
                           const QuadratureSamples& t_image, const ConvectionTerm& f);

ResidualVector assemble_residual(const SpaceHierarchy& h, const FEFunction& u,
                                 const QuadratureSamples& t_image, const ConvectionTerm& f,
                                 const CompetingOperator& op, const NodalFunction* lift = nullptr);

/// How the convection term enters the Jacobian.
enum class ConvectionLinearization {
  exact,   // T is identity or a shift: ∂T(u)/∂u = I
  frozen,  // chord rule: f-term treated as constant
};

/// Directional derivative of assemble_residual at u, with regularized
/// coefficients (|∇w|² + ε²)^{(p-2)/2}.
Eigen::SparseMatrix<double> assemble_jacobian(const SpaceHierarchy& h, const FEFunction& u,
                                              const QuadratureSamples& t_image,
                                              const ConvectionTerm& f, const CompetingOperator& op,
                                              ConvectionLinearization mode,
                                              const NodalFunction* lift = nullptr);

/// One (x, s, ξ) probe for growth_envelope_check.
struct ConvectionProbe {
  Point x;
  double s;
  Vec2 xi;
};

struct EnvelopeReport {
  double worst_margin = 0.0;  // max(|f| - envelope); <= 0 means the envelope holds
  std::size_t worst_index = 0;
  std::size_t samples = 0;
};

EnvelopeReport growth_envelope_check(const ConvectionTerm& f, const std::vector<ConvectionProbe>& samples);
EnvelopeReport growth_envelope_check(const ConvectionTerm& f, const GrowthEnvelope& envelope,
                                     const std::vector<ConvectionProbe>& samples);

/// Right-hand side of the Hölder estimate for |∫ f(·,T(u),∇T(u)) v|:
/// ‖σ‖_{r'}‖v‖_r + a1‖T(u)‖_{p̂}^α‖v‖_{p̂/(p̂-α)} + a2‖∇T(u)‖_p^β‖v‖_{p/(p-β)}.
double lemma_l1_bound(const SpaceHierarchy& h, const FEFunction& u, const FEFunction& v,
                      const QuadratureSamples& t_image, const GrowthEnvelope& env, double p,
                      double p_hat);

}  // namespace compete
