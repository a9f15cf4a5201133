#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "compete/analysis_constants.hpp"
#include "compete/error.hpp"
#include "compete/intrinsic.hpp"

namespace compete {

namespace {

bool same_r(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::string exponent_key(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", r);
  return buf;
}

// P1 stiffness matrix on the free nodes; used as the H^1_0 preconditioner.
Eigen::SparseMatrix<double> stiffness(const Level& lv) {
  const DomainMesh& m = lv.mesh();
  const int nv = m.vertices_per_element();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto t = m.element(e);
    for (int a = 0; a < nv; ++a) {
      const int i = lv.free_index(t[a]);
      if (i < 0) continue;
      for (int b = 0; b < nv; ++b) {
        const int j = lv.free_index(t[b]);
        if (j < 0) continue;
        trip.emplace_back(i, j, m.element_measure(e) * dot(lv.shape_gradient(e, a), lv.shape_gradient(e, b)));
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(lv.dim());
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

// ∫|∇u|^p and its coefficient gradient.
double gradient_power(const Level& lv, const Eigen::VectorXd& c, double p, Eigen::VectorXd* grad) {
  const DomainMesh& m = lv.mesh();
  const int nv = m.vertices_per_element();
  if (grad) grad->setZero(c.size());
  double total = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto t = m.element(e);
    Vec2 g{0.0, 0.0};
    for (int a = 0; a < nv; ++a) {
      const int i = lv.free_index(t[a]);
      if (i < 0) continue;
      g[0] += c[i] * lv.shape_gradient(e, a)[0];
      g[1] += c[i] * lv.shape_gradient(e, a)[1];
    }
    const double s = std::sqrt(dot(g, g));
    total += m.element_measure(e) * std::pow(s, p);
    if (grad && s > 0.0) {
      const double w = p * m.element_measure(e) * std::pow(s, p - 2.0);
      for (int a = 0; a < nv; ++a) {
        const int i = lv.free_index(t[a]);
        if (i >= 0) (*grad)[i] += w * dot(g, lv.shape_gradient(e, a));
      }
    }
  }
  return total;
}

// ∫|u|^r and its coefficient gradient.
double value_power(const Level& lv, const Eigen::VectorXd& c, double r, Eigen::VectorXd* grad) {
  const DomainMesh& m = lv.mesh();
  const int nv = m.vertices_per_element();
  if (grad) grad->setZero(c.size());
  double total = 0.0;
  for (std::size_t k = 0; k < lv.num_quad_points(); ++k) {
    const auto t = m.element(lv.quad_element(k));
    const auto& phi = lv.quad_shape(k);
    double u = 0.0;
    for (int a = 0; a < nv; ++a) {
      const int i = lv.free_index(t[a]);
      if (i >= 0) u += c[i] * phi[a];
    }
    const double au = std::abs(u);
    total += lv.quad_weight(k) * std::pow(au, r);
    if (grad && au > 0.0) {
      const double w = r * lv.quad_weight(k) * std::pow(au, r - 1.0) * (u > 0 ? 1.0 : -1.0);
      for (int a = 0; a < nv; ++a) {
        const int i = lv.free_index(t[a]);
        if (i >= 0) (*grad)[i] += w * phi[a];
      }
    }
  }
  return total;
}

// Minimizes a scale-invariant objective by H^1_0-preconditioned descent with
// Armijo backtracking. `eval` returns the objective and fills its gradient.
// The iterate is renormalized to ‖∇u‖_p = 1 after every accepted step.
struct DescentResult {
  Eigen::VectorXd c;
  double value;
  bool converged;
  int iterations;
  std::vector<double> history;
};

template <class Eval>
DescentResult preconditioned_descent(const Level& lv, double p, Eigen::VectorXd c, Eval eval, int max_iter,
                                     double tol) {
  const Eigen::SparseMatrix<double> K = stiffness(lv);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw Error("stiffness factorization failed");

  auto normalize = [&](Eigen::VectorXd& v) {
    const double g = std::pow(gradient_power(lv, v, p, nullptr), 1.0 / p);
    if (g > 0.0) v /= g;
  };
  normalize(c);
  Eigen::VectorXd grad(c.size());
  double val = eval(c, &grad);
  DescentResult out{c, val, false, 0, {val}};
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd d = -ldlt.solve(grad);
    const double slope = grad.dot(d);
    out.iterations = it + 1;
    if (-slope <= tol * std::max(1.0, std::abs(val))) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    Eigen::VectorXd trial;
    double tval = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      trial = c + step * d;
      tval = eval(trial, nullptr);
      if (std::isfinite(tval) && tval <= val + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No decrease at machine resolution: the iterate is stationary to rounding.
      out.converged = -slope <= std::sqrt(tol) * std::max(1.0, std::abs(val));
      break;
    }
    normalize(trial);
    Eigen::VectorXd tgrad(c.size());
    tval = eval(trial, &tgrad);
    const double change = val - tval;
    c = std::move(trial);
    grad = std::move(tgrad);
    val = tval;
    out.history.push_back(val);
    step = std::min(step * 2.0, 1e3);
    if (change >= 0.0 && change <= tol * std::max(1.0, std::abs(val))) {
      out.converged = true;
      break;
    }
  }
  out.c = std::move(c);
  out.value = val;
  return out;
}

FEFunction sine_bump(const SpaceHierarchy& h, int level, const std::vector<double>& coeffs) {
  const auto [lo, hi] = h.level(0).mesh().bounding_box();
  const int dim = h.dimension();
  return interpolate(h, level, [&, lo = lo, hi = hi](const Point& x) {
    double v = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const double f = static_cast<double>(k + 1) * std::numbers::pi;
      double s = std::sin(f * (x[0] - lo[0]) / (hi[0] - lo[0]));
      if (dim == 2) s *= std::sin(std::numbers::pi * (x[1] - lo[1]) / (hi[1] - lo[1]));
      v += coeffs[k] * s;
    }
    return v;
  });
}

}  // namespace

double critical_exponent_surrogate(int N, double p, std::optional<double> configured) {
  if (!(p > 1.0)) throw PreconditionError("p must exceed 1");
  if (p < N) return N * p / (N - p);
  if (configured) {
    if (!(*configured > p)) throw PreconditionError("configured critical surrogate must exceed p");
    return *configured;
  }
  return 2.0 * p;
}

// ---------------------------------------------------------------- constants table

EmbeddingConstants::EmbeddingConstants(int N, double p, double p_hat, double safety)
    : N_(N), p_(p), p_hat_(p_hat), safety_(safety) {
  if (!(safety > 0.0)) throw PreconditionError("safety factor must be positive");
}

void EmbeddingConstants::set(double r, ConstantEstimate estimate) {
  if (!(estimate.value > 0.0)) throw PreconditionError("S_" + exponent_key(r) + " must be positive");
  for (auto& [key, est] : S_)
    if (same_r(key, r)) {
      est = std::move(estimate);
      return;
    }
  S_.emplace_back(r, std::move(estimate));
  std::sort(S_.begin(), S_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

void EmbeddingConstants::set_exact(double r, double value) {
  set(r, ConstantEstimate{value, value, 1.0, "supplied", true, 0});
}

bool EmbeddingConstants::has(double r) const {
  return std::any_of(S_.begin(), S_.end(), [r](const auto& e) { return same_r(e.first, r); });
}

const ConstantEstimate& EmbeddingConstants::estimate(double r) const {
  for (const auto& [key, est] : S_)
    if (same_r(key, r)) return est;
  throw PreconditionError("embedding constant S_" + exponent_key(r) + " is not available");
}

double EmbeddingConstants::S(double r) const { return estimate(r).value; }

double EmbeddingConstants::whole_space() const { return whole_space_S ? *whole_space_S : S(p_hat_); }

nlohmann::json EmbeddingConstants::to_json() const {
  nlohmann::json S = nlohmann::json::object(), raw = nlohmann::json::object(), prov = nlohmann::json::object();
  for (const auto& [r, est] : S_) {
    S[exponent_key(r)] = est.value;
    raw[exponent_key(r)] = est.raw;
    prov[exponent_key(r)] = est.provenance;
  }
  nlohmann::json j{{"N", N_}, {"p", p_}, {"p_hat", p_hat_}, {"safety", safety_},
                   {"S", S}, {"S_raw", raw}, {"provenance", prov}};
  j["lambda1p"] = lambda1p ? nlohmann::json(lambda1p->value) : nlohmann::json(nullptr);
  if (lambda1p) j["lambda1p_converged"] = lambda1p->converged;
  j["whole_space_S"] = whole_space_S ? nlohmann::json(*whole_space_S) : nlohmann::json(nullptr);
  j["whole_space_surrogate"] = whole_space_surrogate();
  return j;
}

// ---------------------------------------------------------------- estimators

namespace {

// Q = G/L with G = ∫|∇u|^p, L = ∫|u|^p.
DescentResult rayleigh_descent(const Level& lv, double p, Eigen::VectorXd c0, int iters, double tol) {
  auto eval = [&](const Eigen::VectorXd& c, Eigen::VectorXd* grad) {
    Eigen::VectorXd gG, gL;
    const double G = gradient_power(lv, c, p, grad ? &gG : nullptr);
    const double L = value_power(lv, c, p, grad ? &gL : nullptr);
    const double Q = L > 0.0 ? G / L : std::numeric_limits<double>::infinity();
    if (grad) *grad = (gG - Q * gL) / L;
    return Q;
  };
  return preconditioned_descent(lv, p, std::move(c0), eval, iters, tol);
}

}  // namespace

EigenEstimate minimize_rayleigh(const SpaceHierarchy& h, int level, double p, const DescentOptions& opts,
                                const FEFunction* start) {
  if (!(p > 1.0)) throw PreconditionError("p must exceed 1");
  const Level& lv = h.level(level);
  if (lv.dim() == 0) throw PreconditionError("level has no interior nodes");
  if (start && start->level != level) throw LevelMismatch("start function lives on another level");
  const DescentResult r =
      rayleigh_descent(lv, p, start ? start->coeffs : sine_bump(h, level, {1.0}).coeffs, opts.max_iterations, opts.tol);
  return {r.value, r.converged, r.iterations, r.history};
}

EigenEstimate estimate_lambda1p(const SpaceHierarchy& h, double p, int iters, double tol) {
  return minimize_rayleigh(h, h.finest_index(), p, {iters, tol});
}

std::vector<EigenEstimate> estimate_lambda1p_levels(const SpaceHierarchy& h, double p, int iters, double tol) {
  if (!(p > 1.0)) throw PreconditionError("p must exceed 1");
  std::vector<EigenEstimate> out;
  FEFunction prev;
  for (int n = 0; n < h.num_levels(); ++n) {
    Eigen::VectorXd c0 = n == 0 ? sine_bump(h, 0, {1.0}).coeffs : prolongate(h, prev, n).coeffs;
    DescentResult r = rayleigh_descent(h.level(n), p, std::move(c0), iters, tol);
    out.push_back({r.value, r.converged, r.iterations, r.history});
    prev = FEFunction{n, std::move(r.c)};
  }
  return out;
}

ConstantEstimate estimate_embedding_constant(const SpaceHierarchy& h, double r, double p,
                                             const EmbeddingOptions& opts) {
  if (!(r >= 1.0)) throw PreconditionError("embedding exponent r must be >= 1");
  if (opts.starts < 1) throw PreconditionError("at least one start is required");
  const Level& lv = h.finest();
  if (lv.dim() == 0) throw PreconditionError("finest level has no interior nodes");
  // Minimize -log(‖u‖_r / ‖∇u‖_p), which is scale invariant.
  auto eval = [&](const Eigen::VectorXd& c, Eigen::VectorXd* grad) {
    Eigen::VectorXd gG, gL;
    const double G = gradient_power(lv, c, p, grad ? &gG : nullptr);
    const double L = value_power(lv, c, r, grad ? &gL : nullptr);
    if (!(L > 0.0) || !(G > 0.0)) return std::numeric_limits<double>::infinity();
    if (grad) *grad = gG / (p * G) - gL / (r * L);
    return std::log(G) / p - std::log(L) / r;
  };
  double best = -1.0;
  bool best_converged = false;
  int total_iter = 0;
  for (int s = 0; s < opts.starts; ++s) {
    std::vector<double> coeffs{1.0};
    if (s > 0) {
      std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(s));
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      coeffs.assign(4, 0.0);
      for (double& a : coeffs) a = U(rng);
      coeffs[0] = std::abs(coeffs[0]) + 0.1;
    }
    const DescentResult res =
        preconditioned_descent(lv, p, sine_bump(h, h.finest_index(), coeffs).coeffs, eval, opts.max_iterations, opts.tol);
    total_iter += res.iterations;
    const double ratio = std::exp(-res.value);
    if (ratio > best) {  // strict: ties keep the lower start index
      best = ratio;
      best_converged = res.converged;
    }
  }
  return ConstantEstimate{best, best * opts.safety, opts.safety, "maximization", best_converged, total_iter};
}

// ---------------------------------------------------------------- hypotheses

nlohmann::json HypothesisReport::to_json() const {
  return {{"name", name}, {"value", value}, {"margin", margin}, {"pass", pass}, {"constants", constants}};
}

double h2_value(double a1, double a2, double K1, double K2, double S_alpha, double S_beta) {
  return a1 * K1 * S_alpha + a2 * K2 * S_beta;
}

namespace {

HypothesisReport make_report(std::string name, double a1, double a2, double K1, double K2, double S_alpha,
                             double S_beta, const std::string& alpha_key, const std::string& beta_key) {
  HypothesisReport rep;
  rep.name = std::move(name);
  rep.value = h2_value(a1, a2, K1, K2, S_alpha, S_beta);
  rep.margin = 1.0 - rep.value;
  rep.pass = rep.margin > 0.0;
  rep.constants = {{"a1", a1}, {"a2", a2}, {"K1", K1}, {"K2", K2}, {alpha_key, S_alpha}, {beta_key, S_beta}};
  return rep;
}

}  // namespace

HypothesisReport check_h2(double a1, double a2, const IntrinsicCertificate& cert,
                          const EmbeddingConstants& constants, double alpha, double beta) {
  const double p = constants.p(), ph = constants.p_hat();
  const double ra = ph / (ph - alpha), rb = p / (p - beta);
  HypothesisReport rep = make_report("H2", a1, a2, cert.K1, cert.K2, constants.S(ra), constants.S(rb),
                                     "S_" + exponent_key(ra), "S_" + exponent_key(rb));
  rep.constants["K3"] = cert.K3;
  return rep;
}

HypothesisReport check_t2_condition(double a1, double a2, double p, const EmbeddingConstants& constants) {
  const double ph = constants.p_hat();
  const IntrinsicCertificate cert = lift_certificate(p, constants.S(ph), 0.0, 0.0);
  const double ra = ph / (ph - p + 1.0);
  HypothesisReport rep = make_report("T2", a1, a2, cert.K1, cert.K2, constants.S(ra), constants.S(1.0),
                                     "S_" + exponent_key(ra), "S_1");
  rep.constants["S_" + exponent_key(ph)] = constants.S(ph);
  return rep;
}

HypothesisReport check_t3_condition(double a1, double a2, double p, int N, double kernel_l1,
                                    const EmbeddingConstants& constants) {
  const double ph = constants.p_hat();
  const IntrinsicCertificate cert = convolution_certificate(p, N, kernel_l1, constants.whole_space());
  const double ra = ph / (ph - p + 1.0);
  HypothesisReport rep = make_report("T3", a1, a2, cert.K1, cert.K2, constants.S(ra), constants.S(1.0),
                                     "S_" + exponent_key(ra), "S_1");
  rep.constants["S"] = constants.whole_space();
  rep.constants["kernel_l1"] = kernel_l1;
  return rep;
}

// ---------------------------------------------------------------- coercivity radius

double coercivity_constant(double S_r, double sigma_norm, double a1, double a2, double K3, double S_alpha,
                           double S_beta) {
  return S_r * sigma_norm + a1 * K3 * S_alpha + a2 * K3 * S_beta;
}

double coercivity_function(double t, double kappa, double omega_measure, double p, double q, double c0) {
  return (1.0 - kappa) * std::pow(t, p - 1.0) - std::pow(omega_measure, (p - q) / p) * std::pow(t, q - 1.0) - c0;
}

double coercivity_radius(double kappa, double omega_measure, double p, double q, double c0) {
  if (!(kappa < 1.0)) throw PreconditionError("hypothesis (H2) violated: kappa = " + std::to_string(kappa));
  if (kappa < 0.0 || c0 < 0.0 || !(omega_measure > 0.0) || !(q > 1.0) || !(p > q))
    throw PreconditionError("coercivity_radius needs kappa >= 0, c0 >= 0, |Omega| > 0 and 1 < q < p");
  auto g = [&](double t) { return coercivity_function(t, kappa, omega_measure, p, q, c0); };
  // g is negative near 0+ and has a single sign change on (0, inf): after its
  // minimum it increases to infinity.
  double hi = 1.0;
  while (!(g(hi) > 0.0)) {
    hi *= 2.0;
    if (hi > 1e300) throw Error("coercivity radius bracket expansion failed");
  }
  double lo = hi / 2.0;
  while (g(lo) > 0.0 && lo > 1e-300) lo /= 2.0;
  for (int it = 0; it < 400 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  const double R = hi;
  for (int k = 0; k <= 200; ++k) {
    const double t = R * std::pow(10.0, 6.0 * k / 200.0);
    if (g(t) < -1e-8 * std::max(1.0, std::pow(t, p - 1.0)))
      throw Error("coercivity function changes sign beyond the computed radius");
  }
  return R;
}

}  // namespace compete
