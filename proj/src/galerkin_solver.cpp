#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "compete/error.hpp"
#include "compete/galerkin_solver.hpp"

namespace compete {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<NodalFunction> lift_for(const Problem& problem, const SpaceHierarchy& h, int level) {
  if (problem.T.kind() != IntrinsicOperator::Kind::boundary_lift) return std::nullopt;
  return problem.T.lift_nodal(h, level);
}

CompetingOperator jacobian_operator(const CompetingOperator& op) {
  CompetingOperator j = op;
  // The flux derivative blows up at ∇u = 0 for exponents below 2.
  if (std::min(op.p, op.q) < 2.0 && op.eps_reg == 0.0) j.eps_reg = 1e-6;
  return j;
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

ScalarField sine_mode(const SpaceHierarchy& h, int k) {
  const auto [lo, hi] = h.level(0).mesh().bounding_box();
  const int dim = h.dimension();
  return [=](const Point& x) {
    double s = std::sin(k * std::numbers::pi * (x[0] - lo[0]) / (hi[0] - lo[0]));
    if (dim == 2) s *= std::sin(std::numbers::pi * (x[1] - lo[1]) / (hi[1] - lo[1]));
    return s;
  };
}

}  // namespace

// ---------------------------------------------------------------- constants

std::vector<double> required_exponents(const Problem& problem, int N) {
  const double p = problem.op.p;
  const double ph = problem.p_hat(N);
  const GrowthEnvelope& env = problem.f.envelope();
  std::vector<double> rs{1.0, env.r, p, ph, ph / (ph - env.alpha), p / (p - env.beta)};
  if (problem.T.kind() != IntrinsicOperator::Kind::identity) rs.push_back(ph / (ph - p + 1.0));
  std::sort(rs.begin(), rs.end());
  std::vector<double> out;
  for (double r : rs)
    if (out.empty() || std::abs(r - out.back()) > 1e-12 * std::max(1.0, r)) out.push_back(r);
  return out;
}

EmbeddingConstants estimate_problem_constants(const Problem& problem, const SpaceHierarchy& h) {
  const int N = h.dimension();
  const double p = problem.op.p;
  EmbeddingConstants c(N, p, problem.p_hat(N), problem.safety);
  EmbeddingOptions eo;
  eo.starts = problem.solver.constant_starts;
  eo.safety = problem.safety;
  eo.max_iterations = problem.solver.constant_iterations;
  eo.seed = problem.seed;
  for (double r : required_exponents(problem, N)) c.set(r, estimate_embedding_constant(h, r, p, eo));
  const EigenEstimate lam = estimate_lambda1p(h, p, problem.solver.constant_iterations);
  c.lambda1p = ConstantEstimate{lam.value, lam.value, 1.0, "rayleigh", lam.converged, lam.iterations};
  return c;
}

// ---------------------------------------------------------------- level solve

ResidualVector level_residual(const Problem& problem, const SpaceHierarchy& h, const FEFunction& u) {
  const auto lift = lift_for(problem, h, u.level);
  return assemble_residual(h, u, apply(problem.T, h, u), problem.f, problem.op, lift ? &*lift : nullptr);
}

SphereCertificate sphere_certificate(const Problem& problem, const SpaceHierarchy& h, int n, double R,
                                     int samples, std::uint64_t seed) {
  SphereCertificate out;
  if (!std::isfinite(R) || samples <= 0) return out;
  const Level& lv = h.level(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<FEFunction> modes;
  for (int k = 1; k <= 4; ++k) modes.push_back(interpolate(h, n, sine_mode(h, k)));
  out.min_pairing = kInf;
  for (int s = 0; s < samples; ++s) {
    FEFunction v{n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lv.dim()))};
    if (s % 2 == 0) {
      for (Eigen::Index i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] = normal(rng);
    } else {
      for (const FEFunction& m : modes) v.coeffs += uni(rng) * m.coeffs;
    }
    const double g = grad_norm_p(h, v, problem.op.p);
    if (!(g > 0.0)) continue;
    v.coeffs *= R / g;
    const double pairing = level_residual(problem, h, v).values.dot(v.coeffs);
    ++out.samples;
    if (pairing < 0.0) ++out.negatives;
    out.min_pairing = std::min(out.min_pairing, pairing);
  }
  if (out.samples == 0) out.min_pairing = 0.0;
  return out;
}

namespace {

// ∫ |∇(w+u0)|^p/p - q_weight |∇(w+u0)|^q/q: the potential of the operator part
// of the residual.
double operator_energy(const SpaceHierarchy& h, const FEFunction& w, const CompetingOperator& op,
                       const NodalFunction* lift) {
  const QuadratureSamples s = sample(h, w);
  std::optional<QuadratureSamples> l;
  if (lift) l = sample(h, *lift);
  double e = 0.0;
  for (std::size_t k = 0; k < s.points.size(); ++k) {
    Vec2 g = s.points[k].gradient;
    if (l) {
      g[0] += l->points[k].gradient[0];
      g[1] += l->points[k].gradient[1];
    }
    const double m = std::hypot(g[0], g[1]);
    e += s.points[k].weight * (std::pow(m, op.p) / op.p - op.q_weight * std::pow(m, op.q) / op.q);
  }
  return e;
}

// Newton on the nonmonotone operator stalls wherever |∇u| crosses a fold of the
// flux. With the convection frozen at `image`, zeros are the critical points
// of the coercive energy E(w) - g·w, and descent on it reaches one from any
// start: Newton steps while the Hessian is positive definite, otherwise steps
// preconditioned by the stiffness matrix, Armijo on the energy either way.
class FrozenDescent {
 public:
  FrozenDescent(const Problem& problem, const SpaceHierarchy& h, int n, const NodalFunction* lift)
      : pr_(problem), h_(h), n_(n), lift_(lift),
        none_(ConvectionTerm::from_catalog("zero", nlohmann::json::object(), problem.op.p)),
        jop_(jacobian_operator(problem.op)) {
    const FEFunction zero = zero_function(h, n);
    // p = 2 Jacobian coefficients are 1: the stiffness matrix.
    stiffness_.compute(assemble_jacobian(h, zero, sample(h, zero), none_, CompetingOperator{2.0, 1.5, 0.0, 0.0},
                                         ConvectionLinearization::frozen));
  }

  Eigen::VectorXd run(const QuadratureSamples& image, Eigen::VectorXd w, double tol, int max_iter, int& iters) const {
    auto fe = [this](const Eigen::VectorXd& c) { return FEFunction{n_, c}; };
    auto op_part = [&](const Eigen::VectorXd& c) {
      return assemble_residual(h_, fe(c), image, none_, pr_.op, lift_).values;
    };
    const Eigen::VectorXd g = op_part(w) - assemble_residual(h_, fe(w), image, pr_.f, pr_.op, lift_).values;
    auto energy = [&](const Eigen::VectorXd& c) { return operator_energy(h_, fe(c), pr_.op, lift_) - g.dot(c); };

    double E = energy(w);
    for (int it = 0; it < max_iter; ++it) {
      const Eigen::VectorXd G = op_part(w) - g;
      if (sup_norm(G) <= tol) break;
      ++iters;
      Eigen::VectorXd d;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(
          assemble_jacobian(h_, fe(w), image, none_, jop_, ConvectionLinearization::frozen, lift_));
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) d = -ldlt.solve(G);
      if (d.size() != w.size() || !d.allFinite() || !(G.dot(d) < 0.0)) d = -stiffness_.solve(G);
      const double slope = G.dot(d);
      double step = 1.0;
      bool moved = false;
      while (step >= 1e-14) {
        const Eigen::VectorXd trial = w + step * d;
        const double Et = energy(trial);
        if (std::isfinite(Et) && Et <= E + 1e-4 * step * slope) {
          w = trial;
          E = Et;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    return w;
  }

 private:
  const Problem& pr_;
  const SpaceHierarchy& h_;
  int n_;
  const NodalFunction* lift_;
  ConvectionTerm none_;
  CompetingOperator jop_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> stiffness_;
};

}  // namespace

LevelSolve solve_level(const Problem& problem, const SpaceHierarchy& h, int n, double R, const FEFunction* warm) {
  problem.op.validate();
  const Level& lv = h.level(n);
  const double tol = problem.solver.tolerance(h.dimension());
  const auto lift = lift_for(problem, h, n);
  const NodalFunction* lp = lift ? &*lift : nullptr;
  const CompetingOperator jop = jacobian_operator(problem.op);
  const auto d = static_cast<Eigen::Index>(lv.dim());
  auto fe = [n](const Eigen::VectorXd& c) { return FEFunction{n, c}; };
  const bool local = problem.T.is_local();

  BrouwerOptions bo;
  bo.tol = tol;
  bo.max_newton = problem.solver.max_newton;
  bo.max_depth = problem.solver.max_depth;

  auto ball_norm = [&](const Eigen::VectorXd& c) { return grad_norm_p(h, fe(c), problem.op.p); };
  auto full_residual = [&](const Eigen::VectorXd& c) { return sup_norm(level_residual(problem, h, fe(c)).values); };

  LevelSolve out;
  out.level = n;
  out.R = R;
  const double ball = std::isfinite(R) ? R : kInf;

  // Full problem with T re-applied at every iterate (local T only).
  ZeroProblem full;
  full.dimension = d;
  full.residual = [&](const Eigen::VectorXd& c) { return level_residual(problem, h, fe(c)).values; };
  full.jacobian = [&](const Eigen::VectorXd& c) {
    const FEFunction u = fe(c);
    return assemble_jacobian(h, u, apply(problem.T, h, u), problem.f, jop, ConvectionLinearization::exact, lp);
  };
  full.norm = ball_norm;

  auto absorb = [&](const BrouwerResult& r) {
    out.newton_iterations += r.newton_iterations;
    out.continuation_stages += r.continuation_stages;
  };

  // Fixed point in T: freeze T(u_k), solve the frozen system (descent seed,
  // then Newton), re-apply T. Local T also tries Newton on the full system.
  const FrozenDescent descent(problem, h, n, lp);
  Eigen::VectorXd c = warm ? prolongate(h, *warm, n).coeffs : Eigen::VectorXd::Zero(d);
  double prev_change = kInf;
  bool done = false;
  out.message = "outer iteration limit reached";
  for (int k = 0; k <= problem.solver.outer_max; ++k) {
    if (full_residual(c) <= tol) {
      done = true;
      break;
    }
    if (k == problem.solver.outer_max) break;
    ++out.outer_iterations;
    const QuadratureSamples image = apply(problem.T, h, fe(c));
    Eigen::VectorXd next = descent.run(image, c, tol, problem.solver.max_newton * 20, out.newton_iterations);

    ZeroProblem frozen;
    frozen.dimension = d;
    frozen.norm = ball_norm;
    frozen.residual = [&](const Eigen::VectorXd& v) {
      return assemble_residual(h, fe(v), image, problem.f, problem.op, lp).values;
    };
    frozen.jacobian = [&](const Eigen::VectorXd& v) {
      return assemble_jacobian(h, fe(v), image, problem.f, jop, ConvectionLinearization::frozen, lp);
    };
    BrouwerOptions fo = bo;
    fo.x0 = next;
    fo.continuation = local ? false : true;
    const BrouwerResult fr = brouwer_zero(frozen, ball, fo);
    absorb(fr);
    if (fr.converged) next = fr.v;

    if (local) {
      BrouwerOptions no = bo;
      no.x0 = next;
      no.continuation = false;
      const BrouwerResult r = brouwer_zero(full, ball, no);
      absorb(r);
      if (r.converged) {
        c = r.v;
        done = true;
        break;
      }
    } else if (!fr.converged) {
      out.message = "frozen-T solve failed: " + fr.message;
      break;
    }
    const double change = ball_norm(next - c);
    if (change >= prev_change)
      c += problem.solver.outer_damping * (next - c);
    else
      c = next;
    prev_change = change;
  }

  // Last resort for local T: damped Newton and homotopy on the full system.
  if (!done && local) {
    BrouwerOptions no = bo;
    no.x0 = c;
    const BrouwerResult r = brouwer_zero(full, ball, no);
    absorb(r);
    if (r.converged) c = r.v;
    out.message = r.message;
  }
  if (done) out.message = "converged";

  out.u = fe(c);
  out.residual_sup = sup_norm(level_residual(problem, h, out.u).values);
  out.grad_norm_p = grad_norm_p(h, out.u, problem.op.p);
  out.converged = out.residual_sup <= tol;
  if (!out.converged && out.message == "converged") out.message = "residual above tolerance";
  return out;
}

// ---------------------------------------------------------------- diagnostics

std::vector<FEFunction> d1_test_set(const SpaceHierarchy& h, int test_set_size) {
  const int n = h.finest_index();
  const auto d = static_cast<Eigen::Index>(h.finest().dim());
  std::vector<FEFunction> out;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(test_set_size, d); ++i) {
    FEFunction phi{n, Eigen::VectorXd::Zero(d)};
    phi.coeffs[i] = 1.0;
    out.push_back(std::move(phi));
  }
  for (int k = 1; k <= 4; ++k) {
    FEFunction s = interpolate(h, n, sine_mode(h, k));
    if (s.coeffs.norm() > 0.0) out.push_back(std::move(s));
  }
  return out;
}

D1Diagnostics d1_diagnostics(const Problem& problem, const SpaceHierarchy& h, const std::vector<LevelSolve>& solves,
                             const FEFunction& u, int test_set_size) {
  const int fin = h.finest_index();
  if (u.level != fin) throw LevelMismatch("the limit proxy must live on the finest level");
  const double p = problem.op.p;
  const auto tests = d1_test_set(h, test_set_size);
  std::vector<double> l2, w1p;
  std::vector<QuadratureSamples> test_samples;
  for (const FEFunction& phi : tests) {
    l2.push_back(lebesgue_norm(h, phi, 2.0));
    w1p.push_back(grad_norm_p(h, phi, p));
    test_samples.push_back(sample(h, phi));
  }
  const auto lift = lift_for(problem, h, fin);
  D1Diagnostics out;
  for (const LevelSolve& s : solves) {
    if (s.level >= fin) continue;
    const FEFunction un = prolongate(h, s.u, fin);
    const FEFunction diff{fin, un.coeffs - u.coeffs};
    const QuadratureSamples ds = sample(h, diff);
    const Eigen::VectorXd r = level_residual(problem, h, un).values;
    D1Entry e;
    e.level = s.level;
    for (std::size_t j = 0; j < tests.size(); ++j) {
      double ip = 0.0;
      for (std::size_t k = 0; k < ds.points.size(); ++k)
        ip += ds.points[k].weight * ds.points[k].value * test_samples[j].points[k].value;
      e.a = std::max(e.a, std::abs(ip) / l2[j]);
      e.b = std::max(e.b, std::abs(r.dot(tests[j].coeffs)) / w1p[j]);
    }
    e.c_strong = competing_pairing(h, un, diff, problem.op, lift ? &*lift : nullptr);
    e.f_integral = convection_integral(h, diff, apply(problem.T, h, un), problem.f);
    e.c_full = e.c_strong - e.f_integral;
    out.entries.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------- hierarchy

namespace {

double mesh_size(const DomainMesh& m) {
  double hmax = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const double meas = m.element_measure(e);
    hmax = std::max(hmax, m.dimension() == 1 ? meas : std::sqrt(2.0 * meas));
  }
  return hmax;
}

}  // namespace

HierarchyResult run_hierarchy(const Problem& problem, const SpaceHierarchy& h, const EmbeddingConstants* constants) {
  problem.op.validate();
  const int N = h.dimension();
  const double p = problem.op.p, q = problem.op.q, ph = problem.p_hat(N);
  const GrowthEnvelope& env = problem.f.envelope();
  env.validate(p, ph);

  HierarchyResult res;
  res.constants = constants ? *constants : estimate_problem_constants(problem, h);
  const EmbeddingConstants& C = res.constants;

  const IntrinsicCertificate cert = certificate(problem.T, h, p, env.alpha, env.beta, C);
  res.certificate = cert;
  const HypothesisReport h2 = check_h2(env.a1, env.a2, cert, C, env.alpha, env.beta);
  res.hypotheses.push_back(h2);
  if (problem.T.kind() == IntrinsicOperator::Kind::boundary_lift)
    res.hypotheses.push_back(check_t2_condition(env.a1, env.a2, p, C));
  if (problem.T.kind() == IntrinsicOperator::Kind::convolution)
    res.hypotheses.push_back(check_t3_condition(env.a1, env.a2, p, N, problem.T.kernel().l1_norm(), C));
  res.kappa = h2.value;

  const double S_alpha = C.S(ph / (ph - env.alpha)), S_beta = C.S(p / (p - env.beta));
  res.c0 = coercivity_constant(C.S(env.r), env.sigma_norm(h.finest()), env.a1, env.a2, cert.K3, S_alpha, S_beta);
  if (h2.pass) {
    // A weight w on the q-term enters g(t) as w|Ω|^{(p-q)/p}.
    const double omega = h.measure() * std::pow(problem.op.q_weight, p / (p - q));
    res.R = coercivity_radius(res.kappa, std::max(omega, std::numeric_limits<double>::min()), p, q, res.c0);
  } else if (problem.policy == HypothesisPolicy::refuse) {
    res.status = RunStatus::hypothesis_failed;
    res.message = "hypothesis (H2) violated: value " + std::to_string(h2.value) + " >= 1";
    return res;
  } else {
    res.R = kInf;
    res.message = "hypothesis (H2) violated; solving without the a-priori ball";
  }

  const double tol = problem.solver.tolerance(N);
  std::vector<LevelSolve> solves;
  for (int n = 0; n < h.num_levels(); ++n) {
    LevelSolve s = solve_level(problem, h, n, res.R, solves.empty() ? nullptr : &solves.back().u);
    s.sphere = sphere_certificate(problem, h, n, res.R, problem.solver.sphere_samples,
                                  problem.seed + static_cast<std::uint64_t>(n));
    LevelRecord rec;
    rec.mesh_size = mesh_size(h.level(n).mesh());
    rec.apriori_margin = res.R - s.grad_norm_p;
    rec.energy_defect = std::abs(level_residual(problem, h, s.u).values.dot(s.u.coeffs));
    rec.energy_bound = tol * s.u.coeffs.norm() * static_cast<double>(s.u.coeffs.size());
    rec.solve = s;
    res.levels.push_back(std::move(rec));
    if (!s.converged) {
      res.status = RunStatus::solver_failed;
      res.message = "level " + std::to_string(n + 1) + ": " + s.message;
      return res;
    }
    solves.push_back(std::move(s));
  }

  const int fin = h.finest_index();
  const D1Diagnostics diag = d1_diagnostics(problem, h, solves, solves.back().u, problem.solver.test_set_size);
  for (const D1Entry& e : diag.entries) res.levels[static_cast<std::size_t>(e.level)].diag = e;
  for (std::size_t n = 0; n + 1 < solves.size(); ++n) {
    const FEFunction a = prolongate(h, solves[n].u, fin), b = prolongate(h, solves[n + 1].u, fin);
    res.increments.push_back(grad_norm_p(h, FEFunction{fin, b.coeffs - a.coeffs}, p));
  }
  for (std::size_t i = 1; i < res.increments.size(); ++i)
    if (res.increments[i] > res.increments[i - 1]) res.non_cauchy = true;
  return res;
}

}  // namespace compete
