#include <cmath>
#include <string>

#include <Eigen/SparseCore>

#include "compete/error.hpp"
#include "compete/operators.hpp"

namespace compete {

namespace {

using Mat2 = std::array<std::array<double, 2>, 2>;

void check_same_level(const FEFunction& u, const FEFunction& v) {
  if (u.level != v.level)
    throw LevelMismatch("functions on levels " + std::to_string(u.level) + " and " + std::to_string(v.level));
}

void check_samples(const Level& lv, const FEFunction& u, const QuadratureSamples& s) {
  if (s.level != u.level || s.points.size() != lv.num_quad_points())
    throw LevelMismatch("T-image samples (level " + std::to_string(s.level) +
                        ") do not match the quadrature of level " + std::to_string(u.level));
}

Eigen::VectorXd shifted_nodal(const SpaceHierarchy& h, const FEFunction& u, const NodalFunction* lift) {
  Eigen::VectorXd w = to_nodal(h, u).values;
  if (lift != nullptr) {
    if (lift->level != u.level) throw LevelMismatch("lift lives on a different level than u");
    if (lift->values.size() != w.size()) throw PreconditionError("lift length does not match the level");
    w += lift->values;
  }
  return w;
}

// Adds c * d/dg [ (|g|^2+eps^2)^{(e-2)/2} g ] to D.
void add_flux_derivative(Mat2& D, const Vec2& g, double e, double c, double eps) {
  if (c == 0.0) return;
  const double s = dot(g, g) + eps * eps;
  if (s == 0.0) {
    if (e < 2.0)
      throw PreconditionError("singular element: zero gradient with exponent " + std::to_string(e) +
                              " < 2 and eps_reg = 0; set eps_reg > 0");
    if (e == 2.0) {
      D[0][0] += c;
      D[1][1] += c;
    }
    return;
  }
  const double a = std::pow(s, 0.5 * (e - 2.0));
  const double b = (e - 2.0) * std::pow(s, 0.5 * (e - 4.0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) D[i][j] += c * ((i == j ? a : 0.0) + b * g[i] * g[j]);
}

}  // namespace

void CompetingOperator::validate() const {
  if (!(q > 1.0 && q < p && std::isfinite(p)))
    throw PreconditionError("competing operator needs 1 < q < p < inf (got p = " + std::to_string(p) +
                            ", q = " + std::to_string(q) + ")");
  if (!(eps_reg >= 0.0)) throw PreconditionError("eps_reg must be >= 0");
}

Vec2 competing_flux(const Vec2& g, const CompetingOperator& op) {
  const double n = std::sqrt(dot(g, g));
  if (n == 0.0) return {0.0, 0.0};
  const double c = std::pow(n, op.p - 2.0) - op.q_weight * std::pow(n, op.q - 2.0);
  return {c * g[0], c * g[1]};
}

double competing_pairing(const SpaceHierarchy& h, const FEFunction& u, const FEFunction& v,
                         const CompetingOperator& op, const NodalFunction* lift) {
  check_same_level(u, v);
  const Level& lv = h.level(u.level);
  const auto gw = element_gradients(lv, shifted_nodal(h, u, lift));
  const auto gv = element_gradients(lv, to_nodal(h, v).values);
  double sum = 0.0;
  for (std::size_t e = 0; e < gw.size(); ++e)
    sum += dot(competing_flux(gw[e], op), gv[e]) * lv.mesh().element_measure(e);
  return sum;
}

double convection_integral(const SpaceHierarchy& h, const FEFunction& v,
                           const QuadratureSamples& t_image, const ConvectionTerm& f) {
  const Level& lv = h.level(v.level);
  check_samples(lv, v, t_image);
  const auto vs = sample(h, v);
  double sum = 0.0;
  for (std::size_t k = 0; k < vs.points.size(); ++k) {
    const auto& t = t_image.points[k];
    sum += t.weight * f(t.x, t.value, t.gradient) * vs.points[k].value;
  }
  return sum;
}

ResidualVector assemble_residual(const SpaceHierarchy& h, const FEFunction& u,
                                 const QuadratureSamples& t_image, const ConvectionTerm& f,
                                 const CompetingOperator& op, const NodalFunction* lift) {
  const Level& lv = h.level(u.level);
  check_samples(lv, u, t_image);
  const DomainMesh& m = lv.mesh();
  const int nv = m.vertices_per_element();
  ResidualVector r{u.level, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lv.dim()))};

  const auto grads = element_gradients(lv, shifted_nodal(h, u, lift));
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Vec2 flux = competing_flux(grads[e], op);
    const auto t = m.element(e);
    for (int k = 0; k < nv; ++k) {
      const int i = lv.free_index(t[k]);
      if (i >= 0) r.values[i] += dot(flux, lv.shape_gradient(e, k)) * m.element_measure(e);
    }
  }
  for (std::size_t k = 0; k < lv.num_quad_points(); ++k) {
    const auto& s = t_image.points[k];
    const double fw = s.weight * f(s.x, s.value, s.gradient);
    if (fw == 0.0) continue;
    const auto t = m.element(lv.quad_element(k));
    const auto& phi = lv.quad_shape(k);
    for (int j = 0; j < nv; ++j) {
      const int i = lv.free_index(t[j]);
      if (i >= 0) r.values[i] -= fw * phi[j];
    }
  }
  return r;
}

Eigen::SparseMatrix<double> assemble_jacobian(const SpaceHierarchy& h, const FEFunction& u,
                                              const QuadratureSamples& t_image,
                                              const ConvectionTerm& f, const CompetingOperator& op,
                                              ConvectionLinearization mode, const NodalFunction* lift) {
  const Level& lv = h.level(u.level);
  check_samples(lv, u, t_image);
  const DomainMesh& m = lv.mesh();
  const int nv = m.vertices_per_element();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.num_elements() * 9 + lv.num_quad_points() * 9);

  const auto grads = element_gradients(lv, shifted_nodal(h, u, lift));
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    Mat2 D{};
    add_flux_derivative(D, grads[e], op.p, 1.0, op.eps_reg);
    add_flux_derivative(D, grads[e], op.q, -op.q_weight, op.eps_reg);
    const auto t = m.element(e);
    for (int a = 0; a < nv; ++a) {
      const int i = lv.free_index(t[a]);
      if (i < 0) continue;
      const Vec2& ga = lv.shape_gradient(e, a);
      for (int b = 0; b < nv; ++b) {
        const int j = lv.free_index(t[b]);
        if (j < 0) continue;
        const Vec2& gb = lv.shape_gradient(e, b);
        double v = 0.0;
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y) v += ga[x] * D[x][y] * gb[y];
        trips.emplace_back(i, j, v * m.element_measure(e));
      }
    }
  }

  if (mode == ConvectionLinearization::exact && f.depends_on_solution()) {
    for (std::size_t k = 0; k < lv.num_quad_points(); ++k) {
      const auto& s = t_image.points[k];
      const auto d = f.partials(s.x, s.value, s.gradient);
      const std::size_t e = lv.quad_element(k);
      const auto t = m.element(e);
      const auto& phi = lv.quad_shape(k);
      for (int a = 0; a < nv; ++a) {
        const int i = lv.free_index(t[a]);
        if (i < 0) continue;
        for (int b = 0; b < nv; ++b) {
          const int j = lv.free_index(t[b]);
          if (j < 0) continue;
          const double dfj = d.ds * phi[b] + dot(d.dxi, lv.shape_gradient(e, b));
          trips.emplace_back(i, j, -s.weight * dfj * phi[a]);
        }
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(lv.dim());
  Eigen::SparseMatrix<double> J(n, n);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

EnvelopeReport growth_envelope_check(const ConvectionTerm& f, const std::vector<ConvectionProbe>& samples) {
  return growth_envelope_check(f, f.envelope(), samples);
}

EnvelopeReport growth_envelope_check(const ConvectionTerm& f, const GrowthEnvelope& envelope,
                                     const std::vector<ConvectionProbe>& samples) {
  EnvelopeReport rep;
  rep.samples = samples.size();
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const double margin = std::abs(f(s.x, s.s, s.xi)) - envelope.bound(s.x, s.s, s.xi);
    if (margin > rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_index = i;
    }
  }
  if (samples.empty()) rep.worst_margin = 0.0;
  return rep;
}

double lemma_l1_bound(const SpaceHierarchy& h, const FEFunction& u, const FEFunction& v,
                      const QuadratureSamples& t_image, const GrowthEnvelope& env, double p,
                      double p_hat) {
  check_same_level(u, v);
  check_samples(h.level(u.level), u, t_image);
  const Level& lv = h.level(v.level);
  double bound = env.sigma_norm(lv) * lebesgue_norm(h, v, env.r);
  if (env.a1 != 0.0)
    bound += env.a1 * std::pow(samples_lebesgue_norm(t_image, p_hat), env.alpha) *
             lebesgue_norm(h, v, p_hat / (p_hat - env.alpha));
  if (env.a2 != 0.0)
    bound += env.a2 * std::pow(samples_gradient_norm(t_image, p), env.beta) *
             lebesgue_norm(h, v, p / (p - env.beta));
  return bound;
}

}  // namespace compete
