#include <algorithm>
#include <cmath>
#include <string>

#include "compete/discretization.hpp"
#include "compete/error.hpp"

namespace compete {

Level::Level(DomainMesh mesh, int quad_order, std::vector<NodeParents> parents)
    : mesh_(std::move(mesh)),
      rule_(mesh_.dimension() == 1 ? segment_rule(quad_order) : triangle_rule(quad_order)),
      parents_(std::move(parents)) {
  free_index_.assign(mesh_.num_nodes(), -1);
  for (std::size_t i = 0; i < mesh_.num_nodes(); ++i) {
    if (!mesh_.is_boundary(i)) {
      free_index_[i] = static_cast<int>(free_nodes_.size());
      free_nodes_.push_back(static_cast<int>(i));
    }
  }

  const std::size_t ne = mesh_.num_elements();
  shape_grads_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto t = mesh_.element(e);
    if (mesh_.dimension() == 1) {
      const double h = mesh_.element_measure(e);
      shape_grads_[e] = {Vec2{-1.0 / h, 0.0}, Vec2{1.0 / h, 0.0}, Vec2{0.0, 0.0}};
    } else {
      const Point& x0 = mesh_.node(t[0]);
      const Point& x1 = mesh_.node(t[1]);
      const Point& x2 = mesh_.node(t[2]);
      const double two_area = 2.0 * mesh_.element_measure(e);
      shape_grads_[e] = {Vec2{(x1[1] - x2[1]) / two_area, (x2[0] - x1[0]) / two_area},
                         Vec2{(x2[1] - x0[1]) / two_area, (x0[0] - x2[0]) / two_area},
                         Vec2{(x0[1] - x1[1]) / two_area, (x1[0] - x0[0]) / two_area}};
    }
  }

  const std::size_t nq = rule_.weights.size();
  qp_x_.reserve(ne * nq);
  qp_w_.reserve(ne * nq);
  const int nv = mesh_.vertices_per_element();
  for (std::size_t e = 0; e < ne; ++e) {
    const auto t = mesh_.element(e);
    for (std::size_t j = 0; j < nq; ++j) {
      Point x{0.0, 0.0};
      for (int k = 0; k < nv; ++k) {
        x[0] += rule_.barycentric[j][k] * mesh_.node(t[k])[0];
        x[1] += rule_.barycentric[j][k] * mesh_.node(t[k])[1];
      }
      qp_x_.push_back(x);
      qp_w_.push_back(rule_.weights[j] * mesh_.element_measure(e));
    }
  }
  if (mesh_.dimension() == 2) build_locator();
}

void Level::build_locator() {
  const auto [lo, hi] = mesh_.bounding_box();
  const int n = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh_.num_elements()))));
  grid_origin_ = lo;
  grid_dims_ = {n, n};
  for (int d = 0; d < 2; ++d) grid_cell_[d] = std::max(hi[d] - lo[d], 1e-300) / n;
  buckets_.assign(static_cast<std::size_t>(n) * n, {});
  auto cell = [&](double v, int d) {
    return std::clamp(static_cast<int>(std::floor((v - grid_origin_[d]) / grid_cell_[d])), 0, n - 1);
  };
  for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
    const auto t = mesh_.element(e);
    Point tlo = mesh_.node(t[0]), thi = mesh_.node(t[0]);
    for (int k = 1; k < 3; ++k)
      for (int d = 0; d < 2; ++d) {
        tlo[d] = std::min(tlo[d], mesh_.node(t[k])[d]);
        thi[d] = std::max(thi[d], mesh_.node(t[k])[d]);
      }
    for (int i = cell(tlo[0], 0); i <= cell(thi[0], 0); ++i)
      for (int j = cell(tlo[1], 1); j <= cell(thi[1], 1); ++j)
        buckets_[static_cast<std::size_t>(i) * n + j].push_back(static_cast<int>(e));
  }
}

std::optional<Level::Location> Level::locate(const Point& x) const {
  if (mesh_.dimension() == 1) {
    const double a = mesh_.node(0)[0];
    const double b = mesh_.node(mesh_.num_nodes() - 1)[0];
    if (x[0] < a || x[0] > b) return std::nullopt;
    std::size_t lo = 0, hi = mesh_.num_nodes() - 1;
    // Largest node index with node <= x, capped at the last element.
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (mesh_.node(mid)[0] <= x[0]) lo = mid; else hi = mid;
    }
    const double x0 = mesh_.node(lo)[0];
    const double h = mesh_.element_measure(lo);
    const double t = (x[0] - x0) / h;
    return Location{lo, {1.0 - t, t, 0.0}};
  }
  const int n = grid_dims_[0];
  const double fx = (x[0] - grid_origin_[0]) / grid_cell_[0];
  const double fy = (x[1] - grid_origin_[1]) / grid_cell_[1];
  if (fx < -1e-12 || fy < -1e-12 || fx > n + 1e-12 || fy > n + 1e-12) return std::nullopt;
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, n - 1);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, n - 1);
  constexpr double tol = -1e-12;
  for (int e : buckets_[static_cast<std::size_t>(i) * n + j]) {
    const auto t = mesh_.element(e);
    const Point& x0 = mesh_.node(t[0]);
    std::array<double, 3> lam{};
    lam[1] = dot(shape_grads_[e][1], Vec2{x[0] - x0[0], x[1] - x0[1]});
    lam[2] = dot(shape_grads_[e][2], Vec2{x[0] - x0[0], x[1] - x0[1]});
    lam[0] = 1.0 - lam[1] - lam[2];
    if (lam[0] >= tol && lam[1] >= tol && lam[2] >= tol)
      return Location{static_cast<std::size_t>(e), lam};
  }
  return std::nullopt;
}

SpaceHierarchy SpaceHierarchy::build(const DomainMesh& base, int levels, int quad_order) {
  if (levels < 1) throw PreconditionError("hierarchy needs at least one level");
  if (quad_order < 1) throw PreconditionError("quadrature order must be positive");
  SpaceHierarchy h;
  h.quad_order_ = quad_order;
  h.levels_.reserve(static_cast<std::size_t>(levels));
  h.levels_.emplace_back(base, quad_order, std::vector<NodeParents>{});
  for (int n = 1; n < levels; ++n) {
    RefinedMesh r = refine_uniform(h.levels_.back().mesh());
    h.levels_.emplace_back(std::move(r.mesh), quad_order, std::move(r.parents));
  }
  return h;
}

const Level& SpaceHierarchy::level(int n) const {
  if (n < 0 || n >= num_levels())
    throw PreconditionError("level " + std::to_string(n) + " does not exist (hierarchy has " +
                            std::to_string(num_levels()) + ")");
  return levels_[static_cast<std::size_t>(n)];
}

FEFunction zero_function(const SpaceHierarchy& h, int level) {
  return {level, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h.level(level).dim()))};
}

FEFunction interpolate(const SpaceHierarchy& h, int level, const ScalarField& fn) {
  const Level& lv = h.level(level);
  FEFunction u{level, Eigen::VectorXd(static_cast<Eigen::Index>(lv.dim()))};
  for (std::size_t i = 0; i < lv.dim(); ++i) u.coeffs[static_cast<Eigen::Index>(i)] = fn(lv.mesh().node(lv.free_nodes()[i]));
  return u;
}

NodalFunction interpolate_nodal(const SpaceHierarchy& h, int level, const ScalarField& fn) {
  const Level& lv = h.level(level);
  NodalFunction u{level, Eigen::VectorXd(static_cast<Eigen::Index>(lv.mesh().num_nodes()))};
  for (std::size_t i = 0; i < lv.mesh().num_nodes(); ++i) u.values[static_cast<Eigen::Index>(i)] = fn(lv.mesh().node(i));
  return u;
}

NodalFunction to_nodal(const SpaceHierarchy& h, const FEFunction& u) {
  const Level& lv = h.level(u.level);
  if (static_cast<std::size_t>(u.coeffs.size()) != lv.dim())
    throw PreconditionError("coefficient length does not match dim(X_n)");
  NodalFunction out{u.level, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lv.mesh().num_nodes()))};
  for (std::size_t i = 0; i < lv.dim(); ++i) out.values[lv.free_nodes()[i]] = u.coeffs[static_cast<Eigen::Index>(i)];
  return out;
}

std::vector<Vec2> element_gradients(const Level& level, const Eigen::VectorXd& nodal) {
  const DomainMesh& m = level.mesh();
  std::vector<Vec2> g(m.num_elements(), Vec2{0.0, 0.0});
  const int nv = m.vertices_per_element();
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto t = m.element(e);
    for (int k = 0; k < nv; ++k) {
      const double c = nodal[t[k]];
      g[e][0] += c * level.shape_gradient(e, k)[0];
      g[e][1] += c * level.shape_gradient(e, k)[1];
    }
  }
  return g;
}

namespace {

double evaluate_nodal(const Level& lv, const Eigen::VectorXd& nodal, const Point& x) {
  const auto loc = lv.locate(x);
  if (!loc) return 0.0;
  const auto t = lv.mesh().element(loc->element);
  double v = 0.0;
  for (int k = 0; k < lv.mesh().vertices_per_element(); ++k) v += loc->barycentric[k] * nodal[t[k]];
  return v;
}

Eigen::VectorXd prolongate_nodal(const SpaceHierarchy& h, Eigen::VectorXd values, int from, int to) {
  for (int n = from + 1; n <= to; ++n) {
    const auto parents = h.level(n).parents();
    Eigen::VectorXd fine(static_cast<Eigen::Index>(parents.size()));
    for (std::size_t i = 0; i < parents.size(); ++i)
      fine[static_cast<Eigen::Index>(i)] = 0.5 * (values[parents[i].first] + values[parents[i].second]);
    values = std::move(fine);
  }
  return values;
}

QuadratureSamples sample_nodal(const Level& lv, int level, const Eigen::VectorXd& nodal) {
  const auto grads = element_gradients(lv, nodal);
  QuadratureSamples s{level, {}};
  s.points.reserve(lv.num_quad_points());
  const int nv = lv.mesh().vertices_per_element();
  for (std::size_t k = 0; k < lv.num_quad_points(); ++k) {
    const std::size_t e = lv.quad_element(k);
    const auto t = lv.mesh().element(e);
    const auto& phi = lv.quad_shape(k);
    double v = 0.0;
    for (int j = 0; j < nv; ++j) v += phi[j] * nodal[t[j]];
    s.points.push_back({lv.quad_point(k), lv.quad_weight(k), v, grads[e]});
  }
  return s;
}

}  // namespace

double evaluate(const SpaceHierarchy& h, const FEFunction& u, const Point& x) {
  return evaluate_nodal(h.level(u.level), to_nodal(h, u).values, x);
}

double evaluate(const SpaceHierarchy& h, const NodalFunction& u, const Point& x) {
  return evaluate_nodal(h.level(u.level), u.values, x);
}

FEFunction prolongate(const SpaceHierarchy& h, const FEFunction& u, int target_level) {
  if (target_level < u.level)
    throw PreconditionError("prolongation target level " + std::to_string(target_level) +
                            " is below the function's level " + std::to_string(u.level));
  h.level(target_level);
  const Eigen::VectorXd fine = prolongate_nodal(h, to_nodal(h, u).values, u.level, target_level);
  const Level& lv = h.level(target_level);
  FEFunction out{target_level, Eigen::VectorXd(static_cast<Eigen::Index>(lv.dim()))};
  for (std::size_t i = 0; i < lv.dim(); ++i) out.coeffs[static_cast<Eigen::Index>(i)] = fine[lv.free_nodes()[i]];
  return out;
}

NodalFunction prolongate(const SpaceHierarchy& h, const NodalFunction& u, int target_level) {
  if (target_level < u.level)
    throw PreconditionError("prolongation target level " + std::to_string(target_level) +
                            " is below the function's level " + std::to_string(u.level));
  h.level(target_level);
  return {target_level, prolongate_nodal(h, u.values, u.level, target_level)};
}

double grad_norm_p(const SpaceHierarchy& h, const FEFunction& u, double p) {
  if (!(p > 1.0)) throw PreconditionError("grad_norm_p requires p > 1");
  const Level& lv = h.level(u.level);
  const auto grads = element_gradients(lv, to_nodal(h, u).values);
  double sum = 0.0;
  for (std::size_t e = 0; e < grads.size(); ++e)
    sum += std::pow(std::sqrt(dot(grads[e], grads[e])), p) * lv.mesh().element_measure(e);
  return std::pow(sum, 1.0 / p);
}

double lebesgue_norm(const SpaceHierarchy& h, const FEFunction& u, double r) {
  if (!(r >= 1.0)) throw PreconditionError("lebesgue_norm requires r >= 1");
  return samples_lebesgue_norm(sample(h, u), r);
}

QuadratureSamples sample(const SpaceHierarchy& h, const FEFunction& u) {
  return sample_nodal(h.level(u.level), u.level, to_nodal(h, u).values);
}

QuadratureSamples sample(const SpaceHierarchy& h, const NodalFunction& u) {
  const Level& lv = h.level(u.level);
  if (static_cast<std::size_t>(u.values.size()) != lv.mesh().num_nodes())
    throw PreconditionError("nodal function length does not match the level's node count");
  return sample_nodal(lv, u.level, u.values);
}

double samples_lebesgue_norm(const QuadratureSamples& s, double r) {
  if (!(r >= 1.0)) throw PreconditionError("Lebesgue exponent must be >= 1");
  double sum = 0.0;
  for (const auto& q : s.points) sum += q.weight * std::pow(std::abs(q.value), r);
  return std::pow(sum, 1.0 / r);
}

double samples_gradient_norm(const QuadratureSamples& s, double p) {
  if (!(p >= 1.0)) throw PreconditionError("gradient norm exponent must be >= 1");
  double sum = 0.0;
  for (const auto& q : s.points) sum += q.weight * std::pow(std::sqrt(dot(q.gradient, q.gradient)), p);
  return std::pow(sum, 1.0 / p);
}

}  // namespace compete
