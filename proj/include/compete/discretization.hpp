#pragma once

// Nested conforming P1 spaces over W_0^{1,p}(Omega), quadrature and norms.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace compete {

using Point = std::array<double, 2>;  // second coordinate is 0 in 1D
using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

/// Interval or triangulation. Immutable once constructed; every factory validates.
class DomainMesh {
 public:
  static DomainMesh interval(double a, double b, int elements);
  /// 1D mesh from explicit node coordinates (must be strictly increasing).
  static DomainMesh line(std::vector<double> nodes);
  /// 2D mesh; triangles must be positively oriented and non-degenerate.
  static DomainMesh triangulation(std::vector<Point> vertices,
                                  std::vector<std::array<int, 3>> triangles);
  /// Unit square split along the diagonal into two triangles.
  static DomainMesh unit_square();

  static DomainMesh from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  int dimension() const noexcept { return dim_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_elements() const noexcept { return elements_.size(); }
  /// Vertices per element: 2 in 1D, 3 in 2D.
  int vertices_per_element() const noexcept { return dim_ + 1; }

  const Point& node(std::size_t i) const { return nodes_[i]; }
  std::span<const int> element(std::size_t e) const {
    return {elements_[e].data(), static_cast<std::size_t>(dim_ + 1)};
  }
  double element_measure(std::size_t e) const { return measures_[e]; }
  /// Lebesgue measure of the domain: the sum of the element measures.
  double measure() const noexcept { return measure_; }
  bool is_boundary(std::size_t node) const { return boundary_[node]; }
  /// Smallest element diameter.
  double min_element_size() const noexcept { return min_size_; }
  std::array<Point, 2> bounding_box() const;

 private:
  DomainMesh() = default;
  void finalize();

  int dim_ = 1;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<double> measures_;
  std::vector<bool> boundary_;
  double measure_ = 0.0;
  double min_size_ = 0.0;
};

/// Fine-level node expressed through coarse-level nodes. Inherited nodes have
/// first == second; new nodes are edge midpoints.
struct NodeParents {
  int first;
  int second;
};

struct RefinedMesh {
  DomainMesh mesh;
  std::vector<NodeParents> parents;
};

/// Midpoint bisection (1D) or red refinement into four congruent triangles (2D).
RefinedMesh refine_uniform(const DomainMesh& mesh);

/// Quadrature on a reference simplex in barycentric coordinates; weights sum to 1.
struct ReferenceRule {
  std::vector<std::array<double, 3>> barycentric;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int points);
/// n-point Gauss rule on a segment, exact to degree 2n-1.
ReferenceRule segment_rule(int points);
/// Collapsed (Duffy) Gauss product rule with n*n points, exact to degree 2n-2.
ReferenceRule triangle_rule(int points);

/// One level X_n: mesh, free (interior) node numbering, precomputed element
/// gradients and quadrature, and the prolongation stencil from level n-1.
class Level {
 public:
  Level(DomainMesh mesh, int quad_order, std::vector<NodeParents> parents);

  const DomainMesh& mesh() const noexcept { return mesh_; }
  /// dim(X_n): number of interior nodes.
  std::size_t dim() const noexcept { return free_nodes_.size(); }
  int free_index(std::size_t node) const { return free_index_[node]; }
  std::span<const int> free_nodes() const noexcept { return free_nodes_; }

  /// Gradient of the local hat of vertex `local` on element e (constant on e).
  const Vec2& shape_gradient(std::size_t e, int local) const { return shape_grads_[e][local]; }

  std::size_t points_per_element() const noexcept { return rule_.weights.size(); }
  std::size_t num_quad_points() const noexcept { return qp_x_.size(); }
  const Point& quad_point(std::size_t k) const { return qp_x_[k]; }
  double quad_weight(std::size_t k) const { return qp_w_[k]; }
  /// Values of the element's local hats at point k (barycentric coordinates).
  const std::array<double, 3>& quad_shape(std::size_t k) const {
    return rule_.barycentric[k % rule_.weights.size()];
  }
  std::size_t quad_element(std::size_t k) const { return k / rule_.weights.size(); }

  std::span<const NodeParents> parents() const noexcept { return parents_; }

  struct Location {
    std::size_t element;
    std::array<double, 3> barycentric;
  };
  /// Element containing x, or nullopt when x lies outside the domain.
  std::optional<Location> locate(const Point& x) const;

 private:
  void build_locator();

  DomainMesh mesh_;
  ReferenceRule rule_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
  std::vector<std::array<Vec2, 3>> shape_grads_;
  std::vector<Point> qp_x_;
  std::vector<double> qp_w_;
  std::vector<NodeParents> parents_;

  // 2D bucket grid for point location.
  Point grid_origin_{};
  std::array<double, 2> grid_cell_{};
  std::array<int, 2> grid_dims_{};
  std::vector<std::vector<int>> buckets_;
};

/// Nested sequence X_1 ⊂ X_2 ⊂ ... obtained by uniform refinement. Levels are
/// indexed from 0 in the API.
class SpaceHierarchy {
 public:
  static SpaceHierarchy build(const DomainMesh& base, int levels, int quad_order = 4);

  int num_levels() const noexcept { return static_cast<int>(levels_.size()); }
  const Level& level(int n) const;
  const Level& finest() const { return levels_.back(); }
  int finest_index() const noexcept { return num_levels() - 1; }
  int quad_order() const noexcept { return quad_order_; }
  int dimension() const noexcept { return levels_.front().mesh().dimension(); }
  double measure() const noexcept { return levels_.front().mesh().measure(); }

 private:
  std::vector<Level> levels_;
  int quad_order_ = 4;
};

/// Element of X_n: coefficients over the free nodes; boundary values are zero.
struct FEFunction {
  int level = 0;
  Eigen::VectorXd coeffs;
};

/// P1 function on a level including boundary nodes (an element of W^{1,p},
/// used for boundary lifts u_0).
struct NodalFunction {
  int level = 0;
  Eigen::VectorXd values;
};

/// Quadrature-point samples of a function: location, weight, value, gradient.
struct QuadraturePoint {
  Point x;
  double weight;
  double value;
  Vec2 gradient;
};

struct QuadratureSamples {
  int level = 0;
  std::vector<QuadraturePoint> points;
};

using ScalarField = std::function<double(const Point&)>;

FEFunction zero_function(const SpaceHierarchy& h, int level);
/// Nodal interpolant on the free nodes (boundary values of `fn` are ignored).
FEFunction interpolate(const SpaceHierarchy& h, int level, const ScalarField& fn);
/// Nodal interpolant on all nodes.
NodalFunction interpolate_nodal(const SpaceHierarchy& h, int level, const ScalarField& fn);
/// Embeds u into the ambient nodal representation (boundary entries zero).
NodalFunction to_nodal(const SpaceHierarchy& h, const FEFunction& u);

/// Elementwise-constant gradients of a nodal P1 function.
std::vector<Vec2> element_gradients(const Level& level, const Eigen::VectorXd& nodal);

/// Point evaluation; zero outside the domain (extension by zero).
double evaluate(const SpaceHierarchy& h, const FEFunction& u, const Point& x);
double evaluate(const SpaceHierarchy& h, const NodalFunction& u, const Point& x);

/// Exact embedding X_n -> X_target by the prolongation stencils.
FEFunction prolongate(const SpaceHierarchy& h, const FEFunction& u, int target_level);
NodalFunction prolongate(const SpaceHierarchy& h, const NodalFunction& u, int target_level);

/// ‖∇u‖_p, exact for P1 (gradients are piecewise constant).
double grad_norm_p(const SpaceHierarchy& h, const FEFunction& u, double p);
/// ‖u‖_r by Gauss quadrature of |u|^r.
double lebesgue_norm(const SpaceHierarchy& h, const FEFunction& u, double r);

QuadratureSamples sample(const SpaceHierarchy& h, const FEFunction& u);
QuadratureSamples sample(const SpaceHierarchy& h, const NodalFunction& u);

/// ‖·‖_r and ‖∇·‖_p of an arbitrary sampled function (quadrature).
double samples_lebesgue_norm(const QuadratureSamples& s, double r);
double samples_gradient_norm(const QuadratureSamples& s, double p);

}  // namespace compete
