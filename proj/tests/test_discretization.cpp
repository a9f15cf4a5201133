#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <map>
#include <set>

#include "compete/discretization.hpp"
#include "compete/error.hpp"

using namespace compete;

namespace {

SpaceHierarchy unit_interval(int levels, int elements = 2) {
  return SpaceHierarchy::build(DomainMesh::interval(0.0, 1.0, elements), levels);
}

}  // namespace

TEST(Hierarchy, IntervalDimensions) {
  const auto h = unit_interval(3);
  ASSERT_EQ(h.num_levels(), 3);
  EXPECT_EQ(h.level(0).dim(), 1u);
  EXPECT_EQ(h.level(1).dim(), 3u);
  EXPECT_EQ(h.level(2).dim(), 7u);
}

TEST(Hierarchy, SingleLevelIsTheMidpointHat) {
  const auto h = unit_interval(1);
  ASSERT_EQ(h.level(0).dim(), 1u);
  FEFunction u{0, Eigen::VectorXd::Ones(1)};
  EXPECT_DOUBLE_EQ(evaluate(h, u, {0.5, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(h, u, {0.25, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(evaluate(h, u, {0.0, 0.0}), 0.0);
}

// Red refinement of the two-triangle square: count vertices and edges
// combinatorially and recover interior nodes from Euler's formula.
TEST(Hierarchy, SquareInteriorCountsMatchEuler) {
  const auto h = SpaceHierarchy::build(DomainMesh::unit_square(), 3);
  std::size_t V = 4, E = 5, F = 2;
  for (int n = 0; n < 3; ++n) {
    const auto& m = h.level(n).mesh();
    EXPECT_EQ(m.num_elements(), F);
    EXPECT_EQ(m.num_nodes(), V);
    // V - E + F = 1 for a disk; boundary vertices equal boundary edges.
    ASSERT_EQ(V + F, E + 1);
    std::set<std::pair<int, int>> edges;
    std::map<std::pair<int, int>, int> count;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      const auto t = m.element(e);
      for (int k = 0; k < 3; ++k) {
        auto key = std::minmax(t[k], t[(k + 1) % 3]);
        ++count[{key.first, key.second}];
      }
    }
    std::size_t boundary_edges = 0;
    for (const auto& [edge, c] : count) boundary_edges += c == 1;
    EXPECT_EQ(count.size(), E);
    EXPECT_EQ(h.level(n).dim(), V - boundary_edges);
    // Red refinement: each edge gains a midpoint and splits in two; each face
    // adds three interior edges and becomes four faces.
    const std::size_t V2 = V + E, E2 = 2 * E + 3 * F, F2 = 4 * F;
    V = V2;
    E = E2;
    F = F2;
  }
  EXPECT_EQ(h.level(2).dim(), 9u);
}

TEST(Hierarchy, ProlongationOfTheCoarseHat) {
  const auto h = unit_interval(2);
  const FEFunction u{0, Eigen::VectorXd::Ones(1)};
  const FEFunction f = prolongate(h, u, 1);
  ASSERT_EQ(f.coeffs.size(), 3);
  EXPECT_DOUBLE_EQ(f.coeffs[0], 0.5);
  EXPECT_DOUBLE_EQ(f.coeffs[1], 1.0);
  EXPECT_DOUBLE_EQ(f.coeffs[2], 0.5);
}

TEST(Hierarchy, ProlongationIsPointwiseExact) {
  for (const DomainMesh& base : {DomainMesh::interval(-1.0, 2.0, 3), DomainMesh::unit_square()}) {
    const auto h = SpaceHierarchy::build(base, 4);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0), X(0.0, 1.0);
    FEFunction u{1, Eigen::VectorXd(static_cast<Eigen::Index>(h.level(1).dim()))};
    for (Eigen::Index i = 0; i < u.coeffs.size(); ++i) u.coeffs[i] = U(rng);
    const FEFunction f = prolongate(h, u, 3);
    const auto [lo, hi] = base.bounding_box();
    for (int k = 0; k < 200; ++k) {
      const Point x{lo[0] + (hi[0] - lo[0]) * X(rng), base.dimension() == 2 ? lo[1] + (hi[1] - lo[1]) * X(rng) : 0.0};
      EXPECT_NEAR(evaluate(h, f, x), evaluate(h, u, x), 1e-13);
    }
  }
}

TEST(Hierarchy, ProlongationRejectsCoarserTarget) {
  const auto h = unit_interval(3);
  EXPECT_THROW(prolongate(h, zero_function(h, 2), 1), Error);
}

TEST(Norms, HatFunction) {
  // u = hat at 0.5 on two elements: slopes ±2, so ‖∇u‖_p^p = 2^p and ‖u‖_2^2 = 1/3.
  const auto h = unit_interval(1);
  const FEFunction u{0, Eigen::VectorXd::Ones(1)};
  EXPECT_NEAR(grad_norm_p(h, u, 3.0), 2.0, 1e-14);
  EXPECT_NEAR(lebesgue_norm(h, u, 2.0), std::sqrt(1.0 / 3.0), 1e-14);
}

TEST(Norms, ParabolaInterpolantLimits) {
  // ‖(x(1-x))'‖_3 = (1/4)^{1/3} and ‖x(1-x)‖_2 = (1/30)^{1/2}.
  const auto h = unit_interval(9);
  const FEFunction u = interpolate(h, 8, [](const Point& x) { return x[0] * (1.0 - x[0]); });
  EXPECT_NEAR(grad_norm_p(h, u, 3.0), std::cbrt(0.25), 2e-5);
  EXPECT_NEAR(lebesgue_norm(h, u, 2.0), std::sqrt(1.0 / 30.0), 2e-6);
}

TEST(Norms, GradientNormIsExactForNonIntegerP) {
  const auto h = SpaceHierarchy::build(DomainMesh::line({0.0, 0.3, 1.0}), 1);
  const FEFunction u{0, Eigen::VectorXd::Ones(1)};
  const double p = 2.7;
  const double expected = std::pow(0.3 * std::pow(1.0 / 0.3, p) + 0.7 * std::pow(1.0 / 0.7, p), 1.0 / p);
  EXPECT_NEAR(grad_norm_p(h, u, p), expected, 1e-13 * expected);
}

TEST(Quadrature, WeightsSumToElementMeasure) {
  for (const DomainMesh& base : {DomainMesh::line({0.0, 0.1, 0.5, 2.0}), DomainMesh::unit_square()}) {
    const auto h = SpaceHierarchy::build(base, 2);
    const Level& lv = h.finest();
    for (std::size_t e = 0; e < lv.mesh().num_elements(); ++e) {
      double s = 0.0;
      for (std::size_t k = 0; k < lv.points_per_element(); ++k) {
        const double w = lv.quad_weight(e * lv.points_per_element() + k);
        EXPECT_GT(w, 0.0);
        s += w;
      }
      EXPECT_NEAR(s, lv.mesh().element_measure(e), 1e-14);
    }
  }
}

TEST(Quadrature, TriangleRuleDegree) {
  // ∫ over the reference triangle of x^a y^b = a! b! / (a+b+2)!.
  const ReferenceRule r = triangle_rule(4);
  auto fact = [](int n) { return std::tgamma(n + 1.0); };
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; a + b <= 6; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < r.weights.size(); ++k)
        s += r.weights[k] * std::pow(r.barycentric[k][1], a) * std::pow(r.barycentric[k][2], b);
      EXPECT_NEAR(0.5 * s, fact(a) * fact(b) / fact(a + b + 2), 1e-14) << a << "," << b;
    }
}

TEST(Mesh, MeasureIsTheSumOfElements) {
  const auto m = DomainMesh::line({0.0, 0.25, 0.3, 1.7});
  EXPECT_DOUBLE_EQ(m.measure(), 1.7);
  const auto sq = SpaceHierarchy::build(DomainMesh::unit_square(), 3);
  EXPECT_NEAR(sq.finest().mesh().measure(), 1.0, 1e-15);
}

TEST(Mesh, ValidationNamesTheDefect) {
  auto message = [](auto&& fn) {
    try {
      fn();
    } catch (const MeshError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message([] { DomainMesh::line({0.0, 0.5, 0.5, 1.0}); }).find("increasing"), std::string::npos);
  EXPECT_FALSE(message([] { DomainMesh::triangulation({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}}); }).empty());
  EXPECT_FALSE(message([] { DomainMesh::triangulation({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}); }).empty());
  EXPECT_FALSE(message([] { DomainMesh::triangulation({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 5}}); }).empty());
}

TEST(Mesh, JsonRoundTrip) {
  for (const DomainMesh& m : {DomainMesh::line({0.0, 0.2, 1.0}), DomainMesh::unit_square()}) {
    const auto j = m.to_json();
    EXPECT_EQ(DomainMesh::from_json(j).to_json(), j);
  }
  const auto j = nlohmann::json::parse(R"({"dim":1,"nodes":[0,0.5,1]})");
  EXPECT_EQ(DomainMesh::from_json(j).num_elements(), 2u);
}

TEST(Mesh, BoundaryNodesAreNotFree) {
  const auto h = SpaceHierarchy::build(DomainMesh::unit_square(), 3);
  for (int n = 0; n < 3; ++n) {
    const Level& lv = h.level(n);
    for (std::size_t i = 0; i < lv.mesh().num_nodes(); ++i) {
      const Point& x = lv.mesh().node(i);
      const bool on_edge = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0;
      EXPECT_EQ(lv.free_index(i) < 0, on_edge);
    }
  }
}

TEST(Functions, ZeroExtensionOutsideTheDomain) {
  const auto h = unit_interval(2);
  const FEFunction u{1, Eigen::VectorXd::Ones(3)};
  EXPECT_EQ(evaluate(h, u, {-0.1, 0.0}), 0.0);
  EXPECT_EQ(evaluate(h, u, {1.1, 0.0}), 0.0);
}
