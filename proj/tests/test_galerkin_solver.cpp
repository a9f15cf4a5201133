#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "compete/error.hpp"
#include "compete/galerkin_solver.hpp"
#include "oracles.hpp"

using namespace compete;
using nlohmann::json;

namespace {

SpaceHierarchy unit_interval(int levels) { return SpaceHierarchy::build(DomainMesh::interval(0.0, 1.0, 2), levels); }

Problem make(const std::string& f_kind, json params = json::object(), IntrinsicOperator T = IntrinsicOperator::identity()) {
  Problem pr;
  pr.op = {3.0, 2.0, 1.0, 0.0};
  pr.f = ConvectionTerm::from_catalog(f_kind, params, 3.0);
  pr.T = std::move(T);
  pr.seed = 7;
  pr.solver.sphere_samples = 200;
  return pr;
}

ZeroProblem from_map(const oracle::Map& F, int dim) {
  ZeroProblem z;
  z.dimension = dim;
  z.residual = F;
  return z;
}

}  // namespace

TEST(BrouwerZero, IdentityMap) {
  const auto r = brouwer_zero(from_map([](const Eigen::VectorXd& v) { return v; }, 3), 1.0);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.v.norm(), 1e-12);
}

TEST(BrouwerZero, ShiftedIdentity) {
  const auto r = brouwer_zero(from_map([](const Eigen::VectorXd& v) {
    Eigen::VectorXd w = v;
    w[0] -= 1.0;
    return w;
  }, 2), 2.0);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.v[0], 1.0, 1e-12);
  EXPECT_NEAR(r.v[1], 0.0, 1e-12);
}

TEST(BrouwerZero, CubicWithRootOnTheSphere) {
  // v^3 - v - 6 = (v - 2)(v^2 + 2v + 3): the only real root sits at |v| = R.
  const auto r = brouwer_zero(from_map([](const Eigen::VectorXd& v) {
    return Eigen::VectorXd::Constant(1, v[0] * v[0] * v[0] - v[0] - 6.0);
  }, 1), 2.0);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.v[0], 2.0, 1e-10);
}

TEST(BrouwerZero, RandomMapsAgreeWithGridSearch) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 6; ++t) {
    const int dim = t < 5 ? 2 : 3;
    const auto m = oracle::random_map(dim, rng);
    const oracle::Map F = [&m](const Eigen::VectorXd& v) { return m(v); };
    EXPECT_GE(oracle::sphere_min_pairing(F, dim, m.R, 1000, rng), 0.0);
    const auto r = brouwer_zero(from_map(F, dim), m.R);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LE(r.v.norm(), m.R);
    const Eigen::VectorXd g = oracle::grid_search_zero(F, dim, m.R, dim == 2 ? 1e-3 : 2e-3, 2);
    EXPECT_LT((r.v - g).cwiseAbs().maxCoeff(), dim == 2 ? 2e-3 : 4e-3);
  }
}

TEST(BrouwerZero, Preconditions) {
  ZeroProblem z;
  z.dimension = 2;
  EXPECT_THROW(brouwer_zero(z, 1.0), PreconditionError);
  z.residual = [](const Eigen::VectorXd& v) { return v; };
  EXPECT_THROW(brouwer_zero(z, 0.0), PreconditionError);
  BrouwerOptions o;
  o.x0 = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(brouwer_zero(z, 1.0, o), PreconditionError);
}

TEST(BrouwerZero, HistoryRecordsTheResidual) {
  const auto r = brouwer_zero(from_map([](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(v.array().cube() + v.array() - 0.5);
  }, 4), 3.0);
  ASSERT_TRUE(r.converged);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.history.back(), 1e-10);
  EXPECT_EQ(r.residual_sup, r.history.back());
}

TEST(RequiredExponents, IdentityAndConvolution) {
  Problem pr = make("zero");
  const auto e = required_exponents(pr, 1);
  for (double r : {1.0, 2.0, 3.0, 6.0, 1.5}) EXPECT_NE(std::find(e.begin(), e.end(), r), e.end()) << r;
}

TEST(SolveLevel, ZeroRightHandSideGivesZero) {
  const auto h = unit_interval(5);
  const Problem pr = make("zero");
  for (int n = 0; n < h.num_levels(); ++n) {
    const auto s = solve_level(pr, h, n, 1.0);
    ASSERT_TRUE(s.converged);
    EXPECT_EQ(s.u.coeffs.norm(), 0.0);
  }
}

TEST(SolveLevel, ConstantForcing) {
  const auto h = unit_interval(6);
  const Problem pr = make("constant", {{"value", 1.0}});
  for (int n = 0; n < h.num_levels(); ++n) {
    const auto s = solve_level(pr, h, n, 10.0);
    ASSERT_TRUE(s.converged) << s.message;
    EXPECT_LE(s.residual_sup, 1e-10);
    EXPECT_LE(s.grad_norm_p, 10.0);
    EXPECT_LE(level_residual(pr, h, s.u).values.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SphereCertificate, NonnegativeForCoerciveProblem) {
  const auto h = unit_interval(4);
  const Problem pr = make("constant", {{"value", 1.0}});
  const auto c = sphere_certificate(pr, h, 3, 5.0, 500, 3);
  EXPECT_EQ(c.samples, 500);
  EXPECT_EQ(c.negatives, 0);
  EXPECT_GT(c.min_pairing, 0.0);
}

TEST(Diagnostics, VanishWhenLevelsMatchTheLimit) {
  const auto h = unit_interval(5);
  const Problem pr = make("zero");
  const FEFunction coarse = interpolate(h, 1, [](const Point& x) { return std::sin(M_PI * x[0]); });
  LevelSolve s;
  s.level = 1;
  s.u = coarse;
  const auto d = d1_diagnostics(pr, h, {s}, prolongate(h, coarse, h.finest_index()), 16);
  ASSERT_EQ(d.entries.size(), 1u);
  EXPECT_LT(d.entries[0].a, 1e-15);
  EXPECT_LT(std::abs(d.entries[0].c_strong), 1e-15);
}

TEST(Diagnostics, FullPairingSubtractsTheForcing) {
  const auto h = unit_interval(5);
  const Problem pr = make("constant", {{"value", 2.0}});
  const auto r = run_hierarchy(pr, h);
  ASSERT_EQ(r.status, RunStatus::ok) << r.message;
  for (const auto& lv : r.levels)
    if (lv.diag) EXPECT_NEAR(lv.diag->c_full - lv.diag->c_strong, -lv.diag->f_integral, 1e-14);
}

TEST(Diagnostics, TestSetSize) {
  const auto h = unit_interval(4);
  EXPECT_EQ(d1_test_set(h, 3).size(), 7u);
  EXPECT_EQ(d1_test_set(h, 1000).size(), h.finest().dim() + 4);
}

TEST(RunHierarchy, ZeroForcing) {
  const auto h = unit_interval(5);
  const auto r = run_hierarchy(make("zero"), h);
  ASSERT_EQ(r.status, RunStatus::ok);
  ASSERT_EQ(r.levels.size(), 5u);
  for (const auto& lv : r.levels) {
    EXPECT_EQ(lv.solve.grad_norm_p, 0.0);
    if (lv.diag) {
      EXPECT_EQ(lv.diag->a, 0.0);
      EXPECT_EQ(lv.diag->b, 0.0);
      EXPECT_EQ(lv.diag->c_strong, 0.0);
    }
  }
  for (double inc : r.increments) EXPECT_EQ(inc, 0.0);
  EXPECT_FALSE(r.non_cauchy);
  EXPECT_EQ(r.kappa, 0.0);
}

TEST(RunHierarchy, StaysInsideTheBall) {
  const auto h = unit_interval(6);
  const auto r = run_hierarchy(make("mixed", {{"sigma", {{"kind", "constant"}, {"value", 1.0}}}, {"a1", 0.2}, {"a2", 0.1}}), h);
  ASSERT_EQ(r.status, RunStatus::ok) << r.message;
  EXPECT_GT(r.R, 0.0);
  for (const auto& lv : r.levels) {
    EXPECT_TRUE(lv.solve.converged);
    EXPECT_LE(lv.solve.grad_norm_p, r.R);
    EXPECT_GE(lv.apriori_margin, 0.0);
    EXPECT_EQ(lv.solve.sphere.negatives, 0);
  }
}

TEST(RunHierarchy, Deterministic) {
  const auto h = unit_interval(5);
  const Problem pr = make("mixed", {{"sigma", {{"kind", "abs_linear"}, {"a", 1.0}, {"b", 0.5}}}, {"a1", 0.1}});
  EXPECT_EQ(run_hierarchy(pr, h).to_json().dump(), run_hierarchy(pr, h).to_json().dump());
}

TEST(RunHierarchy, HypothesisPolicy) {
  const auto h = unit_interval(4);
  Problem pr = make("signed_power", {{"a1", 50.0}});
  const auto refused = run_hierarchy(pr, h);
  EXPECT_EQ(refused.status, RunStatus::hypothesis_failed);
  EXPECT_TRUE(refused.levels.empty());
  pr.policy = HypothesisPolicy::warn;
  const auto warned = run_hierarchy(pr, h);
  EXPECT_EQ(warned.status, RunStatus::ok) << warned.message;
  EXPECT_TRUE(std::isinf(warned.R));
  EXPECT_EQ(warned.levels.size(), 4u);
}

TEST(RunHierarchy, CsvHasOneRowPerLevel) {
  const auto h = unit_interval(4);
  const auto r = run_hierarchy(make("constant", {{"value", 1.0}}), h);
  const std::string csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(RunHierarchy, ThinConvolutionApproachesIdentity) {
  const auto h = unit_interval(5);
  const json params = {{"sigma", {{"kind", "constant"}, {"value", 1.0}}}, {"a1", 0.3}};
  Kernel k;
  k.shape = Kernel::Shape::hat;
  k.width = 2e-3;
  const int n = h.finest_index();
  const auto id = solve_level(make("mixed", params), h, n, 10.0);
  const auto conv = solve_level(make("mixed", params, IntrinsicOperator::convolution(k)), h, n, 10.0);
  ASSERT_TRUE(id.converged && conv.converged) << conv.message;
  const FEFunction diff{n, id.u.coeffs - conv.u.coeffs};
  EXPECT_LT(grad_norm_p(h, diff, 3.0), 1e-3 * id.grad_norm_p);
}

TEST(RunHierarchy, SuppliedConstantsAreUsed) {
  const auto h = unit_interval(4);
  const Problem pr = make("constant", {{"value", 1.0}});
  EmbeddingConstants c(1, 3.0, 6.0);
  for (double r : required_exponents(pr, 1)) c.set_exact(r, 0.5);
  const auto res = run_hierarchy(pr, h, &c);
  ASSERT_EQ(res.status, RunStatus::ok);
  EXPECT_EQ(res.constants.S(2.0), 0.5);
}
