// Acceptance suite: one PASS/FAIL line per criterion, then a summary.
// Exit status is 0 once every criterion has been evaluated; with --strict it is
// 1 when any criterion failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "compete/commands.hpp"
#include "compete/problem.hpp"
#include "oracles.hpp"

using namespace compete;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

json manufactured_config() {
  return json::parse(R"({
    "domain": {"kind": "interval", "a": 0.0, "b": 1.0, "elements": 2},
    "p": 3.0, "q": 2.0, "levels": 7,
    "f": {"kind": "manufactured_p3q2"},
    "T": {"kind": "identity"},
    "seed": 1
  })");
}

// ‖∇(u_n - u)‖_p and ‖u_n - u‖_p against the closed-form solution.
std::pair<double, double> exact_errors(const SpaceHierarchy& h, const FEFunction& un, const ExactSolution& ex, double p) {
  double gw = 0.0, lp = 0.0;
  for (const auto& q : sample(h, un).points) {
    const Vec2 g = ex.gradient(q.x);
    gw += q.weight * std::pow(std::hypot(q.gradient[0] - g[0], q.gradient[1] - g[1]), p);
    lp += q.weight * std::pow(std::abs(q.value - ex.value(q.x)), p);
  }
  return {std::pow(gw, 1.0 / p), std::pow(lp, 1.0 / p)};
}

// ------------------------------------------------------------------ 1

Outcome manufactured_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec spec = parse_config_json(manufactured_config());
  const SpaceHierarchy h = build_hierarchy(spec);
  const Problem pr = make_problem(spec);
  const HierarchyResult res = run_hierarchy(pr, h);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (res.status != RunStatus::ok) return {false, "run failed: " + res.message};
  std::vector<double> err;
  for (const auto& lv : res.levels) err.push_back(exact_errors(h, lv.solve.u, *pr.f.exact_solution(), 3.0).first);
  const std::size_t n = err.size();
  const double rate = std::log2(err[n - 2] / err[n - 1]);
  const bool pass = err.back() <= 1e-2 && rate >= 0.8 && secs <= 30.0;
  return {pass, fmt("levels=%zu finest W1,3 error=%.4g (<=1e-2) rate=%.3g (>=0.8) runtime=%.2fs (<=30s)", n,
                    err.back(), rate, secs)};
}

// ------------------------------------------------------------------ 2

json random_convection(std::mt19937_64& rng, double shrink) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double p = 2.5 + 1.5 * U(rng);
  const double q = 1.6 + (p - 2.0) * U(rng);
  const double ph = 2.0 * p;
  const double beta_max = std::min(p - 1.0, p * (ph - 1.0) / ph);
  json params = {{"a1", shrink * (0.02 + 0.2 * U(rng))},
                 {"a2", shrink * (0.02 + 0.2 * U(rng))},
                 {"alpha", 0.3 + (p - 1.3) * U(rng)},
                 {"beta", 0.3 + (beta_max - 0.35) * U(rng)},
                 {"signed", U(rng) < 0.5},
                 {"sigma", {{"kind", "abs_linear"}, {"a", 2.0 * U(rng)}, {"b", 0.1 + U(rng)}}}};
  return {{"domain", {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}, {"elements", 2}}},
          {"p", p}, {"q", q}, {"levels", 5},
          {"f", {{"kind", "mixed"}, {"params", params}}},
          {"solver", {{"sphere_samples", 100}}},
          {"seed", 17}};
}

Outcome apriori_bound() {
  std::mt19937_64 rng(2024);
  int problems = 0, levels = 0, violations = 0, failures = 0;
  double worst = -INFINITY;
  auto account = [&](const HierarchyResult& r) {
    ++problems;
    if (r.status != RunStatus::ok) {
      ++failures;
      return;
    }
    for (const auto& lv : r.levels) {
      ++levels;
      worst = std::max(worst, lv.solve.grad_norm_p - r.R);
      if (!(lv.solve.grad_norm_p <= r.R)) ++violations;
    }
  };
  {
    const ProblemSpec spec = parse_config_json(manufactured_config());
    account(run_hierarchy(make_problem(spec), build_hierarchy(spec)));
  }
  while (problems < 20) {
    const json base = random_convection(rng, 1.0);
    // a1, a2 > 0 are halved until (H2) passes; the constants do not change.
    json cfg = base;
    const ProblemSpec spec0 = parse_config_json(cfg);
    const SpaceHierarchy h = build_hierarchy(spec0);
    const EmbeddingConstants C = estimate_problem_constants(make_problem(spec0), h);
    HierarchyResult r;
    for (int k = 0; k < 12; ++k) {
      r = run_hierarchy(make_problem(parse_config_json(cfg)), h, &C);
      if (r.status != RunStatus::hypothesis_failed) break;
      cfg["f"]["params"]["a1"] = cfg["f"]["params"]["a1"].get<double>() / 2;
      cfg["f"]["params"]["a2"] = cfg["f"]["params"]["a2"].get<double>() / 2;
    }
    account(r);
  }
  const bool pass = violations == 0 && failures == 0;
  return {pass, fmt("problems=%d levels=%d violations=%d run_failures=%d max(|grad u_n|_p - R)=%.4g", problems,
                    levels, violations, failures, worst)};
}

// ------------------------------------------------------------------ 3

Outcome diagnostics() {
  const ProblemSpec spec = parse_config_json(manufactured_config());
  const HierarchyResult res = run_hierarchy(make_problem(spec), build_hierarchy(spec));
  if (res.status != RunStatus::ok) return {false, "run failed: " + res.message};
  const std::size_t n = res.levels.size();
  const D1Entry& last = *res.levels[n - 2].diag;
  const D1Entry& first = *res.levels[0].diag;
  const double ratio = first.a / last.a;
  const bool pass = std::abs(last.c_strong) <= 1e-3 && std::abs(last.c_full) <= 1e-3 && ratio >= 10.0;
  return {pass, fmt("level %zu: c_strong=%.3g c_full=%.3g (<=1e-3); diag_a level1/level%zu=%.3g/%.3g=%.3g (>=10)",
                    n - 1, last.c_strong, last.c_full, n - 1, first.a, last.a, ratio)};
}

// ------------------------------------------------------------------ 4

Outcome brouwer_realization() {
  std::mt19937_64 rng(4);
  int maps = 0, matched = 0, sphere_bad = 0, unconverged = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int dim = t % 2 == 0 ? 2 : 3;
    const auto m = oracle::random_map(dim, rng);
    const oracle::Map F = [&m](const Eigen::VectorXd& v) { return m(v); };
    if (oracle::sphere_min_pairing(F, dim, m.R, 1000, rng) < 0.0) ++sphere_bad;
    ZeroProblem z;
    z.dimension = dim;
    z.residual = F;
    const auto r = brouwer_zero(z, m.R);
    ++maps;
    if (!r.converged) {
      ++unconverged;
      continue;
    }
    const Eigen::VectorXd g = oracle::grid_search_zero(F, dim, m.R, 1e-3, 2);
    const double d = (r.v - g).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    if (d <= 1e-2) ++matched;
  }

  const ProblemSpec spec = parse_config_json(manufactured_config());
  const SpaceHierarchy h = build_hierarchy(spec);
  const Problem pr = make_problem(spec);
  const HierarchyResult res = run_hierarchy(pr, h, nullptr);
  int negatives = -1;
  double min_pair = NAN;
  if (res.status == RunStatus::ok) {
    const auto c = sphere_certificate(pr, h, h.finest_index(), res.R, 1000, pr.seed);
    negatives = c.negatives;
    min_pair = c.min_pairing;
  }
  const bool pass = matched == maps && sphere_bad == 0 && unconverged == 0 && negatives == 0;
  return {pass, fmt("maps=%d matched=%d worst sup-distance to grid oracle=%.3g (<=1e-2); manufactured R=%.4g, "
                    "1000 sphere samples, negatives=%d, min pairing=%.4g",
                    maps, matched, worst, res.R, negatives, min_pair)};
}

// ------------------------------------------------------------------ 5

Outcome constants() {
  const SpaceHierarchy h = SpaceHierarchy::build(DomainMesh::interval(0.0, 1.0, 2), 7);
  const double pi2 = M_PI * M_PI;
  const double l2 = estimate_lambda1p(h, 2.0).value;
  const double l3 = estimate_lambda1p(h, 3.0).value;
  const double o3 = oracle::shooting_lambda1p(3.0);
  EmbeddingOptions eo;
  eo.safety = 1.0;
  const double s2 = estimate_embedding_constant(h, 2.0, 2.0, eo).raw;

  const SpaceHierarchy h4 = SpaceHierarchy::build(DomainMesh::interval(0.0, 1.0, 2), 4);
  bool monotone = true;
  std::string seq;
  for (double p : {2.0, 3.0}) {
    const auto lv = estimate_lambda1p_levels(h4, p);
    for (std::size_t n = 1; n < lv.size(); ++n) monotone = monotone && lv[n].value <= lv[n - 1].value;
    seq += fmt(" p=%g:", p);
    for (const auto& e : lv) seq += fmt(" %.5g", e.value);
  }
  const double e2 = std::abs(l2 - pi2) / pi2, e3 = std::abs(l3 - o3) / o3, es = std::abs(s2 * M_PI - 1.0);
  const bool pass = e2 <= 0.01 && e3 <= 0.02 && es <= 0.02 && monotone;
  return {pass, fmt("lambda_1,2=%.6g (rel %.2e, <=1%%) lambda_1,3=%.6g vs shooting %.6g (rel %.2e, <=2%%) "
                    "S_2 raw=%.6g (rel %.2e, <=2%%) levels nonincreasing=%s;",
                    l2, e2, l3, o3, e3, s2, es, monotone ? "yes" : "no") + seq};
}

// ------------------------------------------------------------------ 6

Outcome intrinsic_certificates() {
  const SpaceHierarchy h = SpaceHierarchy::build(DomainMesh::interval(0.0, 1.0, 2), 7);
  const int fin = h.finest_index();
  const double p = 3.0, ph = 6.0;
  EmbeddingConstants C(1, p, ph);
  C.set(ph, estimate_embedding_constant(h, ph, p));

  // Random smooth trials (sine series) with ‖∇u‖_p log-uniform in [1e-3, 1e3],
  // every other one with a rough random P1 component added.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<FEFunction> trials;
  std::vector<bool> smooth;
  for (int t = 0; t < 1000; ++t) {
    double c[4];
    for (double& ck : c) ck = U(rng);
    FEFunction u = interpolate(h, fin, [&](const Point& x) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += c[k] * std::sin((k + 1) * M_PI * x[0]);
      return s;
    });
    const bool rough = t % 2 == 1;
    if (rough)
      for (Eigen::Index i = 0; i < u.coeffs.size(); ++i) u.coeffs[i] += 0.05 * U(rng);
    u.coeffs *= std::pow(10.0, -3.0 + 6.0 * (0.5 * (U(rng) + 1.0))) / grad_norm_p(h, u, p);
    trials.push_back(std::move(u));
    smooth.push_back(!rough);
  }

  auto conv = [](Kernel::Shape s, double width) {
    Kernel k;
    k.shape = s;
    k.width = width;
    return IntrinsicOperator::convolution(k);
  };
  LiftProfile affine;
  affine.a = 0.5;
  affine.b = -1.0;
  LiftProfile cosine;
  cosine.kind = "cosine";
  cosine.amplitude = 0.3;
  cosine.frequency = 2.0;
  cosine.offset = 0.1;
  const std::vector<std::pair<std::string, IntrinsicOperator>> ops{
      {"identity", IntrinsicOperator::identity()},
      {"lift(affine)", IntrinsicOperator::boundary_lift(affine)},
      {"lift(cosine)", IntrinsicOperator::boundary_lift(cosine)},
      {"conv(box)", conv(Kernel::Shape::box, 0.25)},
      {"conv(hat)", conv(Kernel::Shape::hat, 0.3)}};

  bool pass = true;
  std::string detail;
  for (const auto& [name, T] : ops) {
    const auto cert = certificate(T, h, p, p - 1.0, p - 1.0, C);
    const auto chk = certificate_check(T, cert, h, trials, p, ph);
    pass = pass && chk.worst_margin <= 0.0;
    detail += fmt("%s worst margin=%.3g; ", name.c_str(), chk.worst_margin);
  }

  // Young: ‖ρ*u‖_r <= ‖ρ‖_1‖u‖_r; tolerance 1e-8 plus 1e-3 relative for the
  // quadrature of the shifted |u|^r. Derivative formula: central differences of
  // the values (step 1e-3) against ρ*∇u, relative to ‖∇u‖_p, on smooth trials.
  for (const auto& [name, T] : ops) {
    if (T.kind() != IntrinsicOperator::Kind::convolution) continue;
    double young_ratio = 0.0, fd_worst = 0.0;
    int young_bad = 0, fd_bad = 0;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const FEFunction& u = trials[t];
      const QuadratureSamples tu = apply(T, h, u);
      for (double r : {p, ph}) {
        const double lhs = samples_lebesgue_norm(tu, r), rhs = T.kernel().l1_norm() * lebesgue_norm(h, u, r);
        if (rhs > 0.0) young_ratio = std::max(young_ratio, lhs / rhs);
        if (!(lhs <= rhs * (1.0 + 1e-3) + 1e-8)) ++young_bad;
      }
      if (!smooth[t]) continue;
      const double scale = grad_norm_p(h, u, p);
      const QuadratureSamples g = convolve_gradient(T, h, u);
      for (std::size_t k = 13; k < g.points.size(); k += g.points.size() / 4) {
        const Point x = g.points[k].x;
        const double d = 1e-3;
        const double fd = (convolve_at(T, h, u, {x[0] + d, 0.0}) - convolve_at(T, h, u, {x[0] - d, 0.0})) / (2 * d);
        const double e = std::abs(fd - g.points[k].gradient[0]) / scale;
        fd_worst = std::max(fd_worst, e);
        if (!(e <= 1e-3)) ++fd_bad;
      }
    }
    pass = pass && young_bad == 0 && fd_bad == 0;
    detail += fmt("%s Young max ratio=%.6g violations=%d, FD worst rel=%.3g (<=1e-3) violations=%d; ", name.c_str(),
                  young_ratio, young_bad, fd_worst, fd_bad);
  }
  return {pass, fmt("%zu trials per operator; ", trials.size()) + detail};
}

// ------------------------------------------------------------------ 7

Outcome checker_formulas() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int equal = 0, total = 0;
  for (int t = 0; t < 100; ++t) {
    const double p = 1.5 + 3.0 * U(rng), ph = p * (1.5 + U(rng));
    const double a1 = U(rng), a2 = U(rng);
    const double S_ph = 0.05 + U(rng), S_a = 0.05 + U(rng), S_1 = 0.05 + U(rng);
    const double kernel = 0.2 + 2.0 * U(rng);
    EmbeddingConstants C(1, p, ph);
    C.set_exact(ph, S_ph);
    C.set_exact(ph / (ph - p + 1.0), S_a);
    C.set_exact(1.0, S_1);
    C.whole_space_S = 0.05 + U(rng);

    // (H2) with α = β = p-1 and the T2 substitutions: lift constants at u_0 = 0
    // and S_1 in place of S_{p/(p-β)}.
    EmbeddingConstants H = C;
    H.set_exact(p, S_1);
    const auto t2 = check_t2_condition(a1, a2, p, C);
    const auto h2 = check_h2(a1, a2, lift_certificate(p, S_ph, 0.0, 0.0), H, p - 1.0, p - 1.0);
    ++total;
    if (std::memcmp(&t2.value, &h2.value, sizeof(double)) == 0 && t2.pass == h2.pass) ++equal;

    const auto t3 = check_t3_condition(a1, a2, p, 1, kernel, C);
    const auto h3 = check_h2(a1, a2, convolution_certificate(p, 1, kernel, *C.whole_space_S), H, p - 1.0, p - 1.0);
    ++total;
    if (std::memcmp(&t3.value, &h3.value, sizeof(double)) == 0 && t3.pass == h3.pass) ++equal;
  }
  return {equal == total, fmt("100 random tuples: T2 and T3 checkers bitwise equal to (H2) with substitutions in %d/%d comparisons", equal, total)};
}

// ------------------------------------------------------------------ 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const ProblemSpec spec = parse_config_json(manufactured_config());
  const fs::path root = fs::temp_directory_path() / "compete_acceptance_determinism";
  fs::remove_all(root);
  std::string reports[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    CommandOptions o;
    o.out_dir = root / ("run" + std::to_string(i));
    codes[i] = cmd_solve(spec, o);
    reports[i] = slurp(o.out_dir / "solve_report.json");
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same && codes[0] == codes[1], fmt("exit codes %d/%d, report sizes %zu/%zu bytes, identical=%s", codes[0], codes[1],
                                            reports[0].size(), reports[1].size(), same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"manufactured solution convergence", manufactured_convergence},
      {"a-priori bound |grad u_n|_p <= R", apriori_bound},
      {"generalized-solution diagnostics", diagnostics},
      {"zero finder vs grid oracle and sphere certificate", brouwer_realization},
      {"eigenvalue and embedding constants", constants},
      {"intrinsic operator certificates", intrinsic_certificates},
      {"hypothesis checker formulas", checker_formulas},
      {"determinism of solve reports", determinism}};

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    passed += o.pass;
    std::printf("%s criterion %zu: %s [%.1fs] %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("SUMMARY %d/%zu criteria passed\n", passed, criteria.size());
  return strict && passed != static_cast<int>(criteria.size()) ? 1 : 0;
}
