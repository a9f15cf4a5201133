#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "compete/commands.hpp"

namespace compete {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

void say(const CommandOptions& opts, const std::string& msg) {
  if (opts.log) *opts.log << msg << '\n';
}

int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return 0;
    case RunStatus::hypothesis_failed: return 2;
    case RunStatus::solver_failed: return 3;
  }
  return 3;
}

std::string cell(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json error_report(const ProblemSpec& spec, const std::string& what) {
  return {{"config", spec.to_json()}, {"status", "error"}, {"message", what}};
}

std::vector<ConvectionProbe> envelope_probes(const SpaceHierarchy& h, std::uint64_t seed, int count) {
  const Level& lv = h.finest();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, lv.num_quad_points() - 1);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  std::vector<ConvectionProbe> out;
  for (int i = 0; i < count; ++i) {
    ConvectionProbe pr{lv.quad_point(pick(rng)), U(rng), {U(rng), h.dimension() == 2 ? U(rng) : 0.0}};
    out.push_back(pr);
  }
  return out;
}

}  // namespace

ProblemSpec with_overrides(ProblemSpec spec, const CommandOptions& opts) {
  if (opts.seed) spec.seed = *opts.seed;
  if (opts.levels) {
    if (*opts.levels < 1 || *opts.levels > 16)
      throw ConfigError(ConfigCode::levels_range, "levels = " + std::to_string(*opts.levels) + " must lie in [1, 16]");
    spec.levels = *opts.levels;
  }
  return spec;
}

int cmd_solve(const ProblemSpec& spec, const CommandOptions& opts) {
  const fs::path json_path = opts.out_dir / "solve_report.json";
  const fs::path csv_path = opts.out_dir / "solve_report.csv";
  try {
    const SpaceHierarchy h = build_hierarchy(spec);
    const Problem problem = make_problem(spec);
    say(opts, "solving " + std::to_string(spec.levels) + " levels");
    const HierarchyResult res = run_hierarchy(problem, h);
    json j = res.to_json();
    j["config"] = spec.to_json();
    write_json(json_path, j);
    write_file(csv_path, res.to_csv());
    say(opts, "status " + j["status"].get<std::string>() + (res.message.empty() ? "" : ": " + res.message));
    return exit_code(res.status);
  } catch (const Error& e) {
    write_json(json_path, error_report(spec, e.what()));
    write_file(csv_path, HierarchyResult{}.to_csv());
    say(opts, std::string("error: ") + e.what());
    return 1;
  }
}

int cmd_check(const ProblemSpec& spec, const CommandOptions& opts) {
  const fs::path path = opts.out_dir / "check_report.json";
  try {
    const SpaceHierarchy h = build_hierarchy(spec);
    const Problem problem = make_problem(spec);
    const int N = h.dimension();
    const double p = spec.p;
    const GrowthEnvelope& env = problem.f.envelope();
    const EmbeddingConstants C = estimate_problem_constants(problem, h);
    const IntrinsicCertificate cert = certificate(problem.T, h, p, env.alpha, env.beta, C);

    std::vector<HypothesisReport> reports{check_h2(env.a1, env.a2, cert, C, env.alpha, env.beta)};
    if (problem.T.kind() == IntrinsicOperator::Kind::boundary_lift)
      reports.push_back(check_t2_condition(env.a1, env.a2, p, C));
    if (problem.T.kind() == IntrinsicOperator::Kind::convolution)
      reports.push_back(check_t3_condition(env.a1, env.a2, p, N, problem.T.kernel().l1_norm(), C));

    const EnvelopeReport er = growth_envelope_check(problem.f, env, envelope_probes(h, spec.seed, 1000));
    const bool h1_pass = er.worst_margin <= 1e-9;

    bool all = h1_pass;
    json hyp = json::array();
    for (const HypothesisReport& r : reports) {
      hyp.push_back(r.to_json());
      all = all && r.pass;
    }
    json j{{"config", spec.to_json()},
           {"status", all ? "pass" : "fail"},
           {"hypotheses", hyp},
           {"envelope", {{"name", "H1"}, {"worst_margin", er.worst_margin}, {"samples", er.samples}, {"pass", h1_pass}}},
           {"certificate",
            {{"K1", cert.K1}, {"K2", cert.K2}, {"K3", cert.K3}, {"provenance", cert.provenance}}},
           {"constants", C.to_json()}};
    write_json(path, j);
    say(opts, std::string("hypotheses ") + (all ? "pass" : "fail"));
    return all ? 0 : 2;
  } catch (const Error& e) {
    write_json(path, error_report(spec, e.what()));
    say(opts, std::string("error: ") + e.what());
    return 1;
  }
}

int cmd_constants(const ProblemSpec& spec, const CommandOptions& opts) {
  const fs::path path = opts.out_dir / "constants.json";
  try {
    const SpaceHierarchy h = build_hierarchy(spec);
    const EmbeddingConstants C = estimate_problem_constants(make_problem(spec), h);
    write_json(path, C.to_json());
    say(opts, "lambda1p " + cell(C.lambda1p->value));
    return 0;
  } catch (const Error& e) {
    write_json(path, error_report(spec, e.what()));
    say(opts, std::string("error: ") + e.what());
    return 1;
  }
}

int cmd_study(const ProblemSpec& spec, const CommandOptions& opts) {
  const fs::path path = opts.out_dir / "study.csv";
  const std::string header = "level,dim,h,err_w1p,err_lp,rate_w1p,rate_lp\n";
  try {
    const Problem problem = make_problem(spec);
    const auto& exact = problem.f.exact_solution();
    if (!exact) throw PreconditionError("study needs a convection term with a known exact solution");
    const SpaceHierarchy h = build_hierarchy(spec);
    const HierarchyResult res = run_hierarchy(problem, h);
    const double p = spec.p;
    std::ostringstream os;
    os << header;
    double prev_w = 0.0, prev_l = 0.0;
    for (std::size_t i = 0; i < res.levels.size(); ++i) {
      const LevelSolve& s = res.levels[i].solve;
      double ew = 0.0, el = 0.0;
      for (const QuadraturePoint& qp : sample(h, s.u).points) {
        const Vec2 g = exact->gradient(qp.x);
        const double dx = qp.gradient[0] - g[0], dy = qp.gradient[1] - g[1];
        ew += qp.weight * std::pow(std::sqrt(dx * dx + dy * dy), p);
        el += qp.weight * std::pow(std::abs(qp.value - exact->value(qp.x)), p);
      }
      ew = std::pow(ew, 1.0 / p);
      el = std::pow(el, 1.0 / p);
      const double rw = i > 0 ? std::log2(prev_w / ew) : NAN;
      const double rl = i > 0 ? std::log2(prev_l / el) : NAN;
      os << s.level + 1 << ',' << s.u.coeffs.size() << ',' << cell(res.levels[i].mesh_size) << ',' << cell(ew) << ','
         << cell(el) << ',' << cell(rw) << ',' << cell(rl) << '\n';
      prev_w = ew;
      prev_l = el;
    }
    write_file(path, os.str());
    say(opts, "study written to " + path.string());
    return exit_code(res.status);
  } catch (const Error& e) {
    write_file(path, header);
    say(opts, std::string("error: ") + e.what());
    return 1;
  }
}

}  // namespace compete
