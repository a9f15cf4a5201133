#include <cmath>
#include <cstdio>
#include <sstream>

#include "compete/galerkin_solver.hpp"

namespace compete {

namespace {

using nlohmann::json;

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Shortest round-trip representation keeps CSV output byte-stable.
std::string cell(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::hypothesis_failed: return "hypothesis_failed";
    case RunStatus::solver_failed: return "solver_failed";
  }
  return "ok";
}

}  // namespace

json HierarchyResult::to_json() const {
  json levels_json = json::array();
  for (const LevelRecord& r : levels) {
    const LevelSolve& s = r.solve;
    json row{{"level", s.level + 1},
             {"dim", s.u.coeffs.size()},
             {"h", r.mesh_size},
             {"grad_norm_p", s.grad_norm_p},
             {"residual_sup", s.residual_sup},
             {"R", num(s.R)},
             {"apriori_margin", num(r.apriori_margin)},
             {"converged", s.converged},
             {"newton_iters", s.newton_iterations},
             {"continuation_stages", s.continuation_stages},
             {"outer_iters", s.outer_iterations},
             {"energy_defect", r.energy_defect},
             {"energy_bound", r.energy_bound},
             {"sphere", {{"samples", s.sphere.samples},
                         {"negatives", s.sphere.negatives},
                         {"min_pairing", s.sphere.samples ? json(s.sphere.min_pairing) : json(nullptr)}}},
             {"message", s.message}};
    if (r.diag) {
      row["diag"] = {{"a", r.diag->a},
                     {"b", r.diag->b},
                     {"c_strong", r.diag->c_strong},
                     {"c_full", r.diag->c_full},
                     {"f_integral", r.diag->f_integral}};
    } else {
      row["diag"] = nullptr;
    }
    json coeffs = json::array();
    for (Eigen::Index i = 0; i < s.u.coeffs.size(); ++i) coeffs.push_back(s.u.coeffs[i]);
    row["coefficients"] = std::move(coeffs);
    levels_json.push_back(std::move(row));
  }
  json hyp = json::array();
  for (const HypothesisReport& h : hypotheses) hyp.push_back(h.to_json());
  json j{{"status", status_name(status)},
         {"message", message},
         {"constants", constants.to_json()},
         {"hypotheses", hyp},
         {"kappa", kappa},
         {"c0", c0},
         {"R", num(R)},
         {"levels", levels_json},
         {"increments", increments},
         {"non_cauchy", non_cauchy}};
  if (certificate)
    j["certificate"] = {{"K1", certificate->K1},
                        {"K2", certificate->K2},
                        {"K3", certificate->K3},
                        {"alpha", certificate->alpha},
                        {"beta", certificate->beta},
                        {"provenance", certificate->provenance}};
  else
    j["certificate"] = nullptr;
  return j;
}

std::string HierarchyResult::to_csv() const {
  std::ostringstream os;
  os << "level,dim,grad_norm_p,residual_sup,R,apriori_margin,diag_a,diag_b,diag_c_strong,diag_c_full,newton_iters\n";
  for (const LevelRecord& r : levels) {
    const LevelSolve& s = r.solve;
    os << s.level + 1 << ',' << s.u.coeffs.size() << ',' << cell(s.grad_norm_p) << ',' << cell(s.residual_sup) << ','
       << cell(s.R) << ',' << cell(r.apriori_margin) << ',';
    if (r.diag)
      os << cell(r.diag->a) << ',' << cell(r.diag->b) << ',' << cell(r.diag->c_strong) << ',' << cell(r.diag->c_full);
    else
      os << ",,,";
    os << ',' << s.newton_iterations << '\n';
  }
  return os.str();
}

}  // namespace compete
