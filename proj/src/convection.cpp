#include <algorithm>
#include <cmath>
#include <limits>

#include "compete/error.hpp"
#include "compete/operators.hpp"

namespace compete {

namespace {

double signed_pow(double s, double e) { return s == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(s), e), s); }

// d/ds sign(s)|s|^e = e|s|^{e-1}; taken as 0 at s = 0 (singular for e < 1).
double signed_pow_derivative(double s, double e) {
  const double a = std::abs(s);
  if (a == 0.0) return e == 1.0 ? 1.0 : 0.0;
  return e * std::pow(a, e - 1.0);
}

double norm2(const Vec2& v) { return std::sqrt(dot(v, v)); }

double get_number(const nlohmann::json& params, const char* key, double fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  return params.at(key).get<double>();
}

}  // namespace

// ---------------------------------------------------------------- weights

WeightFunction WeightFunction::zero() { return {}; }

WeightFunction WeightFunction::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw PreconditionError("constant weight must be finite and >= 0");
  WeightFunction w;
  w.kind_ = "constant";
  w.a_ = value;
  return w;
}

WeightFunction WeightFunction::abs_linear(double a, double b) {
  if (!(a >= 0.0 && b >= 0.0)) throw PreconditionError("abs_linear weight needs a, b >= 0");
  WeightFunction w;
  w.kind_ = "abs_linear";
  w.a_ = a;
  w.b_ = b;
  return w;
}

WeightFunction WeightFunction::nodal(std::vector<double> x, std::vector<double> values) {
  if (x.size() != values.size() || x.size() < 2)
    throw PreconditionError("nodal weight needs matching x/values arrays with at least two entries");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0 && !(x[i] > x[i - 1])) throw PreconditionError("nodal weight abscissae must increase");
    if (!(values[i] >= 0.0)) throw PreconditionError("nodal weight values must be >= 0");
  }
  WeightFunction w;
  w.kind_ = "nodal";
  w.xs_ = std::move(x);
  w.values_ = std::move(values);
  return w;
}

WeightFunction WeightFunction::from_json(const nlohmann::json& j) {
  const std::string kind = j.is_object() && j.contains("kind") ? j.at("kind").get<std::string>() : "";
  if (kind == "zero") return zero();
  if (kind == "constant") return constant(j.at("value").get<double>());
  if (kind == "abs_linear") return abs_linear(j.at("a").get<double>(), j.at("b").get<double>());
  if (kind == "nodal")
    return nodal(j.at("x").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  throw UnknownCatalogId("unknown sigma kind '" + kind + "' (known: zero, constant, abs_linear, nodal)");
}

double WeightFunction::operator()(const Point& x) const {
  if (kind_ == "constant") return a_;
  if (kind_ == "abs_linear") return a_ * std::abs(1.0 - 2.0 * x[0]) + b_;
  if (kind_ == "nodal") {
    if (x[0] < xs_.front() || x[0] > xs_.back()) return 0.0;
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x[0]);
    if (it == xs_.end()) return values_.back();
    const auto i = static_cast<std::size_t>(it - xs_.begin());
    const double t = (x[0] - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return (1.0 - t) * values_[i - 1] + t * values_[i];
  }
  return 0.0;
}

nlohmann::json WeightFunction::to_json() const {
  nlohmann::json j{{"kind", kind_}};
  if (kind_ == "constant") j["value"] = a_;
  if (kind_ == "abs_linear") {
    j["a"] = a_;
    j["b"] = b_;
  }
  if (kind_ == "nodal") {
    j["x"] = xs_;
    j["values"] = values_;
  }
  return j;
}

// ---------------------------------------------------------------- envelope

double GrowthEnvelope::bound(const Point& x, double s, const Vec2& xi) const {
  double b = sigma(x);
  if (a1 != 0.0) b += a1 * std::pow(std::abs(s), alpha);
  if (a2 != 0.0) b += a2 * std::pow(norm2(xi), beta);
  return b;
}

void GrowthEnvelope::validate(double p, double p_hat) const {
  const double beta_max = p * (p_hat - 1.0) / p_hat;
  if (!(a1 >= 0.0) || !(a2 >= 0.0)) throw PreconditionError("envelope coefficients a1, a2 must be >= 0");
  if (!(alpha > 0.0 && alpha < p_hat - 1.0))
    throw PreconditionError("alpha = " + std::to_string(alpha) + " outside (0, p_hat - 1) = (0, " +
                            std::to_string(p_hat - 1.0) + ")");
  if (!(beta > 0.0 && beta < beta_max))
    throw PreconditionError("beta = " + std::to_string(beta) + " outside (0, p/p_hat') = (0, " +
                            std::to_string(beta_max) + ")");
  if (!(r >= 1.0 && r < p_hat))
    throw PreconditionError("r = " + std::to_string(r) + " outside [1, p_hat) = [1, " + std::to_string(p_hat) + ")");
}

double GrowthEnvelope::r_conjugate() const {
  return r == 1.0 ? std::numeric_limits<double>::infinity() : r / (r - 1.0);
}

double GrowthEnvelope::sigma_norm(const Level& level) const {
  const double rc = r_conjugate();
  if (std::isinf(rc)) {
    double m = 0.0;
    for (std::size_t k = 0; k < level.num_quad_points(); ++k) m = std::max(m, sigma(level.quad_point(k)));
    for (std::size_t i = 0; i < level.mesh().num_nodes(); ++i) m = std::max(m, sigma(level.mesh().node(i)));
    return m;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < level.num_quad_points(); ++k)
    sum += level.quad_weight(k) * std::pow(sigma(level.quad_point(k)), rc);
  return std::pow(sum, 1.0 / rc);
}

nlohmann::json GrowthEnvelope::to_json() const {
  return {{"sigma", sigma.to_json()}, {"a1", a1}, {"a2", a2}, {"alpha", alpha}, {"beta", beta}, {"r", r}};
}

GrowthEnvelope GrowthEnvelope::from_json(const nlohmann::json& j, double p) {
  GrowthEnvelope env;
  if (j.contains("sigma")) env.sigma = WeightFunction::from_json(j.at("sigma"));
  env.a1 = get_number(j, "a1", 0.0);
  env.a2 = get_number(j, "a2", 0.0);
  env.alpha = get_number(j, "alpha", p - 1.0);
  env.beta = get_number(j, "beta", p - 1.0);
  env.r = get_number(j, "r", 2.0);
  return env;
}

// ---------------------------------------------------------------- convection

ConvectionTerm::Partials ConvectionTerm::partials(const Point& x, double s, const Vec2& xi) const {
  if (partials_) return partials_(x, s, xi);
  Partials d;
  const double hs = 1e-6 * std::max(1.0, std::abs(s));
  d.ds = (f_(x, s + hs, xi) - f_(x, s - hs, xi)) / (2.0 * hs);
  for (int k = 0; k < 2; ++k) {
    const double hx = 1e-6 * std::max(1.0, std::abs(xi[k]));
    Vec2 up = xi, dn = xi;
    up[k] += hx;
    dn[k] -= hx;
    d.dxi[k] = (f_(x, s, up) - f_(x, s, dn)) / (2.0 * hx);
  }
  return d;
}

ConvectionTerm ConvectionTerm::custom(std::string name, Evaluator f, GrowthEnvelope envelope,
                                      bool exactly_bounded, PartialsFn partials) {
  ConvectionTerm t;
  t.kind_ = std::move(name);
  t.params_ = nlohmann::json::object();
  t.f_ = std::move(f);
  t.partials_ = std::move(partials);
  t.envelope_ = std::move(envelope);
  t.exactly_bounded_ = exactly_bounded;
  return t;
}

ConvectionTerm ConvectionTerm::from_catalog(const std::string& kind, const nlohmann::json& params,
                                            double p) {
  ConvectionTerm t;
  t.kind_ = kind;
  t.params_ = params.is_null() ? nlohmann::json::object() : params;
  t.envelope_.alpha = p - 1.0;
  t.envelope_.beta = p - 1.0;
  const auto no_partials = [](const Point&, double, const Vec2&) { return Partials{}; };

  if (kind == "zero") {
    t.f_ = [](const Point&, double, const Vec2&) { return 0.0; };
    t.partials_ = no_partials;
    t.depends_on_solution_ = false;
  } else if (kind == "constant") {
    const double c = get_number(params, "value", 0.0);
    t.f_ = [c](const Point&, double, const Vec2&) { return c; };
    t.partials_ = no_partials;
    t.envelope_.sigma = WeightFunction::constant(std::abs(c));
    t.depends_on_solution_ = false;
  } else if (kind == "sigma") {
    const WeightFunction w = params.contains("sigma") ? WeightFunction::from_json(params.at("sigma"))
                                                      : WeightFunction::zero();
    t.f_ = [w](const Point& x, double, const Vec2&) { return w(x); };
    t.partials_ = no_partials;
    t.envelope_.sigma = w;
    t.depends_on_solution_ = false;
  } else if (kind == "signed_power" || kind == "gradient_power" || kind == "mixed") {
    const bool mixed = kind == "mixed";
    const WeightFunction w = mixed && params.contains("sigma") ? WeightFunction::from_json(params.at("sigma"))
                                                               : WeightFunction::zero();
    const double a1 = kind == "gradient_power" ? 0.0 : get_number(params, "a1", 0.0);
    const double alpha = get_number(params, "alpha", p - 1.0);
    const double a2 = kind == "signed_power" ? 0.0 : get_number(params, "a2", 0.0);
    const double beta = get_number(params, "beta", p - 1.0);
    const bool sgn = params.is_object() && params.value("signed", false);
    if (!(a1 >= 0.0 && a2 >= 0.0)) throw PreconditionError(kind + ": a1, a2 must be >= 0");
    if (!(alpha > 0.0 && beta > 0.0)) throw PreconditionError(kind + ": alpha, beta must be > 0");
    t.f_ = [=](const Point& x, double s, const Vec2& xi) {
      double v = w(x);
      if (a1 != 0.0) v += a1 * signed_pow(s, alpha);
      if (a2 != 0.0) {
        double g = std::pow(norm2(xi), beta);
        if (sgn) g = xi[0] < 0.0 ? -g : g;
        v += a2 * g;
      }
      return v;
    };
    t.partials_ = [=](const Point&, double s, const Vec2& xi) {
      Partials d;
      if (a1 != 0.0) d.ds = a1 * signed_pow_derivative(s, alpha);
      const double n = norm2(xi);
      if (a2 != 0.0 && n > 0.0) {
        const double c = a2 * beta * std::pow(n, beta - 2.0) * ((sgn && xi[0] < 0.0) ? -1.0 : 1.0);
        d.dxi = {c * xi[0], c * xi[1]};
      }
      return d;
    };
    t.envelope_ = {w, a1, a2, alpha, beta, 2.0};
  } else if (kind == "manufactured_p3q2") {
    // -Δ3 u + Δ2 u for u = x(1-x) on (0,1).
    t.f_ = [](const Point& x, double, const Vec2&) { return 4.0 * std::abs(1.0 - 2.0 * x[0]) - 2.0; };
    t.partials_ = no_partials;
    t.envelope_.sigma = WeightFunction::abs_linear(4.0, 2.0);
    t.depends_on_solution_ = false;
    t.exact_ = ExactSolution{[](const Point& x) { return x[0] * (1.0 - x[0]); },
                             [](const Point& x) { return Vec2{1.0 - 2.0 * x[0], 0.0}; }};
  } else if (kind == "manufactured_pq") {
    // -Δp u + Δq u for u = x(1-x); bounded only for p, q >= 2.
    const double mp = get_number(params, "p", p);
    const double mq = get_number(params, "q", 2.0);
    if (!(mp >= 2.0 && mq >= 2.0)) throw PreconditionError("manufactured_pq needs p, q >= 2");
    t.f_ = [mp, mq](const Point& x, double, const Vec2&) {
      const double d = std::abs(1.0 - 2.0 * x[0]);
      return 2.0 * (mp - 1.0) * std::pow(d, mp - 2.0) - 2.0 * (mq - 1.0) * std::pow(d, mq - 2.0);
    };
    t.partials_ = no_partials;
    t.envelope_.sigma = WeightFunction::constant(2.0 * (mp - 1.0) + 2.0 * (mq - 1.0));
    t.depends_on_solution_ = false;
    t.exact_ = ExactSolution{[](const Point& x) { return x[0] * (1.0 - x[0]); },
                             [](const Point& x) { return Vec2{1.0 - 2.0 * x[0], 0.0}; }};
  } else {
    throw UnknownCatalogId("unknown convection kind '" + kind +
                           "' (known: zero, constant, sigma, signed_power, gradient_power, mixed, "
                           "manufactured_p3q2, manufactured_pq)");
  }
  return t;
}

}  // namespace compete
