#include <algorithm>
#include <cmath>
#include <numbers>

#include "compete/analysis_constants.hpp"
#include "compete/error.hpp"
#include "compete/intrinsic.hpp"

namespace compete {

namespace {

const char* shape_name(Kernel::Shape s) {
  switch (s) {
    case Kernel::Shape::box: return "box";
    case Kernel::Shape::hat: return "hat";
    case Kernel::Shape::gaussian: return "gaussian";
  }
  return "box";
}

// Midpoint offsets and weights along one axis (2D); weights sum to exactly 1.
struct AxisStencil {
  std::vector<double> offsets;
  std::vector<double> weights;
};

AxisStencil axis_stencil(const Kernel& k, double spacing) {
  auto m = static_cast<std::size_t>(std::ceil(k.width / spacing));
  m = std::max<std::size_t>(m, 2);
  if (m % 2 == 1) ++m;  // keeps the hat's kink on a cell boundary
  const double dt = k.width / static_cast<double>(m);
  AxisStencil s;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = -0.5 * k.width + (static_cast<double>(i) + 0.5) * dt;
    s.offsets.push_back(t);
    s.weights.push_back(k.profile(t) * dt);
    total += s.weights.back();
  }
  for (double& w : s.weights) w /= total;
  return s;
}

struct PointValue {
  double value;
  Vec2 gradient;
};

class ZeroExtended {
 public:
  ZeroExtended(const Level& lv, Eigen::VectorXd nodal)
      : lv_(lv), nodal_(std::move(nodal)), grads_(element_gradients(lv, nodal_)) {}

  PointValue at(const Point& x) const {
    const auto loc = lv_.locate(x);
    if (!loc) return {0.0, {0.0, 0.0}};
    const auto t = lv_.mesh().element(loc->element);
    double v = 0.0;
    for (int k = 0; k < lv_.mesh().vertices_per_element(); ++k) v += loc->barycentric[k] * nodal_[t[k]];
    return {v, grads_[loc->element]};
  }

 private:
  const Level& lv_;
  Eigen::VectorXd nodal_;
  std::vector<Vec2> grads_;
};

class ConvolutionEvaluator {
 public:
  ConvolutionEvaluator(const IntrinsicOperator& T, const SpaceHierarchy& h, const FEFunction& u)
      : dim_(h.dimension()), mass_(T.kernel().mass), field_(h.level(u.level), to_nodal(h, u).values) {
    const Kernel& k = T.kernel();
    double window = T.window();
    if (window <= 0.0) {
      const auto [lo, hi] = h.level(0).mesh().bounding_box();
      window = std::max(hi[0] - lo[0], hi[1] - lo[1]);
    }
    if (k.width > window)
      throw PreconditionError("kernel support " + std::to_string(k.width) +
                              " exceeds the evaluation window " + std::to_string(window));
    kernel_ = k;
    if (dim_ == 1) {
      const DomainMesh& m = h.level(u.level).mesh();
      for (std::size_t i = 0; i < m.num_nodes(); ++i) nodes_.push_back(m.node(i)[0]);
      std::sort(nodes_.begin(), nodes_.end());
    } else {
      stencil_ = axis_stencil(k, h.finest().mesh().min_element_size() / T.refine_factor());
    }
  }

  PointValue at(const Point& x) const {
    PointValue out{0.0, {0.0, 0.0}};
    const auto& o = stencil_.offsets;
    const auto& w = stencil_.weights;
    if (dim_ == 1) {
      // Gauss rule on every piece between kinks of the kernel and of
      // t -> u(x - t); exact for box and hat kernels. A grid in t that ignores
      // the kinks of u makes the value ripple as x moves, and finite
      // differences of the values then miss ρ*u' by O(grid spacing).
      const double half = 0.5 * kernel_.width;
      std::vector<double> br{-half, half};
      if (kernel_.shape == Kernel::Shape::hat) br.push_back(0.0);
      for (auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x[0] - half);
           it != nodes_.end() && *it < x[0] + half; ++it)
        br.push_back(x[0] - *it);
      std::sort(br.begin(), br.end());
      static constexpr double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
      static constexpr double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      double total = 0.0;
      for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        const double a = br[i], b = br[i + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b), hw = 0.5 * (b - a);
        for (int g = 0; g < 3; ++g) {
          const double t = mid + hw * gx[g];
          const double wt = hw * gw[g] * kernel_.profile(t);
          const PointValue pv = field_.at({x[0] - t, 0.0});
          out.value += wt * pv.value;
          out.gradient[0] += wt * pv.gradient[0];
          total += wt;
        }
      }
      // Unit total weight keeps Young's inequality exact for the gaussian too.
      if (total > 0.0) {
        out.value /= total;
        out.gradient[0] /= total;
      }
    } else {
      for (std::size_t i = 0; i < o.size(); ++i)
        for (std::size_t j = 0; j < o.size(); ++j) {
          const double wij = w[i] * w[j];
          const PointValue pv = field_.at({x[0] - o[i], x[1] - o[j]});
          out.value += wij * pv.value;
          out.gradient[0] += wij * pv.gradient[0];
          out.gradient[1] += wij * pv.gradient[1];
        }
    }
    out.value *= mass_;
    out.gradient[0] *= mass_;
    out.gradient[1] *= mass_;
    return out;
  }

 private:
  int dim_;
  double mass_;
  ZeroExtended field_;
  Kernel kernel_;
  std::vector<double> nodes_;  // 1D: sorted node coordinates
  AxisStencil stencil_;        // 2D: tensor midpoint stencil
};

QuadratureSamples convolution_samples(const IntrinsicOperator& T, const SpaceHierarchy& h,
                                      const FEFunction& u) {
  const Level& lv = h.level(u.level);
  const ConvolutionEvaluator conv(T, h, u);
  QuadratureSamples s{u.level, {}};
  s.points.reserve(lv.num_quad_points());
  for (std::size_t k = 0; k < lv.num_quad_points(); ++k) {
    const PointValue pv = conv.at(lv.quad_point(k));
    s.points.push_back({lv.quad_point(k), lv.quad_weight(k), pv.value, pv.gradient});
  }
  return s;
}

bool same_exponent(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

// ---------------------------------------------------------------- kernel

double Kernel::profile(double t) const {
  const double half = 0.5 * width;
  if (std::abs(t) > half) return 0.0;
  switch (shape) {
    case Shape::box: return 1.0 / width;
    case Shape::hat: return (1.0 / half) * (1.0 - std::abs(t) / half);
    case Shape::gaussian: {
      const double s = std_dev > 0.0 ? std_dev : width / 4.0;
      const double z = s * std::sqrt(2.0 * std::numbers::pi) * std::erf(half / (std::sqrt(2.0) * s));
      return std::exp(-t * t / (2.0 * s * s)) / z;
    }
  }
  return 0.0;
}

void Kernel::validate() const {
  if (!(width > 0.0) || !std::isfinite(width)) throw PreconditionError("kernel width must be positive");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw PreconditionError("kernel L1 norm must be positive");
  if (std_dev < 0.0) throw PreconditionError("kernel std_dev must be >= 0");
}

nlohmann::json Kernel::to_json() const {
  nlohmann::json j{{"shape", shape_name(shape)}, {"width", width}, {"mass", mass}};
  if (shape == Shape::gaussian) j["std_dev"] = std_dev;
  return j;
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  Kernel k;
  const std::string shape = j.value("shape", std::string("box"));
  if (shape == "box") k.shape = Shape::box;
  else if (shape == "hat") k.shape = Shape::hat;
  else if (shape == "gaussian") k.shape = Shape::gaussian;
  else throw UnknownCatalogId("unknown kernel shape '" + shape + "' (known: box, hat, gaussian)");
  k.width = j.value("width", 0.25);
  k.mass = j.value("mass", 1.0);
  k.std_dev = j.value("std_dev", 0.0);
  k.validate();
  return k;
}

// ---------------------------------------------------------------- lift

double LiftProfile::operator()(const Point& x) const {
  if (kind == "cosine") return offset + amplitude * std::cos(frequency * std::numbers::pi * x[0]);
  return a + b * x[0] + c * x[1];
}

nlohmann::json LiftProfile::to_json() const {
  if (kind == "cosine") return {{"kind", kind}, {"amplitude", amplitude}, {"frequency", frequency}, {"offset", offset}};
  return {{"kind", kind}, {"a", a}, {"b", b}, {"c", c}};
}

LiftProfile LiftProfile::from_json(const nlohmann::json& j) {
  LiftProfile l;
  l.kind = j.value("kind", std::string("affine"));
  if (l.kind == "affine") {
    l.a = j.value("a", 0.0);
    l.b = j.value("b", 0.0);
    l.c = j.value("c", 0.0);
  } else if (l.kind == "cosine") {
    l.amplitude = j.value("amplitude", 0.0);
    l.frequency = j.value("frequency", 1.0);
    l.offset = j.value("offset", 0.0);
  } else {
    throw UnknownCatalogId("unknown u0 kind '" + l.kind + "' (known: affine, cosine)");
  }
  return l;
}

// ---------------------------------------------------------------- operator

IntrinsicOperator IntrinsicOperator::identity() { return {}; }

IntrinsicOperator IntrinsicOperator::boundary_lift(LiftProfile u0) {
  IntrinsicOperator t;
  t.kind_ = Kind::boundary_lift;
  t.lift_ = std::move(u0);
  return t;
}

IntrinsicOperator IntrinsicOperator::convolution(Kernel kernel, int refine_factor, double window) {
  kernel.validate();
  if (refine_factor < 1) throw PreconditionError("convolution refine factor must be >= 1");
  IntrinsicOperator t;
  t.kind_ = Kind::convolution;
  t.kernel_ = kernel;
  t.refine_factor_ = refine_factor;
  t.window_ = window;
  return t;
}

std::string IntrinsicOperator::kind_name() const {
  switch (kind_) {
    case Kind::identity: return "identity";
    case Kind::boundary_lift: return "boundary_lift";
    case Kind::convolution: return "convolution";
  }
  return "identity";
}

IntrinsicOperator IntrinsicOperator::from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", std::string("identity"));
  if (kind == "identity") return identity();
  if (kind == "boundary_lift") return boundary_lift(LiftProfile::from_json(j.value("u0", nlohmann::json::object())));
  if (kind == "convolution")
    return convolution(Kernel::from_json(j.value("kernel", nlohmann::json::object())),
                       j.value("refine_factor", 4), j.value("window", 0.0));
  throw UnknownCatalogId("unknown intrinsic operator '" + kind + "' (known: identity, boundary_lift, convolution)");
}

nlohmann::json IntrinsicOperator::to_json() const {
  nlohmann::json j{{"kind", kind_name()}};
  if (kind_ == Kind::boundary_lift) j["u0"] = lift_.to_json();
  if (kind_ == Kind::convolution) {
    j["kernel"] = kernel_.to_json();
    j["refine_factor"] = refine_factor_;
    j["window"] = window_;
  }
  return j;
}

NodalFunction IntrinsicOperator::lift_nodal(const SpaceHierarchy& h, int level) const {
  if (kind_ != Kind::boundary_lift) return interpolate_nodal(h, level, [](const Point&) { return 0.0; });
  return interpolate_nodal(h, level, lift_);
}

QuadratureSamples apply(const IntrinsicOperator& T, const SpaceHierarchy& h, const FEFunction& u) {
  switch (T.kind()) {
    case IntrinsicOperator::Kind::identity: return sample(h, u);
    case IntrinsicOperator::Kind::boundary_lift: {
      NodalFunction w = T.lift_nodal(h, u.level);
      w.values += to_nodal(h, u).values;
      return sample(h, w);
    }
    case IntrinsicOperator::Kind::convolution: return convolution_samples(T, h, u);
  }
  return sample(h, u);
}

QuadratureSamples convolve_gradient(const IntrinsicOperator& T, const SpaceHierarchy& h,
                                    const FEFunction& u) {
  if (T.kind() != IntrinsicOperator::Kind::convolution)
    throw PreconditionError("convolve_gradient requires a convolution operator");
  QuadratureSamples s = convolution_samples(T, h, u);
  for (auto& q : s.points) q.value = 0.0;
  return s;
}

double convolve_at(const IntrinsicOperator& T, const SpaceHierarchy& h, const FEFunction& u,
                   const Point& x) {
  if (T.kind() != IntrinsicOperator::Kind::convolution)
    throw PreconditionError("convolve_at requires a convolution operator");
  return ConvolutionEvaluator(T, h, u).at(x).value;
}

// ---------------------------------------------------------------- certificates

double lift_growth_factor(double p) { return std::max(std::pow(2.0, p - 2.0), 1.0); }

IntrinsicCertificate lift_certificate(double p, double s_phat, double u0_phat_norm, double u0_grad_norm) {
  const double m = lift_growth_factor(p);
  IntrinsicCertificate c;
  c.alpha = p - 1.0;
  c.beta = p - 1.0;
  c.K1 = m * std::pow(s_phat, p - 1.0);
  c.K2 = m;
  c.K3 = m * std::max(std::pow(u0_phat_norm, p - 1.0), std::pow(u0_grad_norm, p - 1.0));
  c.provenance = "analytic: boundary lift, max{2^(p-2),1} splitting";
  return c;
}

IntrinsicCertificate convolution_certificate(double p, int N, double kernel_l1, double s_whole) {
  if (!(kernel_l1 > 0.0)) throw PreconditionError("kernel L1 norm must be positive");
  const double young = std::pow(static_cast<double>(N), p - 1.0) * std::pow(kernel_l1, p - 1.0);
  IntrinsicCertificate c;
  c.alpha = p - 1.0;
  c.beta = p - 1.0;
  c.K1 = std::pow(s_whole, p - 1.0) * young;
  c.K2 = young;
  c.K3 = 0.0;
  c.provenance = "analytic: Young's inequality and the derivative formula for convolution";
  return c;
}

IntrinsicCertificate identity_certificate(double p, double alpha, double beta, double s_phat) {
  if (alpha > p - 1.0 + 1e-12 || beta > p - 1.0 + 1e-12)
    throw PreconditionError("identity certificate needs alpha, beta <= p - 1");
  IntrinsicCertificate c;
  c.alpha = alpha;
  c.beta = beta;
  c.K1 = std::pow(s_phat, alpha);
  c.K2 = 1.0;
  c.K3 = c.K1 + 1.0;
  c.provenance = "analytic: embedding plus t^a <= t^(p-1) + 1";
  return c;
}

IntrinsicCertificate certificate(const IntrinsicOperator& T, const SpaceHierarchy& h, double p,
                                 double alpha, double beta, const EmbeddingConstants& constants) {
  const bool at_p_minus_1 = same_exponent(alpha, p - 1.0) && same_exponent(beta, p - 1.0);
  const std::string supported =
      "supported certificates: identity with alpha, beta <= p-1; boundary_lift and convolution with "
      "alpha = beta = p-1";
  switch (T.kind()) {
    case IntrinsicOperator::Kind::identity:
      if (alpha > p - 1.0 + 1e-12 || beta > p - 1.0 + 1e-12)
        throw PreconditionError("no certificate for identity with alpha = " + std::to_string(alpha) +
                                ", beta = " + std::to_string(beta) + "; " + supported);
      return identity_certificate(p, alpha, beta, constants.S(constants.p_hat()));
    case IntrinsicOperator::Kind::boundary_lift: {
      if (!at_p_minus_1) throw PreconditionError("no certificate for boundary_lift at these exponents; " + supported);
      double u0_phat = 0.0, u0_grad = 0.0;
      for (int n = 0; n < h.num_levels(); ++n) {
        const QuadratureSamples s = sample(h, T.lift_nodal(h, n));
        u0_phat = std::max(u0_phat, samples_lebesgue_norm(s, constants.p_hat()));
        u0_grad = std::max(u0_grad, samples_gradient_norm(s, p));
      }
      return lift_certificate(p, constants.S(constants.p_hat()), u0_phat, u0_grad);
    }
    case IntrinsicOperator::Kind::convolution: {
      if (!at_p_minus_1) throw PreconditionError("no certificate for convolution at these exponents; " + supported);
      IntrinsicCertificate c = convolution_certificate(p, h.dimension(), T.kernel().l1_norm(), constants.whole_space());
      if (constants.whole_space_surrogate()) c.provenance += " (whole-space S replaced by domain S_p_hat)";
      return c;
    }
  }
  throw PreconditionError(supported);
}

CertificateCheck certificate_check(const IntrinsicOperator& T, const IntrinsicCertificate& cert,
                                   const SpaceHierarchy& h, std::span<const FEFunction> trials,
                                   double p, double p_hat) {
  CertificateCheck out;
  out.trials = trials.size();
  out.value_margin = -std::numeric_limits<double>::infinity();
  out.gradient_margin = -std::numeric_limits<double>::infinity();
  out.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const FEFunction& u = trials[i];
    const QuadratureSamples tu = apply(T, h, u);
    const double growth = std::pow(grad_norm_p(h, u, p), p - 1.0);
    const double vm = std::pow(samples_lebesgue_norm(tu, p_hat), cert.alpha) - cert.K1 * growth - cert.K3;
    const double gm = std::pow(samples_gradient_norm(tu, p), cert.beta) - cert.K2 * growth - cert.K3;
    out.value_margin = std::max(out.value_margin, vm);
    out.gradient_margin = std::max(out.gradient_margin, gm);
    if (std::max(vm, gm) > out.worst_margin) {
      out.worst_margin = std::max(vm, gm);
      out.worst_trial = i;
    }
  }
  if (trials.empty()) out.worst_margin = out.value_margin = out.gradient_margin = 0.0;
  return out;
}

}  // namespace compete
