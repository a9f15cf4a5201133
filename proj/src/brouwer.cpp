#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseLU>

#include "compete/error.hpp"
#include "compete/galerkin_solver.hpp"

namespace compete {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::SparseMatrix<double>;

double sup_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Mat forward_difference_jacobian(const ZeroProblem& F, const Vec& v, const Vec& r) {
  const auto d = v.size();
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(v[j]));
    Vec w = v;
    w[j] += h;
    const Vec col = (F.residual(w) - r) / h;
    for (Eigen::Index i = 0; i < d; ++i)
      if (col[i] != 0.0) trip.emplace_back(i, j, col[i]);
  }
  Mat J(d, d);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

// H_t(v) = t F(v) + (1-t) v. The anchor v ↦ v is the duality map of the
// Euclidean structure, so ⟨H_t(v), v⟩ >= 0 on the sphere whenever F satisfies
// the sphere condition.
struct Stage {
  const ZeroProblem& F;
  double t;

  Vec residual(const Vec& v) const {
    if (t == 1.0) return F.residual(v);
    return t * F.residual(v) + (1.0 - t) * v;
  }
  Mat jacobian(const Vec& v, const Vec& rF) const {
    Mat J = F.jacobian ? F.jacobian(v) : forward_difference_jacobian(F, v, rF);
    if (t == 1.0) return J;
    Mat I(v.size(), v.size());
    I.setIdentity();
    return t * J + (1.0 - t) * I;
  }
};

class Newton {
 public:
  Newton(const ZeroProblem& F, double R, const BrouwerOptions& opts, BrouwerResult& log)
      : F_(F), R_(R), opts_(opts), log_(log) {}

  double norm(const Vec& v) const { return F_.norm ? F_.norm(v) : v.norm(); }

  Vec project(Vec v) const {
    if (!std::isfinite(R_)) return v;
    const double n = norm(v);
    if (n > R_) v *= R_ / n;
    return v;
  }

  // Returns true when the stage residual reached `tol`; v holds the last iterate.
  bool run(const Stage& stage, Vec& v, double tol) {
    Vec r = stage.residual(v);
    for (int it = 0; it < opts_.max_newton; ++it) {
      const double res = sup_norm(r);
      if (stage.t == 1.0) note(v, res);
      if (res <= tol) return true;
      ++log_.newton_iterations;
      const Vec rF = stage.t == 1.0 ? r : F_.residual(v);
      const Mat J = stage.jacobian(v, rF);
      Vec d;
      Eigen::SparseLU<Mat> lu;
      lu.compute(J);
      if (lu.info() == Eigen::Success) d = -lu.solve(r);
      if (d.size() != v.size() || !d.allFinite()) d = -(J.transpose() * r);
      double slope = r.dot(J * d);
      if (slope >= 0.0) {
        d = -(J.transpose() * r);
        slope = r.dot(J * d);
      }
      const double phi = 0.5 * r.squaredNorm();
      double step = 1.0;
      bool accepted = false;
      while (step >= opts_.min_step) {
        Vec trial = project(v + step * d);
        Vec rt = stage.residual(trial);
        if (rt.allFinite() && 0.5 * rt.squaredNorm() <= phi + opts_.armijo * step * slope) {
          v = std::move(trial);
          r = std::move(rt);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (stage.t == 1.0) log_.history.push_back(sup_norm(r));
      if (!accepted) return false;
    }
    const double res = sup_norm(r);
    if (stage.t == 1.0) note(v, res);
    return res <= tol;
  }

  void note(const Vec& v, double res) {
    if (res < best_res_) {
      best_res_ = res;
      log_.v = v;
      log_.residual_sup = res;
      log_.norm = norm(v);
    }
  }

 private:
  const ZeroProblem& F_;
  double R_;
  const BrouwerOptions& opts_;
  BrouwerResult& log_;
  double best_res_ = std::numeric_limits<double>::infinity();
};

// Pseudo-arclength continuation of H(v, t) = t F(v) + (1-t)(v - a) = 0 from
// (a, 0). The zero set holds a continuum from t = 0 to t = 1 that may turn
// back in t, so plain stepping in t stalls at folds. A generic anchor a keeps
// the path free of bifurcations; with a = 0 symmetric problems branch.
class Arclength {
 public:
  Arclength(const ZeroProblem& F, Vec anchor, const BrouwerOptions& opts, BrouwerResult& log)
      : F_(F), a_(std::move(anchor)), opts_(opts), log_(log), d_(F.dimension) {}

  // On success `v` is the path point interpolated to t = 1.
  bool follow(Vec& v, double& t_reached) {
    Vec y = Vec::Zero(d_ + 1);
    y.head(d_) = a_;
    Vec tau(d_ + 1);
    tau.head(d_) = -F_.residual(a_);  // H_v = I, H_t = F(a) at the start
    tau[d_] = 1.0;
    tau.normalize();
    const double s0 = opts_.initial_dt;
    double s = s0;
    t_reached = 0.0;
    for (int step = 0; step < kMaxSteps; ++step) {
      const Vec pred = y + s * tau;
      Vec z = pred;
      int iters = 0;
      if (!correct(z, tau, pred, s, iters)) {
        s *= 0.5;
        if (s < s0 * std::ldexp(1.0, -opts_.max_depth)) return false;
        continue;
      }
      Vec next;
      // A sharp turn in the tangent usually means the corrector landed on
      // another sheet of the zero set.
      if (!tangent(z, tau, next) || next.dot(tau) < kMinCos) {
        s *= 0.5;
        if (s < s0 * std::ldexp(1.0, -opts_.max_depth)) return false;
        continue;
      }
      ++log_.continuation_stages;
      if (z[d_] >= 1.0) {
        const double th = (1.0 - y[d_]) / (z[d_] - y[d_]);
        v = y.head(d_) + th * (z.head(d_) - y.head(d_));
        t_reached = 1.0;
        return true;
      }
      if (z[d_] < 0.0) return false;
      y = std::move(z);
      tau = std::move(next);
      t_reached = y[d_];
      if (iters <= 3) s = std::min(1.5 * s, kMaxStep);
    }
    return false;
  }

 private:
  static constexpr int kMaxSteps = 5000;
  static constexpr double kMaxStep = 1e3;
  static constexpr double kMinCos = 0.995;

  Mat jacobian_of(const Vec& v, const Vec& rF) const {
    return F_.jacobian ? F_.jacobian(v) : forward_difference_jacobian(F_, v, rF);
  }

  // [[t J + (1-t) I, F(v) - v + a], [row]]
  Mat augmented(const Vec& v, double t, const Vec& rF, const Vec& row) const {
    const Mat JF = jacobian_of(v, rF);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(JF.nonZeros() + 3 * d_ + 1));
    for (int k = 0; k < JF.outerSize(); ++k)
      for (Mat::InnerIterator it(JF, k); it; ++it) trip.emplace_back(it.row(), it.col(), t * it.value());
    for (Eigen::Index i = 0; i < d_; ++i) {
      trip.emplace_back(i, i, 1.0 - t);
      const double ht = rF[i] - v[i] + a_[i];
      if (ht != 0.0) trip.emplace_back(i, d_, ht);
    }
    for (Eigen::Index j = 0; j <= d_; ++j)
      if (row[j] != 0.0) trip.emplace_back(d_, j, row[j]);
    Mat A(d_ + 1, d_ + 1);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
  }

  bool tangent(const Vec& z, const Vec& prev, Vec& out) const {
    const Vec rF = F_.residual(z.head(d_));
    Eigen::SparseLU<Mat> lu;
    lu.compute(augmented(z.head(d_), z[d_], rF, prev));
    if (lu.info() != Eigen::Success) return false;
    Vec e = Vec::Zero(d_ + 1);
    e[d_] = 1.0;
    out = lu.solve(e);
    if (!out.allFinite() || out.norm() == 0.0) return false;
    out.normalize();
    return true;
  }

  // Newton on [H(z); τ·(z - pred)] = 0. Corrections longer than the predictor
  // step are rejected so the corrector cannot jump to another branch.
  bool correct(Vec& z, const Vec& tau, const Vec& pred, double s, int& iters) {
    const double tol = std::max(opts_.tol, 1e-8);
    double last = std::numeric_limits<double>::infinity();
    for (iters = 0; iters < 10; ++iters) {
      const Vec v = z.head(d_);
      const double t = z[d_];
      const Vec rF = F_.residual(v);
      Vec G(d_ + 1);
      G.head(d_) = t * rF + (1.0 - t) * (v - a_);
      G[d_] = tau.dot(z - pred);
      if (!G.allFinite()) return false;
      if (sup_norm(G.head(d_)) <= tol && std::abs(G[d_]) <= 1e-10 * (1.0 + s)) return true;
      ++log_.newton_iterations;
      Eigen::SparseLU<Mat> lu;
      lu.compute(augmented(v, t, rF, tau));
      if (lu.info() != Eigen::Success) return false;
      const Vec dz = lu.solve(G);
      const double dn = dz.norm();
      if (!dz.allFinite() || dn > 0.5 * s || dn > 0.5 * last) return false;
      last = dn;
      z -= dz;
    }
    return false;
  }

  const ZeroProblem& F_;
  Vec a_;
  const BrouwerOptions& opts_;
  BrouwerResult& log_;
  Eigen::Index d_;
};

}  // namespace

BrouwerResult brouwer_zero(const ZeroProblem& F, double R, const BrouwerOptions& opts) {
  BrouwerResult out;
  if (!F.residual) throw PreconditionError("brouwer_zero needs a residual callback");
  if (!(R > 0.0)) throw PreconditionError("ball radius must be positive");
  if (opts.x0 && opts.x0->size() != F.dimension) throw PreconditionError("start vector has the wrong dimension");
  Newton newton(F, R, opts, out);
  const Stage full{F, 1.0};
  const Vec zero = Vec::Zero(F.dimension);
  out.v = zero;

  auto finish = [&](const Vec& v) {
    out.v = v;
    out.residual_sup = sup_norm(F.residual(v));
    out.norm = newton.norm(v);
    out.converged = true;
    out.message = "converged";
    return out;
  };

  if (opts.x0) {
    Vec v = newton.project(*opts.x0);
    if (newton.run(full, v, opts.tol)) return finish(v);
  }
  if (!opts.x0 || !opts.x0->isZero(0.0)) {
    Vec v = zero;
    if (newton.run(full, v, opts.tol)) return finish(v);
  }

  if (!opts.continuation) {
    out.message = "Newton did not converge";
    return out;
  }

  // Homotopy from the anchor's zero at t = 0, finished by Newton on F.
  // Fixed pseudo-random anchor inside the ball, so runs are reproducible.
  Vec anchor(F.dimension);
  std::mt19937_64 rng(0x5eed0000u + static_cast<std::uint64_t>(F.dimension));
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < anchor.size(); ++i) anchor[i] = normal(rng);
  if (anchor.size() > 0) anchor *= 0.1 * std::min(R, 1.0) / newton.norm(anchor);
  Vec v;
  double t_reached = 0.0;
  if (Arclength(F, std::move(anchor), opts, out).follow(v, t_reached)) {
    v = newton.project(v);
    if (newton.run(full, v, opts.tol)) return finish(v);
    out.message = "Newton from the continuation end point did not converge";
    return out;
  }
  out.message = "continuation stalled at t = " + std::to_string(t_reached);
  return out;
}

}  // namespace compete
