#include "ktopo/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>

#include "ktopo/simd/kernels.hpp"

namespace ktopo {

std::string_view to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailed: return "line_search_failed";
    case LbfgsStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;

constexpr double kRoundingSlack = 1e-6;

std::span<const double> view(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double vdot(const Vec& a, const Vec& b) { return simd::dot(view(a), view(b)); }

struct Trial {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // g(alpha) . d
  Vec x;
  Vec g;
};

class LineSearch {
 public:
  LineSearch(const Objective& obj, const LbfgsSettings& s, int& evals)
      : obj_(obj), s_(s), evals_(evals) {}

  /// Returns true with `out` holding an accepted point (sufficient decrease always holds).
  bool run(const Vec& x0, double f0, double slope0, const Vec& d, double alpha_init,
           double alpha_max, Trial& out) {
    x0_ = &x0;
    d_ = &d;
    f0_ = f0;
    slope0_ = slope0;
    Trial prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.slope = slope0;
    double alpha = std::min(alpha_init, alpha_max);
    for (int i = 0; i < s_.max_line_search; ++i) {
      Trial cur = eval(alpha);
      if (!std::isfinite(cur.f)) {
        // Grazed a bad region; shrink toward the last good point.
        alpha_max = alpha;
        alpha = 0.5 * (prev.alpha + alpha);
        continue;
      }
      if (!armijo(cur) && approx_wolfe(cur)) {
        out = std::move(cur);
        return true;
      }
      if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return zoom(std::move(prev), std::move(cur), out);
      if (std::abs(cur.slope) <= -s_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev), out);
      if (alpha >= alpha_max) {
        // Capped step: sufficient decrease holds, curvature cannot be reached within the cap.
        out = std::move(cur);
        return true;
      }
      prev = std::move(cur);
      alpha = std::min(2.0 * alpha, alpha_max);
    }
    return false;
  }

 private:
  bool armijo(const Trial& t) const { return t.f <= f0_ + s_.c1 * t.alpha * slope0_; }

  // Near a minimizer the predicted decrease drops below the rounding error of f, so sufficient
  // decrease can no longer be observed; accept a point that satisfies the curvature condition
  // and does not raise f beyond rounding (Hager-Zhang approximate Wolfe).
  bool approx_wolfe(const Trial& t) const {
    return std::isfinite(t.f) && t.f <= f0_ + kRoundingSlack * std::abs(f0_) &&
           std::abs(t.slope) <= -s_.c2 * slope0_;
  }

  Trial eval(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = *x0_ + alpha * *d_;
    t.g.resize(t.x.size());
    t.f = obj_(t.x, t.g);
    ++evals_;
    t.slope = std::isfinite(t.f) ? vdot(t.g, *d_) : 0.0;
    return t;
  }

  // lo satisfies sufficient decrease and has the lowest f seen; the minimizer lies between lo and hi.
  bool zoom(Trial lo, Trial hi, Trial& out) {
    for (int j = 0; j < s_.max_line_search; ++j) {
      const double a = lo.alpha, b = hi.alpha;
      const double width = std::abs(b - a);
      if (width <= 1e-14 * std::max(1.0, std::max(std::abs(a), std::abs(b)))) break;
      double alpha = cubic_min(lo, hi);
      const double lo_b = std::min(a, b) + 0.1 * width;
      const double hi_b = std::max(a, b) - 0.1 * width;
      if (!std::isfinite(alpha) || alpha < lo_b || alpha > hi_b) alpha = 0.5 * (a + b);
      Trial cur = eval(alpha);
      if (!armijo(cur) && approx_wolfe(cur)) {
        out = std::move(cur);
        return true;
      }
      if (!std::isfinite(cur.f) || !armijo(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -s_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    if (lo.alpha > 0.0 && lo.f < f0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  static double cubic_min(const Trial& p, const Trial& q) {
    if (!std::isfinite(q.f)) return std::numeric_limits<double>::quiet_NaN();
    const double d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    const double disc = d1 * d1 - p.slope * q.slope;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double sign = q.alpha > p.alpha ? 1.0 : -1.0;
    const double d2 = sign * std::sqrt(disc);
    return q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
  }

  const Objective& obj_;
  const LbfgsSettings& s_;
  int& evals_;
  const Vec* x0_ = nullptr;
  const Vec* d_ = nullptr;
  double f0_ = 0.0;
  double slope0_ = 0.0;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsSettings& settings,
                           const std::function<void(const LbfgsStep&, const Eigen::VectorXd&)>& on_accept) {
  const auto norm = [&](const Vec& g) {
    return settings.grad_norm ? settings.grad_norm(g) : std::sqrt(vdot(g, g));
  };
  LbfgsResult r;
  r.x = std::move(x0);
  r.g.resize(r.x.size());
  r.f = objective(r.x, r.g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.g.allFinite()) {
    r.status = LbfgsStatus::NonFinite;
    return r;
  }
  r.grad_norm = norm(r.g);
  if (on_accept) on_accept({0, r.f, r.grad_norm, 0.0}, r.x);
  if (r.grad_norm <= settings.grad_tol) {
    r.status = LbfgsStatus::Converged;
    return r;
  }

  const int m = std::max(1, settings.history);
  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_tmp(static_cast<std::size_t>(m));
  LineSearch ls(objective, settings, r.evaluations);
  Vec d(r.x.size());

  for (int k = 1; k <= settings.max_iterations; ++k) {
    bool steepest = s_hist.empty();
    // Two-loop recursion: d = -H g.
    d = r.g;
    const int bound = static_cast<int>(s_hist.size());
    for (int i = bound - 1; i >= 0; --i) {
      alpha_tmp[i] = rho_hist[i] * vdot(s_hist[i], d);
      simd::axpy(-alpha_tmp[i], view(y_hist[i]), view(d));
    }
    if (settings.precondition) {
      settings.precondition(d);
      if (bound > 0) {
        Vec my = y_hist.back();
        settings.precondition(my);
        d *= 1.0 / (rho_hist.back() * vdot(y_hist.back(), my));
      }
    } else if (bound > 0) {
      const double yy = vdot(y_hist.back(), y_hist.back());
      d *= 1.0 / (rho_hist.back() * yy);
    }
    for (int i = 0; i < bound; ++i) {
      const double beta = rho_hist[i] * vdot(y_hist[i], d);
      simd::axpy(alpha_tmp[i] - beta, view(s_hist[i]), view(d));
    }
    d = -d;

    Trial accepted;
    bool ok = false;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
      double slope = vdot(r.g, d);
      if (!steepest && !(slope < 0.0)) {
        steepest = true;
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        d = -r.g;
        if (settings.precondition) settings.precondition(d);
        slope = vdot(r.g, d);
      }
      const double dmax = d.cwiseAbs().maxCoeff();
      if (!(dmax > 0.0)) break;
      const double alpha_max = settings.max_displacement / dmax;
      const double alpha_init =
          steepest ? std::min(1.0, settings.initial_displacement / dmax) : 1.0;
      ok = ls.run(r.x, r.f, slope, d, alpha_init, alpha_max, accepted);
      if (!ok && !steepest) {
        ++r.steepest_fallbacks;
        steepest = true;
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        d = -r.g;
        if (settings.precondition) settings.precondition(d);
      } else if (!ok) {
        break;
      }
    }
    if (!ok) {
      r.status = LbfgsStatus::LineSearchFailed;
      r.iterations = k - 1;
      return r;
    }

    Vec s = accepted.x - r.x;
    Vec y = accepted.g - r.g;
    const double sy = vdot(s, y);
    r.x = std::move(accepted.x);
    r.g = std::move(accepted.g);
    r.f = accepted.f;
    r.grad_norm = norm(r.g);
    r.iterations = k;
    if (!r.g.allFinite()) {
      r.status = LbfgsStatus::NonFinite;
      return r;
    }
    if (sy > 1e-16 * vdot(y, y)) {
      if (static_cast<int>(s_hist.size()) == m) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    if (on_accept) on_accept({k, r.f, r.grad_norm, accepted.alpha}, r.x);
    if (r.grad_norm <= settings.grad_tol) {
      r.status = LbfgsStatus::Converged;
      return r;
    }
  }
  r.status = LbfgsStatus::MaxIterations;
  return r;
}

}  // namespace ktopo
