#pragma once

// Unconstrained minimizers used by the tomography estimator: BFGS with a
// strong-Wolfe line search, and Nelder-Mead for non-smooth objectives.
//
// Objective callables have the signature
//   double(const RealVector& x, RealVector* grad)
// and fill *grad when it is non-null.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "qstatten/qlinalg.hpp"

namespace qstatten::optimize {

struct Options {
  int max_iterations = 1000;
  double objective_tolerance = 1e-12;  // relative change of f
  double parameter_tolerance = 1e-10;  // relative step length
  double gradient_tolerance = 1e-12;   // ||g||_inf relative to max(1, |f|)
};

struct Result {
  RealVector x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;
  RealVector x;
  RealVector g;
};

template <class Fn>
LinePoint probe(Fn& fn, const RealVector& x, const RealVector& dir, double alpha) {
  LinePoint p;
  p.alpha = alpha;
  p.x = x + alpha * dir;
  p.g.resize(x.size());
  p.f = fn(p.x, &p.g);
  p.slope = p.g.dot(dir);
  return p;
}

// Safeguarded cubic step between two bracketing points, bisection fallback.
inline double interpolate(const LinePoint& lo, const LinePoint& hi) {
  const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
  const double disc = d1 * d1 - lo.slope * hi.slope;
  const double mid = 0.5 * (lo.alpha + hi.alpha);
  if (!(disc >= 0.0)) return mid;
  const double d2 = std::copysign(std::sqrt(disc), hi.alpha - lo.alpha);
  const double a = hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
  const double left = std::min(lo.alpha, hi.alpha);
  const double right = std::max(lo.alpha, hi.alpha);
  const double margin = 0.1 * (right - left);
  if (!std::isfinite(a) || a < left + margin || a > right - margin) return mid;
  return a;
}

// Nocedal & Wright line search (bracketing + zoom). Returns the accepted point,
// or the best decreasing point seen when the Wolfe conditions cannot be met.
template <class Fn>
LinePoint wolfe_search(Fn& fn, const RealVector& x, double f0, double slope0, const RealVector& dir) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  constexpr int kMaxProbes = 40;

  LinePoint prev;
  prev.alpha = 0.0;
  prev.f = f0;
  prev.slope = slope0;
  LinePoint best = prev;

  auto zoom = [&](LinePoint lo, LinePoint hi, int budget) {
    for (; budget > 0; --budget) {
      LinePoint trial = probe(fn, x, dir, interpolate(lo, hi));
      if (trial.f < best.f) best = trial;
      if (trial.f > f0 + c1 * trial.alpha * slope0 || trial.f >= lo.f) {
        hi = std::move(trial);
      } else {
        if (std::abs(trial.slope) <= -c2 * slope0) return trial;
        if (trial.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(trial);
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, hi.alpha)) break;
    }
    return best;
  };

  double alpha = 1.0;
  for (int i = 0; i < kMaxProbes; ++i) {
    LinePoint cur = probe(fn, x, dir, alpha);
    if (!std::isfinite(cur.f)) {
      alpha = 0.5 * (prev.alpha + alpha);
      continue;
    }
    if (cur.f < best.f) best = cur;
    if (cur.f > f0 + c1 * alpha * slope0 || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur, kMaxProbes - i);
    if (std::abs(cur.slope) <= -c2 * slope0) return cur;
    if (cur.slope >= 0.0) return zoom(cur, prev, kMaxProbes - i);
    prev = std::move(cur);
    alpha *= 2.0;
  }
  return best;
}

}  // namespace detail

/// Quasi-Newton (BFGS, inverse-Hessian form) minimization.
template <class Fn>
Result minimize_bfgs(Fn&& fn, RealVector x0, const Options& options) {
  const Eigen::Index n = x0.size();
  Result res;
  res.x = std::move(x0);
  RealVector g(n);
  res.f = fn(res.x, &g);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);  // lower triangle only
  auto hs = h.selfadjointView<Eigen::Lower>();
  bool fresh = true;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      break;
    }
    RealVector dir = -(hs * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      dir = -g;
      slope = -g.squaredNorm();
    }
    detail::LinePoint next = detail::wolfe_search(fn, res.x, res.f, slope, dir);
    if (next.alpha == 0.0 || !(next.f <= res.f)) {
      if (fresh) break;  // no progress even along -g
      h.setIdentity();
      fresh = true;
      continue;
    }
    const RealVector s = next.x - res.x;
    const RealVector y = next.g - g;
    const double f_old = res.f;
    res.x = std::move(next.x);
    res.f = next.f;
    g = std::move(next.g);

    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (fresh) {
        h *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const RealVector hy = hs * y;
      hs.rankUpdate(s, rho * rho * y.dot(hy) + rho);
      hs.rankUpdate(s, hy, -rho);
    }

    const double f_scale = std::max({std::abs(f_old), std::abs(res.f), 1.0});
    if (std::abs(f_old - res.f) <= options.objective_tolerance * f_scale ||
        s.norm() <= options.parameter_tolerance * std::max(1.0, res.x.norm())) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

/// Derivative-free simplex search; grad is never requested.
template <class Fn>
Result minimize_nelder_mead(Fn&& fn, RealVector x0, const Options& options, double initial_step = 0.1) {
  const Eigen::Index n = x0.size();
  std::vector<RealVector> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(simplex.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[static_cast<std::size_t>(i + 1)](i) += initial_step * std::max(1.0, std::abs(x0(i)));
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = fn(simplex[i], nullptr);

  std::vector<std::size_t> order(simplex.size());
  Result res;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double size = 0.0;
    for (const auto& v : simplex) size = std::max(size, (v - simplex[best]).lpNorm<Eigen::Infinity>());
    const double spread = values[worst] - values[best];
    if (spread <= options.objective_tolerance * std::max(1.0, std::abs(values[best])) ||
        size <= options.parameter_tolerance * std::max(1.0, simplex[best].norm())) {
      res.converged = true;
      break;
    }

    RealVector centroid = RealVector::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const RealVector reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = fn(reflected, nullptr);
    if (f_reflected < values[best]) {
      const RealVector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = fn(expanded, nullptr);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const RealVector contracted =
        outside ? RealVector(centroid + 0.5 * (reflected - centroid)) : RealVector(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = fn(contracted, nullptr);
    if (f_contracted < std::min(f_reflected, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = fn(simplex[i], nullptr);
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  res.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  res.f = *best_it;
  return res;
}

}  // namespace qstatten::optimize
