#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "jitterlab/errors.hpp"

namespace jitterlab {

/// Convex objective on [lower, inf) or (lower, inf).
template <typename Scalar = double>
struct ScalarProblem {
  std::function<Scalar(Scalar)> objective;
  Scalar lower = 0;
  bool lower_inclusive = false;
  Scalar tolerance = Scalar(1e-10);
  /// Bracketing gives up once the probe is this many tolerances past lower.
  Scalar expansion_cap = Scalar(1152921504606846976.0);  // 2^60
};

template <typename Scalar = double>
struct ScalarResult {
  Scalar argmin;
  Scalar value;
  /// Set when the infimum sits at an exclusive lower bound, i.e. the
  /// objective kept decreasing towards it. argmin/value then hold the best
  /// interior probe.
  bool boundary_limit = false;
  int evaluations = 0;
};

/// Geometric bracketing from lower + tolerance (doubling the offset) until the
/// objective stops decreasing, then golden-section refinement down to the
/// tolerance.
template <typename Scalar>
ScalarResult<Scalar> minimize_convex(const ScalarProblem<Scalar>& problem) {
  require(problem.tolerance > 0, ErrorKind::invalid_parameter, "tolerance must be positive");
  require(static_cast<bool>(problem.objective), ErrorKind::invalid_parameter,
          "objective is empty");
  int evaluations = 0;
  auto eval = [&](Scalar x) {
    ++evaluations;
    const Scalar value = problem.objective(x);
    if (!std::isfinite(static_cast<double>(value))) {
      fail(ErrorKind::evaluation,
           "objective is not finite at x=" + std::to_string(static_cast<double>(x)));
    }
    return value;
  };

  const Scalar lower = problem.lower;
  const Scalar tol = problem.tolerance;

  // Probes at lower + tol * 2^k.
  Scalar offset = tol;
  Scalar prev_x = lower;
  Scalar cur_x = lower + offset;
  Scalar cur_f = eval(cur_x);
  Scalar left = lower;
  Scalar right;
  while (true) {
    const Scalar next_offset = offset * 2;
    if (next_offset > tol * problem.expansion_cap) {
      fail(ErrorKind::unbounded_below,
           "no bracket found: objective still decreasing at x=" +
               std::to_string(static_cast<double>(cur_x)));
    }
    const Scalar next_x = lower + next_offset;
    const Scalar next_f = eval(next_x);
    if (next_f >= cur_f) {
      left = prev_x;
      right = next_x;
      break;
    }
    prev_x = cur_x;
    cur_x = next_x;
    cur_f = next_f;
    offset = next_offset;
  }

  // Golden section on [left, right]; cur_x is a known interior point.
  constexpr double inv_phi = 0.6180339887498948482;
  Scalar a = left;
  Scalar b = right;
  Scalar x1 = b - Scalar(inv_phi) * (b - a);
  Scalar x2 = a + Scalar(inv_phi) * (b - a);
  Scalar f1 = eval(x1);
  Scalar f2 = eval(x2);
  Scalar best_x = cur_x;
  Scalar best_f = cur_f;
  auto track = [&](Scalar x, Scalar f) {
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  };
  track(x1, f1);
  track(x2, f2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - Scalar(inv_phi) * (b - a);
      f1 = eval(x1);
      track(x1, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + Scalar(inv_phi) * (b - a);
      f2 = eval(x2);
      track(x2, f2);
    }
  }

  ScalarResult<Scalar> result{best_x, best_f, false, 0};
  if (a == lower) {
    if (problem.lower_inclusive) {
      const Scalar f_lower = eval(lower);
      if (f_lower <= best_f) {
        result.argmin = lower;
        result.value = f_lower;
      }
    } else {
      result.boundary_limit = true;
    }
  }
  result.evaluations = evaluations;
  return result;
}

}  // namespace jitterlab
