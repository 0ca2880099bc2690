#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "jitterlab/errors.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/rng.hpp"

namespace testing_support {

using jitterlab::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Kind of the jitterlab::Error raised by f, or nullopt if it returns.
inline std::optional<jitterlab::ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const jitterlab::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline Mat gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  jitterlab::RandomStream stream(seed, 0xBEEF, 0);
  Mat out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = stream.normal();
  }
  return out;
}

inline Vec gaussian_vector(Index size, std::uint64_t seed) {
  return gaussian_matrix(size, 1, seed).col(0);
}

inline double uniform(std::uint64_t seed, std::uint64_t index, double lo, double hi) {
  jitterlab::RandomStream stream(seed, 0xF00D, index);
  return lo + (hi - lo) * stream.uniform();
}

/// Grid search followed by ternary refinement; an oracle that shares no code
/// with the library's solver.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi,
                          int grid = 20001, int refine = 200) {
  double best = lo;
  double best_f = f(lo);
  const double step = (hi - lo) / (grid - 1);
  for (int i = 1; i < grid; ++i) {
    const double x = lo + step * i;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best = x;
    }
  }
  double a = std::max(lo, best - step);
  double b = std::min(hi, best + step);
  for (int it = 0; it < refine; ++it) {
    const double m1 = a + (b - a) / 3;
    const double m2 = b - (b - a) / 3;
    if (f(m1) <= f(m2)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  return (a + b) / 2;
}

/// Bisection root of a continuous function that changes sign on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
  double flo = f(lo);
  for (int it = 0; it < iterations; ++it) {
    const double mid = (lo + hi) / 2;
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2;
}

/// (eps s + sqrt(c(s)))^2 with c(s) = sc2 (s - 1)^2 + noise2 s^2, the robust
/// risk of s U U^T in the large-d limit.
inline double projection_robust_risk(double s, double sigma_c, double noise_level, double eps) {
  const double c = sigma_c * sigma_c * (s - 1) * (s - 1) + noise_level * noise_level * s * s;
  const double r = eps * s + std::sqrt(c);
  return r * r;
}

}  // namespace testing_support
