#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "jitterlab/errors.hpp"
#include "jitterlab/estimators.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/parallel.hpp"
#include "jitterlab/scalar_solver.hpp"

namespace jitterlab {

/// z such that mean +- z * SE is a two-sided 66% normal interval.
inline constexpr double kCi66 = 0.9541652531461944;

enum class RiskMethod { exact_dual, closed_form, monte_carlo_pgd };

constexpr std::string_view to_string(RiskMethod method) {
  switch (method) {
    case RiskMethod::exact_dual: return "exact-dual";
    case RiskMethod::closed_form: return "closed-form";
    case RiskMethod::monte_carlo_pgd: return "monte-carlo-pgd";
  }
  return "unknown";
}

/// Per-radius risks, normalized per pixel (risk / n).
template <typename Scalar = double>
struct RiskReport {
  std::vector<Scalar> eps_grid;
  std::vector<Scalar> values;
  std::vector<Scalar> ci_low;
  std::vector<Scalar> ci_high;
  std::size_t n_samples = 0;
  RiskMethod method = RiskMethod::exact_dual;
  Index dimension = 1;

  std::size_t size() const { return values.size(); }
  /// Un-normalized risk at grid point i.
  Scalar total(std::size_t i) const { return values[i] * static_cast<Scalar>(dimension); }
  Scalar total_ci_low(std::size_t i) const { return ci_low[i] * static_cast<Scalar>(dimension); }
  Scalar total_ci_high(std::size_t i) const { return ci_high[i] * static_cast<Scalar>(dimension); }
  Scalar half_width(std::size_t i) const { return (ci_high[i] - ci_low[i]) / 2; }
  Scalar total_half_width(std::size_t i) const { return half_width(i) * static_cast<Scalar>(dimension); }
};

/// Running mean/variance accumulator (Welford).
template <typename Scalar>
struct MeanAccumulator {
  std::size_t count = 0;
  Scalar mean = 0;
  Scalar m2 = 0;

  void add(Scalar value) {
    ++count;
    const Scalar delta = value - mean;
    mean += delta / static_cast<Scalar>(count);
    m2 += delta * (value - mean);
  }

  Scalar standard_error() const {
    if (count < 2) return Scalar(0);
    using std::sqrt;
    return sqrt(m2 / static_cast<Scalar>(count - 1) / static_cast<Scalar>(count));
  }
};

template <typename Scalar>
void append_summary(RiskReport<Scalar>& report, Scalar eps, const MeanAccumulator<Scalar>& acc) {
  const Scalar scale = Scalar(1) / static_cast<Scalar>(report.dimension);
  const Scalar half = Scalar(kCi66) * acc.standard_error();
  report.eps_grid.push_back(eps);
  report.values.push_back(acc.mean * scale);
  report.ci_low.push_back((acc.mean - half) * scale);
  report.ci_high.push_back((acc.mean + half) * scale);
}

template <typename Scalar>
struct DualSolution {
  Scalar value;
  /// Dual variable at the optimum; 0 when the problem was bypassed.
  Scalar lambda;
  bool boundary_limit = false;
};

/// max_{||e|| <= eps} ||v + H e||^2 through its one-dimensional dual
///   min_{lambda > sigma_max^2} lambda eps^2 + v^T (I - H H^T / lambda)^{-1} v.
/// The variable is shifted to t = lambda - sigma_max^2 so that the pole terms
/// are computed without cancellation.
template <typename Scalar, typename Derived>
DualSolution<Scalar> solve_inner_dual(const LinearEstimator<Scalar>& estimator,
                                      const Eigen::MatrixBase<Derived>& v, Scalar eps,
                                      Scalar tolerance = Scalar(1e-10)) {
  require(eps >= 0, ErrorKind::invalid_parameter, "perturbation radius must be >= 0");
  require(v.size() == estimator.rows(), ErrorKind::invalid_dimension,
          "residual length does not match the estimator output dimension");
  const Scalar norm2 = v.squaredNorm();
  if (eps == Scalar(0) || estimator.is_zero()) return {norm2, Scalar(0), false};

  const Vector<Scalar> coeffs = estimator.left().transpose() * v;
  const Scalar perp2 = (v - estimator.left() * coeffs).squaredNorm();
  const Vector<Scalar>& s = estimator.singular_values();
  const Scalar top2 = s(0) * s(0);
  const Vector<Scalar> weights = coeffs.cwiseAbs2();
  const Vector<Scalar> gaps = (Vector<Scalar>::Constant(s.size(), top2) - s.cwiseAbs2()).cwiseMax(Scalar(0));
  const Scalar eps2 = eps * eps;

  ScalarProblem<Scalar> problem;
  problem.objective = [&](Scalar t) {
    const Scalar lambda = top2 + t;
    Scalar total = lambda * eps2 + perp2;
    for (Index k = 0; k < s.size(); ++k) total += weights(k) * lambda / (t + gaps(k));
    return total;
  };
  problem.lower = 0;
  problem.lower_inclusive = false;
  problem.tolerance = tolerance;
  const ScalarResult<Scalar> solved = minimize_convex(problem);
  return {solved.value, top2 + solved.argmin, solved.boundary_limit};
}

template <typename Scalar, typename Derived>
Scalar inner_max_dual(const LinearEstimator<Scalar>& estimator, const Eigen::MatrixBase<Derived>& v,
                      Scalar eps) {
  return solve_inner_dual(estimator, v, eps).value;
}

/// Monte-Carlo robust risk with the inner maximization solved exactly through
/// the dual. All radii share the same samples.
template <typename Scalar = double>
RiskReport<Scalar> robust_risk_exact(const LinearEstimator<Scalar>& estimator,
                                     const SubspaceModel<Scalar>& model,
                                     const ForwardOperator<Scalar>& op,
                                     const NoiseModel<Scalar>& noise,
                                     std::span<const Scalar> eps_grid, std::size_t n_samples,
                                     std::uint64_t seed) {
  check_dimensions(model, op, noise);
  require(estimator.rows() == model.n() && estimator.cols() == noise.m(),
          ErrorKind::invalid_dimension, "estimator shape does not match the model");
  require(n_samples >= 2, ErrorKind::invalid_parameter, "robust risk needs at least 2 samples");
  require(!eps_grid.empty(), ErrorKind::invalid_parameter, "eps grid is empty");

  const std::size_t grid = eps_grid.size();
  std::vector<Scalar> per_sample(n_samples * grid);
  parallel_for(n_samples, [&](std::size_t i) {
    const Sample<Scalar> s = draw_sample(model, op, noise, seed, streams::evaluation, i);
    const Vector<Scalar> v = estimator(s.y) - s.x;
    for (std::size_t j = 0; j < grid; ++j) {
      per_sample[i * grid + j] = inner_max_dual(estimator, v, eps_grid[j]);
    }
  });

  RiskReport<Scalar> report;
  report.n_samples = n_samples;
  report.method = RiskMethod::exact_dual;
  report.dimension = model.n();
  for (std::size_t j = 0; j < grid; ++j) {
    MeanAccumulator<Scalar> acc;
    for (std::size_t i = 0; i < n_samples; ++i) acc.add(per_sample[i * grid + j]);
    append_summary(report, eps_grid[j], acc);
  }
  return report;
}

template <typename Scalar = double>
RiskReport<Scalar> robust_risk_exact(const LinearEstimator<Scalar>& estimator,
                                     const SubspaceModel<Scalar>& model,
                                     const ForwardOperator<Scalar>& op,
                                     const NoiseModel<Scalar>& noise, Scalar eps,
                                     std::size_t n_samples, std::uint64_t seed) {
  const Scalar grid[] = {eps};
  return robust_risk_exact(estimator, model, op, noise, std::span<const Scalar>(grid), n_samples,
                           seed);
}

/// Expected squared error of alpha U U^T in denoising without perturbation.
template <typename Scalar = double>
Scalar standard_risk_closed_form(Scalar alpha, Scalar sigma_c, Scalar sigma_z, Index d, Index n) {
  require(sigma_c >= 0 && sigma_z >= 0, ErrorKind::invalid_parameter, "scales must be >= 0");
  return sigma_c * sigma_c * (alpha - 1) * (alpha - 1) +
         alpha * alpha * sigma_z * sigma_z * ratio_of<Scalar>(d, n);
}

/// Worst-case perturbation for H = alpha U U^T, given the latent c and the
/// noise z of one denoising sample. The residual H(y + e) - x inside the
/// subspace is (alpha - 1) c + alpha U^T z + alpha U^T e, so e points along
/// U((alpha - 1) c + alpha U^T z).
template <typename Scalar = double>
Vector<Scalar> worst_case_perturbation_projection(Scalar alpha, const SubspaceModel<Scalar>& model,
                                                  const Vector<Scalar>& c, const Vector<Scalar>& z,
                                                  Scalar eps) {
  require(c.size() == model.d() && z.size() == model.n(), ErrorKind::invalid_dimension,
          "latent or noise vector has the wrong length");
  const Vector<Scalar> direction = (alpha - 1) * c + alpha * (model.basis().transpose() * z);
  const Scalar norm = direction.norm();
  require(norm > 0, ErrorKind::degenerate_input,
          "worst-case direction is undefined for a zero in-subspace residual");
  return eps * (model.basis() * direction) / norm;
}

/// E||H(A x + z + w) - x||^2 with w ~ N(0, sigma_w^2 I), by trace formulas.
template <typename Scalar = double>
Scalar jittering_risk_closed_form(const LinearEstimator<Scalar>& estimator,
                                  const SubspaceModel<Scalar>& model,
                                  const ForwardOperator<Scalar>& op,
                                  const NoiseModel<Scalar>& noise, Scalar sigma_w) {
  check_dimensions(model, op, noise);
  require(estimator.rows() == model.n() && estimator.cols() == noise.m(),
          ErrorKind::invalid_dimension, "estimator shape does not match the model");
  const Matrix<Scalar> bias = estimator.matrix() * (op.matrix() * model.basis()) - model.basis();
  const Scalar signal_var = model.sigma_c() * model.sigma_c() / static_cast<Scalar>(model.d());
  return signal_var * bias.squaredNorm() +
         estimator.matrix().squaredNorm() * (noise.coordinate_variance() + sigma_w * sigma_w);
}

/// Robust risk with expectation and the dual minimization exchanged:
///   min_{lambda > sigma_max^2} lambda eps^2 + E[v^T (I - H H^T / lambda)^{-1} v],
/// v = (H A - I) x + H z. This is the objective the conjectured estimator
/// minimizes; it upper-bounds the finite-d Monte-Carlo robust risk.
template <typename Scalar = double>
Scalar concentrated_robust_risk(const LinearEstimator<Scalar>& estimator,
                                const SubspaceModel<Scalar>& model,
                                const ForwardOperator<Scalar>& op,
                                const NoiseModel<Scalar>& noise, Scalar eps,
                                Scalar tolerance = Scalar(1e-10)) {
  check_dimensions(model, op, noise);
  require(estimator.rows() == model.n() && estimator.cols() == noise.m(),
          ErrorKind::invalid_dimension, "estimator shape does not match the model");
  require(eps >= 0, ErrorKind::invalid_parameter, "perturbation radius must be >= 0");
  const Matrix<Scalar> bias = estimator.matrix() * (op.matrix() * model.basis()) - model.basis();
  const Scalar signal_var = model.sigma_c() * model.sigma_c() / static_cast<Scalar>(model.d());
  const Scalar noise_var = noise.coordinate_variance();
  const Scalar trace = signal_var * bias.squaredNorm() + noise_var * estimator.matrix().squaredNorm();
  if (eps == Scalar(0) || estimator.is_zero()) return trace;

  const Vector<Scalar>& s = estimator.singular_values();
  const Vector<Scalar> projected = (estimator.left().transpose() * bias).rowwise().squaredNorm();
  const Vector<Scalar> weights =
      (signal_var * projected + noise_var * s.cwiseAbs2()).cwiseProduct(s.cwiseAbs2());
  const Scalar top2 = s(0) * s(0);
  const Vector<Scalar> gaps = (Vector<Scalar>::Constant(s.size(), top2) - s.cwiseAbs2()).cwiseMax(Scalar(0));
  const Scalar eps2 = eps * eps;

  ScalarProblem<Scalar> problem;
  problem.objective = [&](Scalar t) {
    Scalar total = (top2 + t) * eps2 + trace;
    for (Index k = 0; k < s.size(); ++k) total += weights(k) / (t + gaps(k));
    return total;
  };
  problem.lower = 0;
  problem.lower_inclusive = false;
  problem.tolerance = tolerance;
  return minimize_convex(problem).value;
}

template <typename Scalar = double>
struct JitterChoice {
  Scalar sigma_w;
  /// Concentrated robust risk of optimal_jittering_estimator(sigma_w).
  Scalar risk;
};

/// Jitter level whose jittering-optimal estimator has the smallest
/// concentrated robust risk at radius eps. The risk is unimodal in sigma_w
/// on the operators used here; the search is a bracketing golden section
/// over sigma_w >= 0.
template <typename Scalar = double>
JitterChoice<Scalar> best_jitter_level(const SubspaceModel<Scalar>& model,
                                       const ForwardOperator<Scalar>& op,
                                       const NoiseModel<Scalar>& noise, Scalar eps,
                                       Scalar tolerance = Scalar(1e-9)) {
  ScalarProblem<Scalar> problem;
  problem.objective = [&](Scalar sigma_w) {
    return concentrated_robust_risk(optimal_jittering_estimator(model, op, noise, sigma_w), model,
                                    op, noise, eps);
  };
  problem.lower = 0;
  problem.lower_inclusive = true;
  problem.tolerance = tolerance;
  const ScalarResult<Scalar> solved = minimize_convex(problem);
  return {solved.argmin, solved.value};
}

template <typename Scalar = double>
RiskReport<Scalar> concentrated_risk_report(const LinearEstimator<Scalar>& estimator,
                                            const SubspaceModel<Scalar>& model,
                                            const ForwardOperator<Scalar>& op,
                                            const NoiseModel<Scalar>& noise,
                                            std::span<const Scalar> eps_grid) {
  RiskReport<Scalar> report;
  report.method = RiskMethod::closed_form;
  report.dimension = model.n();
  for (const Scalar eps : eps_grid) {
    const Scalar value = concentrated_robust_risk(estimator, model, op, noise, eps);
    MeanAccumulator<Scalar> acc;
    acc.add(value);
    append_summary(report, eps, acc);
  }
  return report;
}

}  // namespace jitterlab
