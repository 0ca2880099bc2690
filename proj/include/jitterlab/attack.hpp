#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "jitterlab/errors.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/parallel.hpp"
#include "jitterlab/risk.hpp"
#include "jitterlab/rng.hpp"

namespace jitterlab {

/// Projected gradient ascent on the l2 ball with normalized steps of
/// step_scale * eps / n_steps.
struct AttackConfig {
  double eps = 0.0;
  int n_steps = 3;
  double step_scale = 2.5;
  int n_restarts = 1;
  /// Restarts after the first begin on the sphere of radius restart_scale * eps.
  double restart_scale = 1.0;

  /// Cheap single run from e = 0, as used inside adversarial training.
  static AttackConfig training(double eps) { return {eps, 3, 2.5, 1, 1.0}; }
  /// Run used when the attack itself is the measurement.
  static AttackConfig evaluation(double eps) { return {eps, 200, 2.5, 10, 1.0}; }

  void validate() const {
    require(eps >= 0 && std::isfinite(eps), ErrorKind::invalid_parameter, "attack eps must be >= 0");
    require(n_steps >= 1, ErrorKind::invalid_parameter, "attack needs n_steps >= 1");
    require(n_restarts >= 1, ErrorKind::invalid_parameter, "attack needs n_restarts >= 1");
    require(step_scale > 0, ErrorKind::invalid_parameter, "attack step_scale must be > 0");
    require(restart_scale >= 0 && restart_scale <= 1, ErrorKind::invalid_parameter,
            "attack restart_scale must lie in [0, 1]");
  }
};

/// A map that can be evaluated and pulled back: f(y) and J_f(y)^T u.
template <typename F, typename Scalar>
concept DifferentiableMap = requires(const F& f, const Vector<Scalar>& y, const Vector<Scalar>& u) {
  { f(y) } -> std::convertible_to<Vector<Scalar>>;
  { f.vjp(y, u) } -> std::convertible_to<Vector<Scalar>>;
};

template <typename Scalar = double>
struct AttackResult {
  Vector<Scalar> perturbation;
  Scalar value;
};

template <typename Scalar>
void project_to_ball(Vector<Scalar>& e, Scalar radius) {
  const Scalar norm = e.norm();
  if (norm > radius) e *= radius / norm;
}

/// Maximizes ||f(y + e) - x||^2 over ||e|| <= eps. Restart 0 starts at e = 0;
/// the result is the best iterate over all restarts.
template <typename Scalar, typename F>
  requires DifferentiableMap<F, Scalar>
AttackResult<Scalar> pgd_attack(const F& estimator, const Vector<Scalar>& x,
                                const Vector<Scalar>& y, const AttackConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const Index m = y.size();
  const Scalar eps = static_cast<Scalar>(config.eps);
  const Scalar step = static_cast<Scalar>(config.step_scale * config.eps / config.n_steps);

  auto loss = [&](const Vector<Scalar>& input, Vector<Scalar>& residual) {
    residual = estimator(input) - x;
    const Scalar value = residual.squaredNorm();
    if (!std::isfinite(static_cast<double>(value))) {
      fail(ErrorKind::attack_divergence, "attack objective is not finite");
    }
    return value;
  };

  AttackResult<Scalar> best{Vector<Scalar>::Zero(m), Scalar(0)};
  bool have_best = false;
  Vector<Scalar> residual;
  for (int restart = 0; restart < config.n_restarts; ++restart) {
    Vector<Scalar> e = Vector<Scalar>::Zero(m);
    if (restart > 0 && eps > 0 && config.restart_scale > 0) {
      RandomStream stream(seed, streams::attack, static_cast<std::uint64_t>(restart));
      e = stream.normal_vector<Scalar>(m);
      const Scalar norm = e.norm();
      if (norm > 0) e *= static_cast<Scalar>(config.restart_scale) * eps / norm;
    }
    for (int j = 0; j <= config.n_steps; ++j) {
      const Vector<Scalar> input = y + e;
      const Scalar value = loss(input, residual);
      if (!have_best || value > best.value) {
        best = {e, value};
        have_best = true;
      }
      if (j == config.n_steps || eps == Scalar(0)) break;
      const Vector<Scalar> grad = Scalar(2) * estimator.vjp(input, residual);
      const Scalar grad_norm = grad.norm();
      if (!(grad_norm > 0)) break;  // stationary
      e += (step / grad_norm) * grad;
      project_to_ball(e, eps);
    }
  }
  return best;
}

/// Column-wise pgd_attack with one run from e = 0 for a dense linear map.
/// Returns the perturbations (m x B) of the best iterate per column.
template <typename Scalar>
Matrix<Scalar> pgd_attack_batch(const Matrix<Scalar>& h, const Matrix<Scalar>& x,
                                const Matrix<Scalar>& y, const AttackConfig& config) {
  config.validate();
  const Index batch = y.cols();
  Matrix<Scalar> e = Matrix<Scalar>::Zero(y.rows(), batch);
  if (config.eps == 0) return e;
  const Scalar eps = static_cast<Scalar>(config.eps);
  const Scalar step = static_cast<Scalar>(config.step_scale * config.eps / config.n_steps);

  Matrix<Scalar> best = e;
  Vector<Scalar> best_value = Vector<Scalar>::Constant(batch, -Scalar(1));
  std::vector<bool> stalled(static_cast<std::size_t>(batch), false);
  for (int j = 0; j <= config.n_steps; ++j) {
    const Matrix<Scalar> residual = h * (y + e) - x;
    const Vector<Scalar> values = residual.colwise().squaredNorm().transpose();
    if (!values.allFinite()) fail(ErrorKind::attack_divergence, "attack objective is not finite");
    for (Index b = 0; b < batch; ++b) {
      if (values(b) > best_value(b)) {
        best_value(b) = values(b);
        best.col(b) = e.col(b);
      }
    }
    if (j == config.n_steps) break;
    const Matrix<Scalar> grad = h.transpose() * residual;
    for (Index b = 0; b < batch; ++b) {
      if (stalled[static_cast<std::size_t>(b)]) continue;
      const Scalar norm = grad.col(b).norm();
      if (!(norm > 0)) {
        stalled[static_cast<std::size_t>(b)] = true;
        continue;
      }
      e.col(b) += (step / norm) * grad.col(b);
      const Scalar len = e.col(b).norm();
      if (len > eps) e.col(b) *= eps / len;
    }
  }
  return best;
}

/// Monte-Carlo robust risk with PGD as the inner maximizer. Gives a lower
/// bound per sample; mainly a cross-check of robust_risk_exact.
template <typename Scalar, typename F>
  requires DifferentiableMap<F, Scalar>
RiskReport<Scalar> robust_risk_pgd(const F& estimator, const SubspaceModel<Scalar>& model,
                                   const ForwardOperator<Scalar>& op,
                                   const NoiseModel<Scalar>& noise,
                                   std::span<const Scalar> eps_grid, std::size_t n_samples,
                                   std::uint64_t seed, AttackConfig attack) {
  check_dimensions(model, op, noise);
  require(n_samples >= 2, ErrorKind::invalid_parameter, "robust risk needs at least 2 samples");
  const std::size_t grid = eps_grid.size();
  std::vector<Scalar> per_sample(n_samples * grid);
  parallel_for(n_samples, [&](std::size_t i) {
    const Sample<Scalar> s = draw_sample(model, op, noise, seed, streams::evaluation, i);
    for (std::size_t j = 0; j < grid; ++j) {
      AttackConfig cfg = attack;
      cfg.eps = static_cast<double>(eps_grid[j]);
      per_sample[i * grid + j] =
          pgd_attack<Scalar>(estimator, s.x, s.y, cfg, derive_seed(seed, i)).value;
    }
  });
  RiskReport<Scalar> report;
  report.n_samples = n_samples;
  report.method = RiskMethod::monte_carlo_pgd;
  report.dimension = model.n();
  for (std::size_t j = 0; j < grid; ++j) {
    MeanAccumulator<Scalar> acc;
    for (std::size_t i = 0; i < n_samples; ++i) acc.add(per_sample[i * grid + j]);
    append_summary(report, eps_grid[j], acc);
  }
  return report;
}

}  // namespace jitterlab
