#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "jitterlab/attack.hpp"
#include "jitterlab/errors.hpp"
#include "jitterlab/estimators.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/risk.hpp"
#include "jitterlab/rng.hpp"

namespace jitterlab {

struct StandardObjective {};
struct AdversarialObjective {
  double eps = 0.0;
  int attack_steps = 3;
};
struct JitteringObjective {
  double sigma_w = 0.0;
};
using Objective = std::variant<StandardObjective, AdversarialObjective, JitteringObjective>;

struct SgdOptimizer {
  double lr = 1e-3;
  double momentum = 0.0;
};
struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};
using Optimizer = std::variant<SgdOptimizer, AdamOptimizer>;

inline std::string objective_name(const Objective& objective) {
  if (std::holds_alternative<AdversarialObjective>(objective)) return "adversarial";
  if (std::holds_alternative<JitteringObjective>(objective)) return "jittering";
  return "standard";
}

struct TrainConfig {
  Objective objective = StandardObjective{};
  Optimizer optimizer = AdamOptimizer{};
  int batch_size = 50;
  int n_iterations = 20000;
  std::uint64_t seed = 0;
  /// Replace H by (H + H^T) / 2 after every step (square H only).
  bool symmetric_projection = false;
  /// Loss trace resolution: one entry per window of this many iterations.
  int trace_every = 100;
  /// The returned H is the mean of the iterates over this trailing fraction
  /// of the run; 0 returns the last iterate.
  double tail_average = 0.5;

  void validate() const {
    require(batch_size >= 1, ErrorKind::invalid_parameter, "batch_size must be >= 1");
    require(n_iterations >= 1, ErrorKind::invalid_parameter, "n_iterations must be >= 1");
    require(trace_every >= 1, ErrorKind::invalid_parameter, "trace_every must be >= 1");
    require(tail_average >= 0 && tail_average < 1, ErrorKind::invalid_parameter,
            "tail_average must lie in [0, 1)");
    const double lr = std::visit([](const auto& o) { return o.lr; }, optimizer);
    require(lr > 0 && std::isfinite(lr), ErrorKind::invalid_parameter, "learning rate must be > 0");
    if (const auto* sgd = std::get_if<SgdOptimizer>(&optimizer)) {
      require(sgd->momentum >= 0 && sgd->momentum < 1, ErrorKind::invalid_parameter,
              "momentum must lie in [0, 1)");
    }
    if (const auto* adam = std::get_if<AdamOptimizer>(&optimizer)) {
      require(adam->beta1 >= 0 && adam->beta1 < 1 && adam->beta2 >= 0 && adam->beta2 < 1 &&
                  adam->eps_hat > 0,
              ErrorKind::invalid_parameter, "adam needs beta1, beta2 in [0, 1) and eps_hat > 0");
    }
    if (const auto* adv = std::get_if<AdversarialObjective>(&objective)) {
      require(adv->eps >= 0 && adv->attack_steps >= 1, ErrorKind::invalid_parameter,
              "adversarial objective needs eps >= 0 and attack_steps >= 1");
    }
    if (const auto* jit = std::get_if<JitteringObjective>(&objective)) {
      require(jit->sigma_w >= 0, ErrorKind::invalid_parameter, "sigma_w must be >= 0");
    }
  }
};

template <typename Scalar = double>
struct TrainTrace {
  std::vector<int> iterations;
  /// Mean minibatch loss over each trace window.
  std::vector<double> losses;
  LinearEstimator<Scalar> estimator;
};

class TrainingDivergenceError : public Error {
 public:
  TrainingDivergenceError(const std::string& message, std::vector<int> iterations,
                          std::vector<double> losses)
      : Error(ErrorKind::training_divergence, message),
        iterations_(std::move(iterations)),
        losses_(std::move(losses)) {}

  const std::vector<int>& iterations() const { return iterations_; }
  const std::vector<double>& losses() const { return losses_; }

 private:
  std::vector<int> iterations_;
  std::vector<double> losses_;
};

namespace detail {

template <typename Scalar>
class OptimizerState {
 public:
  OptimizerState(const Optimizer& optimizer, Index rows, Index cols)
      : optimizer_(optimizer),
        first_(Matrix<Scalar>::Zero(rows, cols)),
        second_(Matrix<Scalar>::Zero(rows, cols)) {}

  void step(Matrix<Scalar>& params, const Matrix<Scalar>& grad) {
    ++t_;
    if (const auto* sgd = std::get_if<SgdOptimizer>(&optimizer_)) {
      const Scalar lr = static_cast<Scalar>(sgd->lr);
      if (sgd->momentum > 0) {
        first_ = static_cast<Scalar>(sgd->momentum) * first_ + grad;
        params -= lr * first_;
      } else {
        params -= lr * grad;
      }
      return;
    }
    const auto& adam = std::get<AdamOptimizer>(optimizer_);
    const Scalar b1 = static_cast<Scalar>(adam.beta1);
    const Scalar b2 = static_cast<Scalar>(adam.beta2);
    first_ = b1 * first_ + (1 - b1) * grad;
    second_ = b2 * second_ + (1 - b2) * grad.cwiseAbs2();
    const Scalar c1 = 1 - static_cast<Scalar>(std::pow(adam.beta1, t_));
    const Scalar c2 = 1 - static_cast<Scalar>(std::pow(adam.beta2, t_));
    const Scalar lr = static_cast<Scalar>(adam.lr);
    const Scalar eps_hat = static_cast<Scalar>(adam.eps_hat);
    params.array() -= lr * (first_.array() / c1) /
                      ((second_.array() / c2).sqrt() + eps_hat);
  }

 private:
  Optimizer optimizer_;
  Matrix<Scalar> first_;
  Matrix<Scalar> second_;
  long t_ = 0;
};

}  // namespace detail

/// Trains H (initialized at zero) on fresh minibatches from the generative
/// model. Per-sample gradients are 2 (H y~ - x) y~^T where y~ is y itself,
/// y + PGD perturbation, or y + fresh jitter depending on the objective.
template <typename Scalar = double>
TrainTrace<Scalar> train(const SubspaceModel<Scalar>& model, const ForwardOperator<Scalar>& op,
                         const NoiseModel<Scalar>& noise, const TrainConfig& config) {
  check_dimensions(model, op, noise);
  config.validate();
  require(!config.symmetric_projection || model.n() == noise.m(), ErrorKind::invalid_dimension,
          "symmetric projection needs a square estimator");
  const Index n = model.n();
  const Index m = noise.m();
  const Index batch = config.batch_size;

  Matrix<Scalar> h = Matrix<Scalar>::Zero(n, m);
  detail::OptimizerState<Scalar> optimizer(config.optimizer, n, m);
  TrainTrace<Scalar> partial{{}, {}, LinearEstimator<Scalar>::zero(n, m)};
  double window_sum = 0;
  int window_count = 0;
  const int average_count =
      static_cast<int>(std::floor(config.tail_average * static_cast<double>(config.n_iterations)));
  const int average_start = config.n_iterations - average_count;
  Matrix<Scalar> average = Matrix<Scalar>::Zero(n, m);

  for (int it = 0; it < config.n_iterations; ++it) {
    const auto first = static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(batch);
    Batch<Scalar> data = draw_batch(model, op, noise, config.seed, streams::training, first, batch);
    Matrix<Scalar> input = std::move(data.y);
    if (const auto* adv = std::get_if<AdversarialObjective>(&config.objective)) {
      AttackConfig attack = AttackConfig::training(adv->eps);
      attack.n_steps = adv->attack_steps;
      input += pgd_attack_batch<Scalar>(h, data.x, input, attack);
    } else if (const auto* jit = std::get_if<JitteringObjective>(&config.objective)) {
      if (jit->sigma_w > 0) {
        RandomStream stream(config.seed, streams::jitter, static_cast<std::uint64_t>(it));
        for (Index b = 0; b < batch; ++b) input.col(b) += stream.normal_vector<Scalar>(m, jit->sigma_w);
      }
    }
    const Matrix<Scalar> residual = h * input - data.x;
    const double loss = static_cast<double>(residual.squaredNorm()) / static_cast<double>(batch);
    if (!std::isfinite(loss)) {
      throw TrainingDivergenceError("training diverged at iteration " + std::to_string(it),
                                    partial.iterations, partial.losses);
    }
    const Matrix<Scalar> grad = (Scalar(2) / static_cast<Scalar>(batch)) * residual * input.transpose();
    optimizer.step(h, grad);
    if (config.symmetric_projection) h = Scalar(0.5) * (h + h.transpose()).eval();
    if (it >= average_start) average += h;

    window_sum += loss;
    ++window_count;
    if (window_count == config.trace_every || it + 1 == config.n_iterations) {
      partial.iterations.push_back(it + 1);
      partial.losses.push_back(window_sum / window_count);
      window_sum = 0;
      window_count = 0;
    }
  }

  if (average_count > 0) h = average / static_cast<Scalar>(average_count);
  require(h.allFinite(), ErrorKind::training_divergence, "trained estimator is not finite");
  partial.estimator = LinearEstimator<Scalar>(std::move(h));
  return partial;
}

template <typename Scalar = double>
struct SweepResult {
  std::vector<Scalar> sigma_w_grid;
  std::vector<Scalar> eps_grid;
  /// One report per sigma_w, each covering the whole eps grid.
  std::vector<RiskReport<Scalar>> reports;
  /// Per eps: index into sigma_w_grid of the smallest robust risk.
  std::vector<std::size_t> argmin;

  Scalar risk(std::size_t w, std::size_t e) const { return reports[w].values[e]; }
  Scalar best_sigma_w(std::size_t e) const { return sigma_w_grid[argmin[e]]; }
};

/// Trains one jittering estimator per sigma_w and evaluates each on every eps.
/// Training seeds are derived per grid point; every estimator is evaluated on
/// the same samples.
template <typename Scalar = double>
SweepResult<Scalar> sweep_jitter_levels(const SubspaceModel<Scalar>& model,
                                        const ForwardOperator<Scalar>& op,
                                        const NoiseModel<Scalar>& noise,
                                        std::span<const Scalar> eps_grid,
                                        std::span<const Scalar> sigma_w_grid,
                                        std::size_t eval_samples, std::uint64_t seed,
                                        TrainConfig base = {}) {
  require(!eps_grid.empty() && !sigma_w_grid.empty(), ErrorKind::invalid_parameter,
          "sweep grids must be non-empty");
  SweepResult<Scalar> result;
  result.sigma_w_grid.assign(sigma_w_grid.begin(), sigma_w_grid.end());
  result.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  const std::uint64_t eval_seed = derive_seed(seed, 0xE7A1u);
  for (std::size_t w = 0; w < sigma_w_grid.size(); ++w) {
    TrainConfig config = base;
    config.objective = JitteringObjective{static_cast<double>(sigma_w_grid[w])};
    config.seed = derive_seed(seed, w + 1);
    try {
      const TrainTrace<Scalar> trace = train(model, op, noise, config);
      result.reports.push_back(
          robust_risk_exact(trace.estimator, model, op, noise, eps_grid, eval_samples, eval_seed));
    } catch (const Error& e) {
      throw Error(e.kind(), "sweep at sigma_w[" + std::to_string(w) + "]=" +
                                std::to_string(static_cast<double>(sigma_w_grid[w])) + ": " +
                                e.what());
    }
  }
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    std::size_t best = 0;
    for (std::size_t w = 1; w < sigma_w_grid.size(); ++w) {
      if (result.risk(w, e) < result.risk(best, e)) best = w;
    }
    result.argmin.push_back(best);
  }
  return result;
}

}  // namespace jitterlab
