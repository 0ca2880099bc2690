#include "jitterlab/experiments.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "jitterlab/errors.hpp"
#include "jitterlab/estimators.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/parallel.hpp"
#include "jitterlab/risk.hpp"
#include "jitterlab/rng.hpp"
#include "jitterlab/training.hpp"

namespace jitterlab {
namespace {

namespace salt {
constexpr std::uint64_t basis = 1;
constexpr std::uint64_t evaluation = 2;
constexpr std::uint64_t training = 1000;
}  // namespace salt

constexpr const char* kDefaultEpsGrid = "0:0.9:16";

struct Setup {
  Index n = 100;
  Index d = 50;
  double sigma_c = 1.0;
  std::uint64_t seed = 0;
  std::size_t eval_samples = 10000;
};

Index read_dimension(const Config& config, const std::string& key, long long fallback) {
  const long long value = config.get_int(key, fallback);
  if (value < 1) throw ConfigError(key, "key '" + key + "' must be >= 1");
  return static_cast<Index>(value);
}

double read_nonnegative(const Config& config, const std::string& key, double fallback) {
  const double value = config.get_double(key, fallback);
  if (value < 0) throw ConfigError(key, "key '" + key + "' must be >= 0");
  return value;
}

double read_positive(const Config& config, const std::string& key, double fallback) {
  const double value = config.get_double(key, fallback);
  if (!(value > 0)) throw ConfigError(key, "key '" + key + "' must be > 0");
  return value;
}

std::vector<double> read_nonnegative_grid(const Config& config, const std::string& key,
                                          const std::string& fallback) {
  const std::vector<double> grid = config.get_grid(key, parse_grid(key, fallback));
  for (const double v : grid) {
    if (v < 0) throw ConfigError(key, "key '" + key + "' must hold values >= 0");
  }
  return grid;
}

Setup read_setup(const Config& config) {
  Setup setup;
  setup.n = read_dimension(config, "n", 100);
  setup.d = read_dimension(config, "d", 50);
  if (setup.d > setup.n) throw ConfigError("d", "key 'd' must not exceed n");
  setup.sigma_c = read_positive(config, "sigma_c", 1.0);
  setup.seed = config.get_u64("seed", 0);
  const long long samples = config.get_int("eval_samples", 10000);
  if (samples < 2) throw ConfigError("eval_samples", "key 'eval_samples' must be >= 2");
  setup.eval_samples = static_cast<std::size_t>(samples);
  const long long threads = config.get_int("threads", 0);
  if (threads < 0) throw ConfigError("threads", "key 'threads' must be >= 0");
  worker_threads() = static_cast<std::size_t>(threads);
  return setup;
}

TrainConfig read_training(const Config& config) {
  TrainConfig train;
  const std::string optimizer = config.get_string("optimizer", "adam");
  const double lr = read_positive(config, "lr", 1e-3);
  if (optimizer == "adam") {
    AdamOptimizer adam;
    adam.lr = lr;
    adam.beta1 = config.get_double("beta1", adam.beta1);
    adam.beta2 = config.get_double("beta2", adam.beta2);
    adam.eps_hat = read_positive(config, "eps_hat", adam.eps_hat);
    if (adam.beta1 < 0 || adam.beta1 >= 1) throw ConfigError("beta1", "key 'beta1' must lie in [0, 1)");
    if (adam.beta2 < 0 || adam.beta2 >= 1) throw ConfigError("beta2", "key 'beta2' must lie in [0, 1)");
    train.optimizer = adam;
  } else if (optimizer == "sgd") {
    SgdOptimizer sgd;
    sgd.lr = lr;
    sgd.momentum = config.get_double("momentum", 0.0);
    if (sgd.momentum < 0 || sgd.momentum >= 1) {
      throw ConfigError("momentum", "key 'momentum' must lie in [0, 1)");
    }
    train.optimizer = sgd;
  } else {
    throw ConfigError("optimizer", "key 'optimizer' must be adam or sgd, got '" + optimizer + "'");
  }
  const long long batch = config.get_int("batch_size", 50);
  if (batch < 1) throw ConfigError("batch_size", "key 'batch_size' must be >= 1");
  const long long iterations = config.get_int("n_iterations", 20000);
  if (iterations < 1) throw ConfigError("n_iterations", "key 'n_iterations' must be >= 1");
  if (iterations > std::numeric_limits<int>::max()) {
    throw ConfigError("n_iterations", "key 'n_iterations' is too large");
  }
  train.batch_size = static_cast<int>(batch);
  train.n_iterations = static_cast<int>(iterations);
  train.tail_average = config.get_double("tail_average", train.tail_average);
  if (train.tail_average < 0 || train.tail_average >= 1) {
    throw ConfigError("tail_average", "key 'tail_average' must lie in [0, 1)");
  }
  train.symmetric_projection = config.get_bool("symmetric_projection", false);
  return train;
}

int read_attack_steps(const Config& config) {
  const long long steps = config.get_int("attack_steps", 3);
  if (steps < 1 || steps > 100000) throw ConfigError("attack_steps", "key 'attack_steps' must be in [1, 100000]");
  return static_cast<int>(steps);
}

/// sigma_z from sigma_z * sqrt(d / n).
double sigma_z_from_level(double level, Index d, Index n) {
  return level * std::sqrt(static_cast<double>(n) / static_cast<double>(d));
}

void stamp(ExperimentOutputs& outputs, const Config& config, std::string_view name) {
  const std::string first = "experiment=" + std::string(name) + " config_hash=" + config.hash() +
                            " rng=" + kRngVersion;
  std::vector<std::string> lines{first};
  const std::string canonical = config.canonical();
  std::size_t start = 0;
  while (start < canonical.size()) {
    const auto end = canonical.find('\n', start);
    lines.push_back(canonical.substr(start, end - start));
    start = end + 1;
  }
  for (auto& [suffix, table] : outputs) table.comments = lines;
}

std::string cell(double v) { return format_number(v); }

SubspaceModel<double> build_model(const Setup& setup) {
  return make_subspace<double>(setup.n, setup.d, setup.sigma_c, derive_seed(setup.seed, salt::basis));
}

}  // namespace

ExperimentOutputs run_alpha_curve(const Config& config) {
  const Index n = read_dimension(config, "n", 100);
  const Index d = read_dimension(config, "d", 50);
  if (d > n) throw ConfigError("d", "key 'd' must not exceed n");
  const double sigma_c = read_positive(config, "sigma_c", 1.0);
  const std::vector<double> levels = read_nonnegative_grid(config, "noise_levels", "0,0.4,1.2");
  const std::vector<double> eps_grid = read_nonnegative_grid(config, "eps_grid", "0:1.5:16");
  config.reject_unread();

  CsvTable table;
  table.header = {"noise_level", "eps", "alpha", "eps2_over_sc2"};
  for (const double level : levels) {
    const double sigma_z = sigma_z_from_level(level, d, n);
    for (const double eps : eps_grid) {
      const double alpha = optimal_robust_alpha(sigma_c, sigma_z, d, n, eps);
      table.add_row({cell(level), cell(eps), cell(alpha), cell(eps * eps / (sigma_c * sigma_c))});
    }
  }
  ExperimentOutputs outputs{{"", std::move(table)}};
  stamp(outputs, config, "alpha-curve");
  return outputs;
}

ExperimentOutputs run_equivalence(const Config& config) {
  const Setup setup = read_setup(config);
  const double level = read_nonnegative(config, "noise_level", 0.4);
  const std::vector<double> eps_grid = read_nonnegative_grid(config, "eps_grid", kDefaultEpsGrid);
  TrainConfig base = read_training(config);
  const int attack_steps = read_attack_steps(config);
  config.reject_unread();
  for (const double eps : eps_grid) {
    if (!(eps < setup.sigma_c)) {
      throw ConfigError("eps_grid", "key 'eps_grid': jittering needs every eps < sigma_c");
    }
  }

  const SubspaceModel<double> model = build_model(setup);
  const ForwardOperator<double> op(Matrix<double>::Identity(setup.n, setup.n), model);
  const double sigma_z = sigma_z_from_level(level, setup.d, setup.n);
  const NoiseModel<double> noise(setup.n, sigma_z);
  const std::uint64_t eval_seed = derive_seed(setup.seed, salt::evaluation);
  const Index n = setup.n;
  const Index d = setup.d;
  const double sc = setup.sigma_c;

  CsvTable table;
  table.header = {"method", "eps", "risk", "ci_low", "ci_high", "sigma_w", "eps2_over_sc2"};
  auto add = [&](const std::string& method, double eps, const RiskReport<double>& report,
                 std::size_t i, double sigma_w) {
    table.add_row({method, cell(eps), cell(report.values[i]), cell(report.ci_low[i]),
                   cell(report.ci_high[i]), cell(sigma_w), cell(eps * eps / (sc * sc))});
  };

  TrainConfig standard = base;
  standard.objective = StandardObjective{};
  standard.seed = derive_seed(setup.seed, salt::training);
  const TrainTrace<double> standard_trace = train(model, op, noise, standard);
  const RiskReport<double> standard_report = robust_risk_exact(
      standard_trace.estimator, model, op, noise, std::span<const double>(eps_grid),
      setup.eval_samples, eval_seed);
  for (std::size_t i = 0; i < eps_grid.size(); ++i) add("standard", eps_grid[i], standard_report, i, 0.0);

  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    const double eps = eps_grid[i];
    TrainConfig adversarial = base;
    adversarial.objective = AdversarialObjective{eps, attack_steps};
    adversarial.seed = derive_seed(setup.seed, salt::training + 1 + 2 * i);
    const TrainTrace<double> adv = train(model, op, noise, adversarial);
    add("adversarial", eps, robust_risk_exact(adv.estimator, model, op, noise, eps, setup.eval_samples, eval_seed), 0, 0.0);

    const double sigma_w = jitter_level_for_eps(sc, sigma_z, d, n, eps);
    TrainConfig jittering = base;
    jittering.objective = JitteringObjective{sigma_w};
    jittering.seed = derive_seed(setup.seed, salt::training + 2 + 2 * i);
    const TrainTrace<double> jit = train(model, op, noise, jittering);
    add("jittering", eps, robust_risk_exact(jit.estimator, model, op, noise, eps, setup.eval_samples, eval_seed), 0, sigma_w);

    const double alpha = optimal_robust_alpha(sc, sigma_z, d, n, eps);
    const double c = sc * sc * (alpha - 1) * (alpha - 1) + sigma_z * sigma_z * ratio_of<double>(d, n) * alpha * alpha;
    const double optimal = std::pow(eps * alpha + std::sqrt(c), 2) / static_cast<double>(n);
    table.add_row({"optimal", cell(eps), cell(optimal), cell(optimal), cell(optimal), cell(sigma_w),
                   cell(eps * eps / (sc * sc))});
  }
  ExperimentOutputs outputs{{"", std::move(table)}};
  stamp(outputs, config, "equivalence");
  return outputs;
}

ExperimentOutputs run_gap(const Config& config) {
  const Setup setup = read_setup(config);
  const double sigma_z = read_nonnegative(config, "sigma_z", 0.2);
  const std::string operator_name = config.get_string("operator", "linear-decay");
  const std::vector<double> eps_grid = read_nonnegative_grid(config, "eps_grid", "0:0.8:16");
  config.reject_unread();
  const SubspaceModel<double> model = build_model(setup);
  std::optional<ForwardOperator<double>> made;
  try {
    made.emplace(make_diagonal_operator<double>(setup.n, Spectrum::parse(operator_name)));
  } catch (const Error& e) {
    throw ConfigError("operator", std::string("key 'operator': ") + e.what());
  }
  made->bind(model);
  const ForwardOperator<double>& op = *made;
  const NoiseModel<double> noise(setup.n, sigma_z);
  const std::uint64_t eval_seed = derive_seed(setup.seed, salt::evaluation);
  const double sc = setup.sigma_c;

  CsvTable table;
  table.header = {"method", "eps", "risk", "ci_low", "ci_high", "concentrated_risk", "sigma_w",
                  "eps2_over_sc2"};
  const double n = static_cast<double>(setup.n);
  const LinearEstimator<double> standard = optimal_jittering_estimator(model, op, noise, 0.0);
  for (const double eps : eps_grid) {
    auto add = [&](const std::string& method, const LinearEstimator<double>& h, double sigma_w) {
      const RiskReport<double> report =
          robust_risk_exact(h, model, op, noise, eps, setup.eval_samples, eval_seed);
      const double concentrated = concentrated_robust_risk(h, model, op, noise, eps) / n;
      table.add_row({method, cell(eps), cell(report.values[0]), cell(report.ci_low[0]),
                     cell(report.ci_high[0]), cell(concentrated), cell(sigma_w),
                     cell(eps * eps / (sc * sc))});
    };
    add("standard", standard, 0.0);
    const JitterChoice<double> best = best_jitter_level(model, op, noise, eps);
    add("jittering", optimal_jittering_estimator(model, op, noise, best.sigma_w), best.sigma_w);
    // At eps = 0 the robust objective is the standard risk, minimized by the
    // MMSE estimator.
    add("conjectured", eps > 0 ? conjectured_robust_estimator(model, op, noise, eps).estimator : standard,
        0.0);
  }
  ExperimentOutputs outputs{{"", std::move(table)}};
  stamp(outputs, config, "gap");
  return outputs;
}

ExperimentOutputs run_large_eps(const Config& config) {
  const Setup setup = read_setup(config);
  const std::vector<double> levels = read_nonnegative_grid(config, "noise_levels", "0,0.4,1.2");
  const std::vector<double> ratios = read_nonnegative_grid(config, "ratio_grid", "0:1.5:16");
  TrainConfig base = read_training(config);
  const int attack_steps = read_attack_steps(config);
  config.reject_unread();

  const SubspaceModel<double> model = build_model(setup);
  const ForwardOperator<double> op(Matrix<double>::Identity(setup.n, setup.n), model);
  const std::uint64_t eval_seed = derive_seed(setup.seed, salt::evaluation);
  const double sc = setup.sigma_c;

  CsvTable table;
  table.header = {"noise_level", "eps2_over_sc2", "eps", "risk", "ci_low", "ci_high", "h_frobenius",
                  "alpha_theory"};
  std::uint64_t run = 0;
  for (const double level : levels) {
    const double sigma_z = sigma_z_from_level(level, setup.d, setup.n);
    const NoiseModel<double> noise(setup.n, sigma_z);
    for (const double ratio : ratios) {
      const double eps = sc * std::sqrt(ratio);
      TrainConfig adversarial = base;
      adversarial.objective = AdversarialObjective{eps, attack_steps};
      adversarial.seed = derive_seed(setup.seed, salt::training + run++);
      const TrainTrace<double> trace = train(model, op, noise, adversarial);
      const RiskReport<double> report =
          robust_risk_exact(trace.estimator, model, op, noise, eps, setup.eval_samples, eval_seed);
      table.add_row({cell(level), cell(ratio), cell(eps), cell(report.values[0]),
                     cell(report.ci_low[0]), cell(report.ci_high[0]),
                     cell(trace.estimator.matrix().norm()),
                     cell(optimal_robust_alpha(sc, sigma_z, setup.d, setup.n, eps))});
    }
  }
  ExperimentOutputs outputs{{"", std::move(table)}};
  stamp(outputs, config, "large-eps");
  return outputs;
}

ExperimentOutputs run_sweep(const Config& config) {
  const Setup setup = read_setup(config);
  const double level = read_nonnegative(config, "noise_level", 0.4);
  const std::vector<double> eps_grid = read_nonnegative_grid(config, "eps_grid", "0,0.2,0.4,0.6,0.8");
  const std::vector<double> sigma_w_grid = read_nonnegative_grid(config, "sigma_w_grid", "0:0.16:17");
  const TrainConfig base = read_training(config);
  config.reject_unread();

  const SubspaceModel<double> model = build_model(setup);
  const ForwardOperator<double> op(Matrix<double>::Identity(setup.n, setup.n), model);
  const double sigma_z = sigma_z_from_level(level, setup.d, setup.n);
  const NoiseModel<double> noise(setup.n, sigma_z);
  const SweepResult<double> sweep =
      sweep_jitter_levels(model, op, noise, std::span<const double>(eps_grid),
                          std::span<const double>(sigma_w_grid), setup.eval_samples, setup.seed, base);

  CsvTable argmin;
  argmin.header = {"eps", "sigma_w_argmin", "sigma_w_predicted", "eps2_over_sc2"};
  const double sc = setup.sigma_c;
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    const double eps = eps_grid[e];
    const double predicted = eps * eps < sc * sc
                                 ? jitter_level_for_eps(sc, sigma_z, setup.d, setup.n, eps)
                                 : std::numeric_limits<double>::quiet_NaN();
    argmin.add_row({cell(eps), cell(sweep.best_sigma_w(e)), cell(predicted), cell(eps * eps / (sc * sc))});
  }
  ExperimentOutputs outputs{{"", sweep_table(sweep)}, {"_argmin", std::move(argmin)}};
  stamp(outputs, config, "sweep");
  return outputs;
}

std::vector<std::string> experiment_names() {
  return {"alpha-curve", "equivalence", "gap", "large-eps", "sweep"};
}

ExperimentOutputs run_experiment(std::string_view name, const Config& config) {
  if (name == "alpha-curve") return run_alpha_curve(config);
  if (name == "equivalence") return run_equivalence(config);
  if (name == "gap") return run_gap(config);
  if (name == "large-eps") return run_large_eps(config);
  if (name == "sweep") return run_sweep(config);
  throw ConfigError("experiment", "unknown experiment '" + std::string(name) + "'");
}

}  // namespace jitterlab
