#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jitterlab/attack.hpp"
#include "jitterlab/estimators.hpp"
#include "jitterlab/risk.hpp"
#include "support.hpp"

using namespace jitterlab;
using testing_support::kind_of;
using testing_support::Mat;
using testing_support::Vec;

namespace {

/// |mean - truth| within three standard errors of a single fixed-seed report.
bool within_three_se(const RiskReport<double>& report, std::size_t i, double truth_total) {
  const double se = report.total_half_width(i) / kCi66;
  return std::abs(report.total(i) - truth_total) <= 3 * se;
}

/// PGD with a path length of 100 eps; the default 2.5 eps budget stalls on the
/// sphere before reaching the maximizer.
double best_pgd(const LinearEstimator<double>& h, const Vec& v, double eps, int restarts, int steps) {
  AttackConfig config{eps, steps, 100.0, restarts, 1.0};
  // ||H (0 + e) - (-v)||^2 = ||v + H e||^2
  const Vec y = Vec::Zero(h.cols());
  return pgd_attack<double>(h, Vec(-v), y, config, 77).value;
}

}  // namespace

TEST_CASE("dual of a zero estimator or zero radius is the residual energy") {
  const Vec v = testing_support::gaussian_vector(8, 1);
  CHECK(inner_max_dual(LinearEstimator<double>::zero(8, 8), v, 0.7) == doctest::Approx(v.squaredNorm()));
  const LinearEstimator<double> h(testing_support::gaussian_matrix(8, 8, 2));
  CHECK(inner_max_dual(h, v, 0.0) == doctest::Approx(v.squaredNorm()));
}

TEST_CASE("dual of the identity aligns the perturbation with the residual") {
  const LinearEstimator<double> identity(Mat::Identity(8, 8));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vec v = testing_support::gaussian_vector(8, seed);
    for (const double eps : {0.01, 0.3, 2.0}) {
      const double truth = std::pow(v.norm() + eps, 2);
      CHECK(std::abs(inner_max_dual(identity, v, eps) - truth) <= 1e-9 * truth);
    }
  }
}

TEST_CASE("dual matches a long PGD run on random estimators") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearEstimator<double> h(testing_support::gaussian_matrix(8, 8, seed + 20));
    const Vec v = testing_support::gaussian_vector(8, seed + 40);
    const double dual = inner_max_dual(h, v, 0.3);
    const double pgd = best_pgd(h, v, 0.3, 50, 2000);
    CHECK(pgd <= dual * (1 + 1e-12));
    CHECK(std::abs(pgd - dual) <= 1e-4 * dual);
  }
}

TEST_CASE("dual handles rank-deficient estimators and the hard case") {
  Mat h = Mat::Zero(6, 6);
  h(0, 0) = 2.0;
  h(1, 1) = 1.0;
  const LinearEstimator<double> est(h);
  // v orthogonal to the top singular direction.
  Vec v = Vec::Zero(6);
  v(1) = 0.5;
  v(4) = 0.3;
  const double dual = inner_max_dual(est, v, 0.4);
  const double pgd = best_pgd(est, v, 0.4, 20, 2000);
  CHECK(pgd <= dual * (1 + 1e-9));
  CHECK(std::abs(pgd - dual) <= 1e-4 * dual);
  // Attacking along the null-space-free top direction gives 0.34 + 4 * 0.16.
  CHECK(dual >= 0.34 + 0.64 - 1e-9);
}

TEST_CASE("robust risk at zero radius is the standard risk") {
  const Index n = 40, d = 20;
  const auto model = make_subspace<double>(n, d, 1.0, 3);
  const ForwardOperator<double> op(Mat::Identity(n, n), model);
  const NoiseModel<double> noise(n, 0.5);
  const double alpha = 0.8;
  const auto report = robust_risk_exact(scaled_projection(model, alpha), model, op, noise, 0.0, 20000, 5);
  CHECK(within_three_se(report, 0, standard_risk_closed_form(alpha, 1.0, 0.5, d, n)));
  CHECK(report.method == RiskMethod::exact_dual);
  CHECK(report.n_samples == 20000);
  CHECK(report.ci_low[0] <= report.values[0]);
  CHECK(report.values[0] <= report.ci_high[0]);
}

TEST_CASE("robust risk of the optimal denoiser at its own radius") {
  // Finite-d risk of s U U^T is s^2 eps^2 + 2 s eps sqrt(c/d) E||g|| + c with
  // g ~ N(0, I_d); it approaches the large-d value from below.
  const Index n = 400, d = 200;
  const auto model = make_subspace<double>(n, d, 1.0, 3);
  const ForwardOperator<double> op(Mat::Identity(n, n), model);
  const double sz = 0.4 * std::sqrt(2.0);
  const NoiseModel<double> noise(n, sz);
  const double eps = 0.5;
  const double alpha = optimal_robust_alpha(1.0, sz, d, n, eps);
  const auto report = robust_risk_exact(optimal_robust_denoiser(model, noise, eps), model, op, noise, eps, 4000, 9);
  const double c = standard_risk_closed_form(alpha, 1.0, sz, d, n);
  const double mean_norm = std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0));
  const double finite_d = alpha * alpha * eps * eps + 2 * alpha * eps * std::sqrt(c / d) * mean_norm + c;
  CHECK(within_three_se(report, 0, finite_d));
}

TEST_CASE("past the transition the robust risk is the signal energy") {
  const Index n = 40, d = 20;
  const auto model = make_subspace<double>(n, d, 1.0, 3);
  const ForwardOperator<double> op(Mat::Identity(n, n), model);
  const NoiseModel<double> noise(n, 0.5);
  const auto h = optimal_robust_denoiser(model, noise, 1.1);
  const auto report = robust_risk_exact(h, model, op, noise, 1.1, 20000, 2);
  CHECK(within_three_se(report, 0, 1.0));
}

TEST_CASE("robust risk is non-decreasing in eps") {
  const Index n = 30, d = 10;
  const auto model = make_subspace<double>(n, d, 1.0, 3);
  auto op = make_diagonal_operator<double>(n, Spectrum::linear_decay());
  op.bind(model);
  const NoiseModel<double> noise(n, 0.2);
  const std::vector<double> grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
  for (const auto& h : {optimal_jittering_estimator(model, op, noise, 0.0),
                        optimal_jittering_estimator(model, op, noise, 0.1),
                        LinearEstimator<double>(testing_support::gaussian_matrix(n, n, 1))}) {
    const auto report = robust_risk_exact(h, model, op, noise, std::span<const double>(grid), 500, 8);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(report.values[i] >= report.values[i - 1]);
    REQUIRE(report.size() == grid.size());
  }
}

TEST_CASE("standard risk closed form") {
  CHECK(standard_risk_closed_form(1.0, 1.0, 0.0, 5, 10) == 0.0);
  CHECK(standard_risk_closed_form(0.0, 1.3, 0.7, 5, 10) == doctest::Approx(1.69));
  const double sz = 0.4 * std::sqrt(2.0);
  double previous = -1;
  for (int i = 1; i < 100; ++i) {
    const double eps = i / 100.0;
    const double alpha = optimal_robust_alpha(1.0, sz, 50, 100, eps);
    const double r0 = standard_risk_closed_form(alpha, 1.0, sz, 50, 100);
    const double expected = 0.16 / (1.0 + 0.16 - eps * eps);
    CHECK(std::abs(r0 - expected) <= 1e-10);
    CHECK(r0 > previous);
    previous = r0;
  }
}

TEST_CASE("worst-case perturbation of a scaled projection") {
  const Index n = 12, d = 4;
  const auto model = make_subspace<double>(n, d, 1.0, 6);
  const Vec c = testing_support::gaussian_vector(d, 1);
  CHECK(kind_of([&] { worst_case_perturbation_projection(1.0, model, c, Vec(Vec::Zero(n)), 0.3); }) ==
        ErrorKind::degenerate_input);

  const Vec uc = model.basis() * c;
  const Vec e0 = worst_case_perturbation_projection(0.0, model, c, testing_support::gaussian_vector(n, 2), 0.3);
  CHECK(e0.norm() == doctest::Approx(0.3));
  CHECK(std::abs(std::abs(e0.dot(uc)) / (e0.norm() * uc.norm()) - 1) <= 1e-12);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double alpha = testing_support::uniform(3, seed, 0.05, 0.95);
    const double eps = testing_support::uniform(4, seed, 0.05, 1.0);
    const Vec cs = testing_support::gaussian_vector(d, seed + 10);
    const Vec z = 0.3 * testing_support::gaussian_vector(n, seed + 30);
    const Vec x = model.basis() * cs;
    const Vec y = x + z;
    const auto h = scaled_projection(model, alpha);
    const Vec e = worst_case_perturbation_projection(alpha, model, cs, z, eps);
    CHECK(e.norm() == doctest::Approx(eps).epsilon(1e-12));
    const double attained = (h(Vec(y + e)) - x).squaredNorm();
    const double dual = inner_max_dual(h, Vec(h(y) - x), eps);
    CHECK(std::abs(attained - dual) <= 1e-10 * dual);
  }
}

TEST_CASE("jittering risk closed form") {
  const Index n = 10, d = 4;
  const auto model = make_subspace<double>(n, d, 1.0, 1);
  const ForwardOperator<double> op(testing_support::gaussian_matrix(n, n, 4), model);
  const NoiseModel<double> noise(n, 0.3);
  CHECK(jittering_risk_closed_form(LinearEstimator<double>::zero(n, n), model, op, noise, 0.0) ==
        doctest::Approx(1.0));

  const double sw = 0.2;
  const auto best = optimal_jittering_estimator(model, op, noise, sw);
  const double minimum = jittering_risk_closed_form(best, model, op, noise, sw);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Mat delta = testing_support::gaussian_matrix(n, n, seed + 100);
    delta *= 1e-3 / delta.norm();
    const LinearEstimator<double> moved(Mat(best.matrix() + delta));
    CHECK(jittering_risk_closed_form(moved, model, op, noise, sw) > minimum);
  }

  // Monte-Carlo over samples with fresh jitter.
  const std::size_t count = 100000;
  MeanAccumulator<double> acc;
  const auto h = LinearEstimator<double>(testing_support::gaussian_matrix(n, n, 8) * 0.3);
  for (std::size_t i = 0; i < count; ++i) {
    const Sample<double> s = draw_sample(model, op, noise, 17, streams::samples, i);
    RandomStream jitter(17, streams::jitter, i);
    const Vec w = jitter.normal_vector<double>(n, sw);
    acc.add((h(Vec(s.y + w)) - s.x).squaredNorm());
  }
  const double closed = jittering_risk_closed_form(h, model, op, noise, sw);
  CHECK(std::abs(acc.mean - closed) <= 5 * acc.standard_error());
}

TEST_CASE("66 percent intervals cover the truth about two thirds of the time") {
  const Index n = 10, d = 5;
  const auto model = make_subspace<double>(n, d, 1.0, 2);
  const ForwardOperator<double> op(Mat::Identity(n, n), model);
  const NoiseModel<double> noise(n, 0.4);
  const double alpha = 0.7;
  const auto h = scaled_projection(model, alpha);
  const double truth = standard_risk_closed_form(alpha, 1.0, 0.4, d, n) / n;
  int covered = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const auto report = robust_risk_exact(h, model, op, noise, 0.0, 200, 1000 + r);
    if (report.ci_low[0] <= truth && truth <= report.ci_high[0]) ++covered;
  }
  const double rate = static_cast<double>(covered) / reps;
  CHECK(rate >= 0.60);
  CHECK(rate <= 0.72);
}

TEST_CASE("concentrated risk of a scaled projection has the large-d closed form") {
  const Index n = 30, d = 10;
  const auto model = make_subspace<double>(n, d, 1.0, 2);
  const ForwardOperator<double> op(Mat::Identity(n, n), model);
  const double sz = 0.4 * std::sqrt(3.0);  // sigma_z sqrt(d/n) = 0.4
  const NoiseModel<double> noise(n, sz);
  for (const double alpha : {0.2, 0.6, 0.9}) {
    for (const double eps : {0.0, 0.1, 0.5, 1.2}) {
      const double value = concentrated_robust_risk(scaled_projection(model, alpha), model, op, noise, eps);
      const double truth = testing_support::projection_robust_risk(alpha, 1.0, 0.4, eps);
      CHECK(std::abs(value - truth) <= 1e-9 * truth);
    }
  }
}

TEST_CASE("risk inputs are validated") {
  const auto model = make_subspace<double>(6, 2, 1.0, 1);
  const ForwardOperator<double> op(Mat::Identity(6, 6), model);
  const NoiseModel<double> noise(6, 0.2);
  CHECK(kind_of([&] { robust_risk_exact(LinearEstimator<double>::zero(5, 6), model, op, noise, 0.1, 10, 1); }) ==
        ErrorKind::invalid_dimension);
  CHECK(kind_of([&] { robust_risk_exact(LinearEstimator<double>::zero(6, 6), model, op, noise, 0.1, 1, 1); }) ==
        ErrorKind::invalid_parameter);
}
