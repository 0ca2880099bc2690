#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jitterlab/estimators.hpp"
#include "jitterlab/risk.hpp"
#include "support.hpp"

using namespace jitterlab;
using testing_support::kind_of;
using testing_support::Mat;
using testing_support::Vec;

namespace {

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Minimizer of tr((HA - I) U U^T (HA - I)^T) a + tr(H H^T) b from the
/// stationarity condition H (a AU (AU)^T + b I) = a U (AU)^T.
Mat jitter_risk_minimizer(const Mat& a_mat, const Mat& u, double a, double b) {
  const Mat au = a_mat * u;
  const Mat gram = a * au * au.transpose() + b * Mat::Identity(a_mat.rows(), a_mat.rows());
  const Mat rhs = a * u * au.transpose();
  return gram.transpose().fullPivLu().solve(rhs.transpose()).transpose();
}

}  // namespace

TEST_CASE("linear estimator factors reconstruct the matrix") {
  const Mat h = testing_support::gaussian_matrix(6, 4, 3);
  const LinearEstimator<double> est(h);
  CHECK(max_abs(est.left() * est.singular_values().asDiagonal() * est.right() - h) <= 1e-8);
  for (Index i = 1; i < est.singular_values().size(); ++i) {
    CHECK(est.singular_values()(i) <= est.singular_values()(i - 1));
  }
  CHECK(est.max_singular_value() == est.singular_values()(0));
  CHECK_FALSE(est.is_zero());
  CHECK(LinearEstimator<double>::zero(3, 2).is_zero());
  CHECK(LinearEstimator<double>::zero(3, 2).matrix() == Mat::Zero(3, 2));
}

TEST_CASE("factors with negative or unsorted values are normalized") {
  const Mat q = testing_support::gaussian_matrix(5, 3, 1).householderQr().householderQ() * Mat::Identity(5, 3);
  Vec values(3);
  values << 0.2, -1.5, 0.7;
  const LinearEstimator<double> est = LinearEstimator<double>::from_factors(q, values, q.transpose());
  CHECK(est.singular_values()(0) == 1.5);
  CHECK(est.singular_values()(1) == 0.7);
  CHECK(est.singular_values()(2) == 0.2);
  CHECK(max_abs(est.matrix() - q * values.asDiagonal() * q.transpose()) <= 1e-14);
}

TEST_CASE("optimal robust alpha examples") {
  const Index d = 50, n = 100;
  const double sz = 0.4 * std::sqrt(2.0);  // sigma_z sqrt(d/n) = 0.4
  CHECK(optimal_robust_alpha(1.0, sz, d, n, 0.0) == doctest::Approx(1 / 1.16).epsilon(1e-14));
  CHECK(optimal_robust_alpha(1.0, sz, d, n, 1.0) == 0.0);
  CHECK(optimal_robust_alpha(1.0, sz, d, n, 1.3) == 0.0);
  const double oracle = testing_support::grid_argmin(
      [](double s) { return testing_support::projection_robust_risk(s, 1.0, 0.4, 0.5); }, 0.0, 1.0);
  // A value-based argmin resolves the minimizer to about sqrt(machine epsilon).
  CHECK(std::abs(oracle - 0.6813302006) <= 1e-7);
  CHECK(std::abs(optimal_robust_alpha(1.0, sz, d, n, 0.5) - 0.6813302006) <= 1e-9);
}

TEST_CASE("optimal robust alpha is non-increasing and continuous in eps") {
  for (const double level : {0.0, 0.4, 1.2}) {
    const double sz = level * std::sqrt(2.0);
    double previous = optimal_robust_alpha(1.0, sz, 50, 100, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double eps = i / 1000.0;
      const double alpha = optimal_robust_alpha(1.0, sz, 50, 100, eps);
      CHECK(alpha <= previous + 1e-15);
      if (level > 0) CHECK(previous - alpha <= 0.05);
      previous = alpha;
    }
    CHECK(previous == 0.0);
  }
}

TEST_CASE("robust denoiser structure") {
  const auto model = make_subspace<double>(12, 4, 1.0, 2);
  const NoiseModel<double> noise(12, 0.5);
  CHECK(optimal_robust_denoiser(model, noise, 1.0).is_zero());
  CHECK(max_abs(optimal_robust_denoiser(model, noise, 1.0).matrix()) == 0.0);
  const NoiseModel<double> clean(12, 0.0);
  CHECK(max_abs(optimal_robust_denoiser(model, clean, 0.0).matrix() - model.projector()) <= 1e-12);
  for (const double eps : {0.0, 0.3, 0.7}) {
    const Mat h = optimal_robust_denoiser(model, noise, eps).matrix();
    const double alpha = optimal_robust_alpha(1.0, 0.5, 4, 12, eps);
    CHECK(max_abs(h - h.transpose()) <= 1e-14);
    CHECK(max_abs(h * h - alpha * alpha * model.projector()) <= 1e-12);
    Eigen::FullPivLU<Mat> lu(h);
    lu.setThreshold(1e-10);
    CHECK(lu.rank() <= 4);
  }
  CHECK(kind_of([&] { optimal_robust_denoiser(model, NoiseModel<double>(10, 0.5), 0.1); }) ==
        ErrorKind::invalid_dimension);
}

TEST_CASE("jitter level examples") {
  CHECK(jitter_level_for_eps(1.0, 0.4, 50, 50, 0.0) == 0.0);
  // Oracle: solve alpha_j(sigma_w) = alpha_r by bisection.
  const Index d = 50;
  const double target = optimal_robust_alpha(1.0, 0.4, d, d, 0.5);
  const double root = testing_support::bisect(
      [&](double t) { return jittering_denoiser_alpha(1.0, 0.4, d, d, t / std::sqrt(double(d))) - target; },
      0.0, 5.0);
  CHECK(std::abs(root - 0.554722561527) <= 1e-9);
  CHECK(std::abs(jitter_level_for_eps(1.0, 0.4, d, d, 0.5) * std::sqrt(double(d)) - 0.554722561527) <= 1e-9);
  CHECK(kind_of([] { jitter_level_for_eps(1.0, 0.4, 50, 50, 1.0); }) == ErrorKind::out_of_regime);
}

TEST_CASE("jitter level round trip") {
  for (const double level : {0.1, 0.4, 1.2}) {
    for (int i = 0; i < 50; ++i) {
      const double eps = 0.99 * i / 49.0;
      const double sz = level * std::sqrt(2.0);
      const double sw = jitter_level_for_eps(1.0, sz, 50, 100, eps);
      CHECK(std::abs(jittering_denoiser_alpha(1.0, sz, 50, 100, sw) -
                     optimal_robust_alpha(1.0, sz, 50, 100, eps)) <= 1e-10);
    }
  }
}

TEST_CASE("jittering denoiser alpha") {
  const double sz = 0.4 * std::sqrt(2.0);
  CHECK(jittering_denoiser_alpha(1.0, sz, 50, 100, 0.0) == optimal_robust_alpha(1.0, sz, 50, 100, 0.0));
  CHECK(jittering_denoiser_alpha(1.0, sz, 50, 100, 1e6) < 1e-12);
  // sigma_z^2 d/n = 0.16, sigma_w^2 d = 0.25
  CHECK(jittering_denoiser_alpha(1.0, 0.4, 50, 50, 0.5 / std::sqrt(50.0)) ==
        doctest::Approx(1 / 1.41).epsilon(1e-14));
}

TEST_CASE("optimal jittering estimator for denoising is alpha_j U U^T") {
  const auto model = make_subspace<double>(20, 5, 1.3, 4);
  const ForwardOperator<double> op(Mat::Identity(20, 20), model);
  const NoiseModel<double> noise(20, 0.6);
  for (const double sw : {0.0, 0.05, 0.2}) {
    const double alpha = jittering_denoiser_alpha(1.3, 0.6, 5, 20, sw);
    CHECK(max_abs(optimal_jittering_estimator(model, op, noise, sw).matrix() - alpha * model.projector()) <=
          1e-12);
  }
}

TEST_CASE("unobservable modes get zero shrinkage") {
  Vec lambda(3);
  lambda << 1.0, 0.5, 0.0;
  const Vec shrink = jittering_shrinkage<double>(lambda, 1.0, 0.3, 3, 6, 0.1);
  CHECK(shrink(2) == 0.0);
  CHECK(shrink(0) > 0.0);
  // Basis e1..e3 and an operator that kills e3.
  Mat u = Mat::Zero(6, 3);
  u(0, 0) = u(1, 1) = u(2, 2) = 1;
  const SubspaceModel<double> model(u, 1.0);
  Vec diag(6);
  diag << 1, 0.5, 0, 1, 1, 1;
  const ForwardOperator<double> op(Mat(diag.asDiagonal()), model);
  const Mat h = optimal_jittering_estimator(model, op, NoiseModel<double>(6, 0.3), 0.1).matrix();
  CHECK(max_abs(h.row(2)) <= 1e-14);
  CHECK(max_abs(h.col(2)) <= 1e-14);
}

TEST_CASE("optimal jittering estimator minimizes the jittering risk") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = make_subspace<double>(6, 3, 1.2, seed);
    const Mat a = testing_support::gaussian_matrix(5, 6, seed + 10);
    const ForwardOperator<double> op(a, model);
    const NoiseModel<double> noise(5, 0.4);
    const double sw = 0.15;
    const Mat oracle = jitter_risk_minimizer(a, model.basis(), 1.2 * 1.2 / 3, 0.4 * 0.4 / 5 + sw * sw);
    CHECK(max_abs(optimal_jittering_estimator(model, op, noise, sw).matrix() - oracle) <= 1e-10);
  }
}

TEST_CASE("ridge estimator equals the jittering estimator") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 5 + static_cast<Index>(seed % 3), d = 2 + static_cast<Index>(seed % 2);
    const Index m = 4 + static_cast<Index>(seed % 4);
    const auto model = make_subspace<double>(n, d, 1.0 + 0.1 * static_cast<double>(seed), seed);
    const ForwardOperator<double> op(testing_support::gaussian_matrix(m, n, seed + 50), model);
    const NoiseModel<double> noise(m, 0.3);
    const double sw = 0.05 * static_cast<double>(seed);
    CHECK(max_abs(ridge_estimator(model, op, noise, sw * sw).matrix() -
                  optimal_jittering_estimator(model, op, noise, sw).matrix()) <= 1e-12);
  }
}

TEST_CASE("ridge limits") {
  const auto model = make_subspace<double>(8, 3, 1.0, 3);
  const ForwardOperator<double> op(testing_support::gaussian_matrix(8, 8, 4), model);
  const NoiseModel<double> noise(8, 0.2);
  CHECK(max_abs(ridge_estimator(model, op, noise, 0.0).matrix() -
                optimal_jittering_estimator(model, op, noise, 0.0).matrix()) <= 1e-12);
  CHECK(max_abs(ridge_estimator(model, op, noise, 1e12).matrix()) <= 1e-10);
  CHECK(kind_of([&] { ridge_estimator(model, op, noise, -1.0); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("conjectured estimator reduces to the robust denoiser for A = I") {
  for (const double level : {0.1, 0.4, 1.2}) {
    for (const double sc : {0.5, 1.0, 2.0}) {
      const Index n = 40, d = 20;
      const auto model = make_subspace<double>(n, d, sc, 1);
      const ForwardOperator<double> op(Mat::Identity(n, n), model);
      const double sz = level * std::sqrt(2.0);
      const NoiseModel<double> noise(n, sz);
      for (const double ratio : {0.05, 0.3, 0.6, 0.9, 1.2}) {
        const double eps = ratio * sc;
        const auto conj = conjectured_robust_estimator(model, op, noise, eps);
        const double alpha = optimal_robust_alpha(sc, sz, d, n, eps);
        CHECK(max_abs(conj.estimator.matrix() - alpha * model.projector()) <= 1e-7);
        const double optimal = testing_support::projection_robust_risk(alpha, sc, level, eps);
        CHECK(std::abs(conj.risk - optimal) <= 1e-6 * optimal);
      }
    }
  }
}

TEST_CASE("conjectured profile respects the constraint and its risk is self-consistent") {
  const Index n = 100, d = 50;
  const auto model = make_subspace<double>(n, d, std::sqrt(double(d)), 5);
  auto op = make_diagonal_operator<double>(n, Spectrum::linear_decay());
  op.bind(model);
  const NoiseModel<double> noise(n, std::sqrt(0.01 * n));
  for (const double eps : {0.5, 1.0, 2.0, 4.0}) {
    const auto conj = conjectured_robust_estimator(model, op, noise, eps);
    REQUIRE(conj.profile.lambda_star.has_value());
    for (Index i = 0; i < conj.profile.sigma.size(); ++i) {
      CHECK(conj.profile.sigma(i) >= 0);
      CHECK(conj.profile.sigma(i) * conj.profile.sigma(i) <= *conj.profile.lambda_star + 1e-12);
    }
    const double concentrated = concentrated_robust_risk(conj.estimator, model, op, noise, eps);
    CHECK(concentrated == doctest::Approx(conj.risk).epsilon(1e-7));
  }
}

TEST_CASE("conjectured estimator beats jittering and standard estimators") {
  const Index n = 100, d = 50;
  const auto model = make_subspace<double>(n, d, std::sqrt(double(d)), 5);
  auto op = make_diagonal_operator<double>(n, Spectrum::linear_decay());
  op.bind(model);
  const NoiseModel<double> noise(n, std::sqrt(0.01 * n));
  const LinearEstimator<double> standard = optimal_jittering_estimator(model, op, noise, 0.0);
  for (const double eps : {0.5, 1.5, 3.0}) {
    const double conj = conjectured_robust_estimator(model, op, noise, eps).risk;
    const JitterChoice<double> jitter = best_jitter_level(model, op, noise, eps);
    const double std_risk = concentrated_robust_risk(standard, model, op, noise, eps);
    CHECK(conj <= jitter.risk * (1 + 1e-9));
    CHECK(jitter.risk <= std_risk * (1 + 1e-9));
  }
}

TEST_CASE("conjectured estimator approaches the MMSE estimator as eps shrinks") {
  const Index n = 30, d = 10;
  const auto model = make_subspace<double>(n, d, 1.0, 2);
  auto op = make_diagonal_operator<double>(n, Spectrum::geometric(0.9));
  op.bind(model);
  const NoiseModel<double> noise(n, 0.3);
  const Mat mmse = optimal_jittering_estimator(model, op, noise, 0.0).matrix();
  double previous = 1e300;
  for (const double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double gap = max_abs(conjectured_robust_estimator(model, op, noise, eps).estimator.matrix() - mmse);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous <= 1e-3);
}

TEST_CASE("conjectured estimator needs a positive radius") {
  const auto model = make_subspace<double>(6, 2, 1.0, 1);
  const ForwardOperator<double> op(Mat::Identity(6, 6), model);
  CHECK(kind_of([&] { conjectured_robust_estimator(model, op, NoiseModel<double>(6, 0.2), 0.0); }) ==
        ErrorKind::invalid_parameter);
}

TEST_CASE("large radius maps the conjectured estimator to zero") {
  const auto model = make_subspace<double>(10, 5, 1.0, 1);
  const ForwardOperator<double> op(Mat::Identity(10, 10), model);
  const auto conj = conjectured_robust_estimator(model, op, NoiseModel<double>(10, 0.3), 1.5);
  CHECK(max_abs(conj.estimator.matrix()) <= 1e-12);
  CHECK(conj.risk == doctest::Approx(1.0).epsilon(1e-12));
}
