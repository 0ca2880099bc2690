#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jitterlab/errors.hpp"
#include "jitterlab/model.hpp"
#include "jitterlab/scalar_solver.hpp"

namespace jitterlab {

/// f(y) = H y with H an n x m matrix, stored densely together with its thin
/// SVD H = left * diag(singular_values) * right (left n x k, right k x m).
template <typename Scalar = double>
class LinearEstimator {
 public:
  explicit LinearEstimator(Matrix<Scalar> matrix) : matrix_(std::move(matrix)) {
    require(matrix_.rows() >= 1 && matrix_.cols() >= 1, ErrorKind::invalid_dimension,
            "estimator matrix must be non-empty");
    Eigen::BDCSVD<Matrix<Scalar>> svd(matrix_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    left_ = svd.matrixU();
    values_ = svd.singularValues();
    right_ = svd.matrixV().transpose();
  }

  /// Builds H from orthonormal factors. Values may come in any order and with
  /// any sign; they are sorted non-increasing and made non-negative.
  static LinearEstimator from_factors(const Matrix<Scalar>& left, const Vector<Scalar>& values,
                                      const Matrix<Scalar>& right) {
    require(left.cols() == values.size() && right.rows() == values.size(),
            ErrorKind::invalid_dimension, "factor shapes do not agree");
    const Index k = values.size();
    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return std::abs(values(a)) > std::abs(values(b));
    });
    LinearEstimator out;
    out.left_.resize(left.rows(), k);
    out.values_.resize(k);
    out.right_.resize(k, right.cols());
    for (Index j = 0; j < k; ++j) {
      const Index src = order[static_cast<std::size_t>(j)];
      const Scalar sign = values(src) < 0 ? Scalar(-1) : Scalar(1);
      out.left_.col(j) = sign * left.col(src);
      out.values_(j) = std::abs(values(src));
      out.right_.row(j) = right.row(src);
    }
    out.matrix_ = out.left_ * out.values_.asDiagonal() * out.right_;
    return out;
  }

  static LinearEstimator zero(Index n, Index m) {
    return from_factors(Matrix<Scalar>::Zero(n, 0), Vector<Scalar>(0), Matrix<Scalar>::Zero(0, m));
  }

  const Matrix<Scalar>& matrix() const { return matrix_; }
  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }
  const Matrix<Scalar>& left() const { return left_; }
  const Vector<Scalar>& singular_values() const { return values_; }
  const Matrix<Scalar>& right() const { return right_; }
  Scalar max_singular_value() const { return values_.size() == 0 ? Scalar(0) : values_(0); }
  bool is_zero() const { return values_.size() == 0 || values_(0) == Scalar(0); }

  template <typename Derived>
  Vector<Scalar> operator()(const Eigen::MatrixBase<Derived>& y) const {
    return matrix_ * y;
  }

  /// J(y)^T * cotangent; the Jacobian of a linear map is H everywhere.
  template <typename DerivedY, typename DerivedC>
  Vector<Scalar> vjp(const Eigen::MatrixBase<DerivedY>& /*y*/,
                     const Eigen::MatrixBase<DerivedC>& cotangent) const {
    return matrix_.transpose() * cotangent;
  }

 private:
  LinearEstimator() = default;

  Matrix<Scalar> matrix_;
  Matrix<Scalar> left_;
  Vector<Scalar> values_;
  Matrix<Scalar> right_;
};

/// Per-mode shrinkage of an estimator aligned with the SVD of A U.
template <typename Scalar = double>
struct ShrinkageProfile {
  Vector<Scalar> sigma;
  Vector<Scalar> lambda;
  std::optional<Scalar> lambda_star;
};

template <typename Scalar>
Scalar ratio_of(Index a, Index b) {
  return static_cast<Scalar>(a) / static_cast<Scalar>(b);
}

/// Shrinkage factor of the worst-case optimal symmetric denoiser alpha U U^T.
template <typename Scalar = double>
Scalar optimal_robust_alpha(Scalar sigma_c, Scalar sigma_z, Index d, Index n, Scalar eps) {
  require(sigma_c > 0 && sigma_z >= 0 && eps >= 0, ErrorKind::invalid_parameter,
          "optimal_robust_alpha needs sigma_c > 0, sigma_z >= 0, eps >= 0");
  using std::sqrt;
  const Scalar sc2 = sigma_c * sigma_c;
  if (!(sc2 > eps * eps)) return Scalar(0);
  const Scalar ratio = ratio_of<Scalar>(d, n);
  const Scalar noise2 = sigma_z * sigma_z * ratio;
  const Scalar total = sc2 + noise2;
  const Scalar shrink = eps * sigma_c * sigma_z * sqrt(ratio) / sqrt(total - eps * eps);
  return (sc2 - shrink) / total;
}

template <typename Scalar = double>
Scalar jittering_denoiser_alpha(Scalar sigma_c, Scalar sigma_z, Index d, Index n, Scalar sigma_w) {
  require(sigma_c > 0 && sigma_z >= 0 && sigma_w >= 0, ErrorKind::invalid_parameter,
          "jittering_denoiser_alpha needs sigma_c > 0 and non-negative noise scales");
  const Scalar sc2 = sigma_c * sigma_c;
  return sc2 / (sc2 + sigma_z * sigma_z * ratio_of<Scalar>(d, n) +
                sigma_w * sigma_w * static_cast<Scalar>(d));
}

/// Jitter standard deviation whose jittering-optimal denoiser coincides with
/// the worst-case optimal denoiser at radius eps. Requires eps^2 < sigma_c^2.
template <typename Scalar = double>
Scalar jitter_level_for_eps(Scalar sigma_c, Scalar sigma_z, Index d, Index n, Scalar eps) {
  require(sigma_c > 0 && sigma_z >= 0 && eps >= 0, ErrorKind::invalid_parameter,
          "jitter_level_for_eps needs sigma_c > 0, sigma_z >= 0, eps >= 0");
  const Scalar sc2 = sigma_c * sigma_c;
  require(eps * eps < sc2, ErrorKind::out_of_regime,
          "jitter level is only defined for eps^2 < sigma_c^2");
  using std::sqrt;
  const Scalar ratio = ratio_of<Scalar>(d, n);
  const Scalar noise2 = sigma_z * sigma_z * ratio;
  const Scalar numerator =
      eps * eps * noise2 + sigma_z * sqrt(ratio) * sigma_c * eps * sqrt(sc2 - eps * eps + noise2);
  return sqrt(numerator / (static_cast<Scalar>(d) * (sc2 - eps * eps)));
}

template <typename Scalar = double>
LinearEstimator<Scalar> scaled_projection(const SubspaceModel<Scalar>& model, Scalar alpha) {
  const Matrix<Scalar>& u = model.basis();
  return LinearEstimator<Scalar>::from_factors(u, Vector<Scalar>::Constant(model.d(), alpha),
                                               u.transpose());
}

template <typename Scalar = double>
LinearEstimator<Scalar> optimal_robust_denoiser(const SubspaceModel<Scalar>& model,
                                                const NoiseModel<Scalar>& noise, Scalar eps) {
  require(model.n() == noise.m(), ErrorKind::invalid_dimension,
          "denoising requires m = n, got n=" + std::to_string(model.n()) +
              " m=" + std::to_string(noise.m()));
  const Scalar alpha =
      optimal_robust_alpha(model.sigma_c(), noise.sigma_z(), model.d(), model.n(), eps);
  return scaled_projection(model, alpha);
}

/// H = U V diag(shrinkage) W^T for A U = W diag(lambda) V^T.
template <typename Scalar>
LinearEstimator<Scalar> aligned_estimator(const SubspaceModel<Scalar>& model,
                                          const OperatorSvd<Scalar>& svd,
                                          const Vector<Scalar>& shrinkage) {
  return LinearEstimator<Scalar>::from_factors(model.basis() * svd.right, shrinkage,
                                               svd.left.transpose());
}

template <typename Scalar = double>
Vector<Scalar> jittering_shrinkage(const Vector<Scalar>& lambda, Scalar sigma_c, Scalar sigma_z,
                                   Index d, Index m, Scalar sigma_w) {
  const Scalar sc2 = sigma_c * sigma_c;
  const Scalar floor = sigma_z * sigma_z * ratio_of<Scalar>(d, m) +
                       sigma_w * sigma_w * static_cast<Scalar>(d);
  Vector<Scalar> out(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i) {
    const Scalar li = lambda(i);
    const Scalar denom = sc2 * li * li + floor;
    out(i) = (li == Scalar(0) || denom == Scalar(0)) ? Scalar(0) : sc2 * li / denom;
  }
  return out;
}

/// Minimizer of the jittering risk for y = A x + z with jitter w ~ N(0, sigma_w^2 I).
template <typename Scalar = double>
LinearEstimator<Scalar> optimal_jittering_estimator(const SubspaceModel<Scalar>& model,
                                                    const ForwardOperator<Scalar>& op,
                                                    const NoiseModel<Scalar>& noise,
                                                    Scalar sigma_w) {
  check_dimensions(model, op, noise);
  require(model.sigma_c() > 0 && sigma_w >= 0, ErrorKind::invalid_parameter,
          "optimal_jittering_estimator needs sigma_c > 0 and sigma_w >= 0");
  const OperatorSvd<Scalar> svd = op.au_svd(model);
  const Vector<Scalar> shrink = jittering_shrinkage(svd.values, model.sigma_c(), noise.sigma_z(),
                                                     model.d(), noise.m(), sigma_w);
  return aligned_estimator(model, svd, shrink);
}

/// Minimizer of E||H y - x||^2 + reg ||H||_F^2, solved from its normal
/// equations H X = Y^T with X = sigma_c^2/d (AU)(AU)^T + (sigma_z^2/m + reg) I.
template <typename Scalar = double>
LinearEstimator<Scalar> ridge_estimator(const SubspaceModel<Scalar>& model,
                                        const ForwardOperator<Scalar>& op,
                                        const NoiseModel<Scalar>& noise, Scalar reg) {
  check_dimensions(model, op, noise);
  require(reg >= 0, ErrorKind::invalid_parameter, "regularization weight must be >= 0");
  const Scalar signal_var = model.sigma_c() * model.sigma_c() / static_cast<Scalar>(model.d());
  const Matrix<Scalar> au = op.matrix() * model.basis();
  Matrix<Scalar> gram = signal_var * au * au.transpose();
  gram.diagonal().array() += noise.coordinate_variance() + reg;
  const Matrix<Scalar> cross = signal_var * au * model.basis().transpose();  // m x n
  Matrix<Scalar> h_transposed;
  Eigen::LDLT<Matrix<Scalar>> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > Scalar(1e-13) * ldlt.vectorD().maxCoeff()) {
    h_transposed = ldlt.solve(cross);
  } else {
    h_transposed = gram.completeOrthogonalDecomposition().solve(cross);
  }
  return LinearEstimator<Scalar>(h_transposed.transpose());
}

/// Robust-risk objective of the conjectured optimum as a function of the dual
/// variable lambda >= 0. Modes of A U beyond its k singular values count as
/// lambda_i = 0 (each contributes sigma_c^2/d).
template <typename Scalar = double>
Scalar conjectured_lambda_objective(Scalar lambda, Scalar eps, const Vector<Scalar>& lambda_i,
                                    Scalar sigma_c, Scalar sigma_z, Index d, Index m) {
  using std::sqrt;
  const Scalar a = sigma_c * sigma_c / static_cast<Scalar>(d);
  const Scalar b = sigma_z * sigma_z / static_cast<Scalar>(m);
  Scalar total = lambda * eps * eps;
  for (Index i = 0; i < lambda_i.size(); ++i) {
    const Scalar ll = lambda * lambda_i(i) * lambda_i(i);
    const Scalar half_gap = a * (Scalar(1) - ll) / 2;
    // Expanded form of ((1+ll) a/2 + lambda b/2)^2 - ll a^2; every term is >= 0.
    const Scalar radicand =
        half_gap * half_gap + lambda * b * a * (Scalar(1) + ll) / 2 + lambda * lambda * b * b / 4;
    const Scalar root = sqrt(radicand);
    const Scalar linear = half_gap - lambda * b / 2;
    // linear + root, rewritten to avoid cancellation when linear < 0.
    total += linear >= 0 ? linear + root : lambda * a * b / (root - linear);
  }
  total += static_cast<Scalar>(d - lambda_i.size()) * a;
  return total;
}

/// sigma_i = a_i - sqrt(a_i^2 - lambda), the root compatible with sigma_i^2 <= lambda.
template <typename Scalar = double>
Vector<Scalar> conjectured_shrinkage(Scalar lambda, const Vector<Scalar>& lambda_i,
                                     Scalar sigma_c, Scalar sigma_z, Index d, Index m) {
  using std::sqrt;
  const Scalar snr_inv = sigma_z * sigma_z / (sigma_c * sigma_c);
  const Scalar ratio = ratio_of<Scalar>(d, m);
  Vector<Scalar> out(lambda_i.size());
  for (Index i = 0; i < lambda_i.size(); ++i) {
    const Scalar li = lambda_i(i);
    if (li == Scalar(0) || lambda == Scalar(0)) {
      out(i) = 0;
      continue;
    }
    const Scalar a_i = (Scalar(1) + lambda * li * li) / (2 * li) + ratio * lambda / (2 * li) * snr_inv;
    Scalar disc = a_i * a_i - lambda;
    if (disc < 0) {
      require(disc > -Scalar(1e-14) * std::max(Scalar(1), a_i * a_i), ErrorKind::evaluation,
              "negative discriminant in the shrinkage formula");
      disc = 0;
    }
    // a - sqrt(a^2 - lambda) == lambda / (a + sqrt(a^2 - lambda)).
    out(i) = lambda / (a_i + sqrt(disc));
  }
  return out;
}

template <typename Scalar = double>
struct ConjecturedEstimate {
  LinearEstimator<Scalar> estimator;
  ShrinkageProfile<Scalar> profile;
  /// Value of the lambda problem at lambda*, the conjectured optimal robust risk.
  Scalar risk;
};

template <typename Scalar = double>
ConjecturedEstimate<Scalar> conjectured_robust_estimator(const SubspaceModel<Scalar>& model,
                                                         const ForwardOperator<Scalar>& op,
                                                         const NoiseModel<Scalar>& noise,
                                                         Scalar eps,
                                                         Scalar tolerance = Scalar(1e-10)) {
  check_dimensions(model, op, noise);
  require(eps > 0, ErrorKind::invalid_parameter, "conjectured estimator needs eps > 0");
  require(model.sigma_c() > 0, ErrorKind::invalid_parameter, "conjectured estimator needs sigma_c > 0");
  const OperatorSvd<Scalar> svd = op.au_svd(model);
  const Scalar sigma_c = model.sigma_c();
  const Scalar sigma_z = noise.sigma_z();
  const Index d = model.d();
  const Index m = noise.m();

  ScalarProblem<Scalar> problem;
  problem.objective = [&](Scalar lambda) {
    return conjectured_lambda_objective(lambda, eps, svd.values, sigma_c, sigma_z, d, m);
  };
  problem.lower = 0;
  problem.lower_inclusive = true;
  problem.tolerance = tolerance;
  const ScalarResult<Scalar> solved = minimize_convex(problem);
  if (solved.boundary_limit) {
    fail(ErrorKind::degenerate_regime, "lambda problem has its infimum at the open boundary");
  }

  ShrinkageProfile<Scalar> profile;
  profile.lambda = svd.values;
  profile.lambda_star = solved.argmin;
  profile.sigma = conjectured_shrinkage(solved.argmin, svd.values, sigma_c, sigma_z, d, m);
  for (Index i = 0; i < profile.sigma.size(); ++i) {
    require(profile.sigma(i) >= 0 &&
                profile.sigma(i) * profile.sigma(i) <= solved.argmin + Scalar(1e-12),
            ErrorKind::degenerate_regime, "shrinkage violates sigma_i^2 <= lambda*");
  }
  return {aligned_estimator(model, svd, profile.sigma), std::move(profile), solved.value};
}

}  // namespace jitterlab
