#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "jitterlab/errors.hpp"
#include "jitterlab/rng.hpp"

namespace jitterlab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Signals x = U c with c ~ N(0, sigma_c^2 / d I) and U an n x d orthonormal basis.
template <typename Scalar = double>
class SubspaceModel {
 public:
  SubspaceModel(Matrix<Scalar> basis, Scalar sigma_c)
      : basis_(std::move(basis)), sigma_c_(sigma_c) {
    require(basis_.cols() >= 1 && basis_.rows() >= basis_.cols(), ErrorKind::invalid_dimension,
            "subspace basis must satisfy 1 <= d <= n");
    require(sigma_c_ >= 0 && std::isfinite(static_cast<double>(sigma_c_)),
            ErrorKind::invalid_parameter, "sigma_c must be finite and non-negative");
    const Matrix<Scalar> gram = basis_.transpose() * basis_;
    const Scalar defect =
        (gram - Matrix<Scalar>::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
    require(defect <= Scalar(1e-10), ErrorKind::invalid_parameter,
            "subspace basis columns are not orthonormal");
  }

  Index n() const { return basis_.rows(); }
  Index d() const { return basis_.cols(); }
  const Matrix<Scalar>& basis() const { return basis_; }
  Scalar sigma_c() const { return sigma_c_; }
  /// Standard deviation of each latent coefficient.
  Scalar latent_std() const { return sigma_c_ / std::sqrt(static_cast<Scalar>(d())); }

  /// U U^T, the orthogonal projector onto the signal subspace.
  Matrix<Scalar> projector() const { return basis_ * basis_.transpose(); }

 private:
  Matrix<Scalar> basis_;
  Scalar sigma_c_;
};

/// Measurement noise z ~ N(0, sigma_z^2 / m I). Denoising is the m = n case.
template <typename Scalar = double>
class NoiseModel {
 public:
  NoiseModel(Index m, Scalar sigma_z) : m_(m), sigma_z_(sigma_z) {
    require(m_ >= 1, ErrorKind::invalid_dimension, "noise dimension m must be >= 1");
    require(sigma_z_ >= 0 && std::isfinite(static_cast<double>(sigma_z_)),
            ErrorKind::invalid_parameter, "sigma_z must be finite and non-negative");
  }

  Index m() const { return m_; }
  Scalar sigma_z() const { return sigma_z_; }
  Scalar coordinate_std() const { return sigma_z_ / std::sqrt(static_cast<Scalar>(m_)); }
  Scalar coordinate_variance() const { return sigma_z_ * sigma_z_ / static_cast<Scalar>(m_); }

 private:
  Index m_;
  Scalar sigma_z_;
};

/// Thin SVD of A U = left * diag(values) * right^T with left m x k, right d x k
/// and values non-increasing.
template <typename Scalar = double>
struct OperatorSvd {
  Matrix<Scalar> left;
  Vector<Scalar> values;
  Matrix<Scalar> right;

  Index rank_bound() const { return values.size(); }
  Matrix<Scalar> reconstruct() const { return left * values.asDiagonal() * right.transpose(); }
};

template <typename Scalar>
OperatorSvd<Scalar> thin_svd_of(const Matrix<Scalar>& au) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(au, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Measurement matrix A (m x n). The SVD of A U can be bound for one subspace
/// model; au_svd() recomputes it for any other basis.
template <typename Scalar = double>
class ForwardOperator {
 public:
  explicit ForwardOperator(Matrix<Scalar> matrix) : matrix_(std::move(matrix)) {
    require(matrix_.rows() >= 1 && matrix_.cols() >= 1, ErrorKind::invalid_dimension,
            "forward operator must be non-empty");
  }

  ForwardOperator(Matrix<Scalar> matrix, const SubspaceModel<Scalar>& model)
      : ForwardOperator(std::move(matrix)) {
    bind(model);
  }

  const Matrix<Scalar>& matrix() const { return matrix_; }
  Index m() const { return matrix_.rows(); }
  Index n() const { return matrix_.cols(); }

  void bind(const SubspaceModel<Scalar>& model) {
    check_compatible(model);
    bound_basis_ = model.basis();
    bound_svd_ = thin_svd_of<Scalar>(matrix_ * model.basis());
  }

  bool is_bound() const { return bound_svd_.has_value(); }

  OperatorSvd<Scalar> au_svd(const SubspaceModel<Scalar>& model) const {
    check_compatible(model);
    if (bound_svd_ && bound_basis_.rows() == model.n() && bound_basis_.cols() == model.d() &&
        bound_basis_ == model.basis()) {
      return *bound_svd_;
    }
    return thin_svd_of<Scalar>(matrix_ * model.basis());
  }

  void check_compatible(const SubspaceModel<Scalar>& model) const {
    require(matrix_.cols() == model.n(), ErrorKind::invalid_dimension,
            "forward operator has " + std::to_string(matrix_.cols()) +
                " columns but the signal dimension is " + std::to_string(model.n()));
  }

 private:
  Matrix<Scalar> matrix_;
  Matrix<Scalar> bound_basis_;
  std::optional<OperatorSvd<Scalar>> bound_svd_;
};

template <typename Scalar = double>
struct Sample {
  Vector<Scalar> x;
  Vector<Scalar> y;
  Vector<Scalar> c;
  Vector<Scalar> z;
};

/// Diagonal spectra used for the inverse-problem experiments.
struct Spectrum {
  enum class Kind { identity, linear_decay, geometric };
  Kind kind = Kind::identity;
  double ratio = 1.0;

  static Spectrum identity() { return {Kind::identity, 1.0}; }
  static Spectrum linear_decay() { return {Kind::linear_decay, 1.0}; }
  static Spectrum geometric(double ratio) { return {Kind::geometric, ratio}; }

  /// Accepts "identity", "linear-decay", "geometric:<r>" and "geometric(<r>)".
  static Spectrum parse(std::string_view text) {
    if (text == "identity") return identity();
    if (text == "linear-decay") return linear_decay();
    if (text.starts_with("geometric")) {
      std::string rest(text.substr(9));
      if (!rest.empty() && (rest.front() == ':' || rest.front() == '(')) rest.erase(0, 1);
      if (!rest.empty() && rest.back() == ')') rest.pop_back();
      if (rest.empty()) return geometric(0.7);
      std::size_t used = 0;
      double r = 0;
      try {
        r = std::stod(rest, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == rest.size(), ErrorKind::invalid_parameter,
              "cannot parse geometric ratio '" + rest + "'");
      return geometric(r);
    }
    fail(ErrorKind::invalid_parameter, "unknown operator spectrum '" + std::string(text) + "'");
  }

  std::string name() const {
    switch (kind) {
      case Kind::identity: return "identity";
      case Kind::linear_decay: return "linear-decay";
      case Kind::geometric: return "geometric:" + std::to_string(ratio);
    }
    return "identity";
  }
};

/// Orthonormalizes a seeded standard-Gaussian n x d matrix with Householder QR.
/// Column signs are fixed so that R has a positive diagonal.
template <typename Scalar = double>
SubspaceModel<Scalar> make_subspace(Index n, Index d, Scalar sigma_c, std::uint64_t seed) {
  require(d >= 1 && d <= n, ErrorKind::invalid_dimension,
          "subspace needs 1 <= d <= n, got n=" + std::to_string(n) + " d=" + std::to_string(d));
  Matrix<Scalar> gaussian(n, d);
  for (Index j = 0; j < d; ++j) {
    RandomStream stream(seed, streams::basis, static_cast<std::uint64_t>(j));
    gaussian.col(j) = stream.normal_vector<Scalar>(n);
  }
  Eigen::HouseholderQR<Matrix<Scalar>> qr(gaussian);
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(n, d);
  const Matrix<Scalar> r = qr.matrixQR().topRows(d).template triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return SubspaceModel<Scalar>(std::move(q), sigma_c);
}

template <typename Scalar = double>
Vector<Scalar> diagonal_spectrum(Index n, const Spectrum& spectrum) {
  require(n >= 1, ErrorKind::invalid_dimension, "operator dimension must be >= 1");
  Vector<Scalar> diag(n);
  switch (spectrum.kind) {
    case Spectrum::Kind::identity:
      diag.setOnes();
      break;
    case Spectrum::Kind::linear_decay:
      // Descending i/n: coordinate 0 gets n/n, the last coordinate gets 1/n.
      for (Index i = 0; i < n; ++i) diag(i) = static_cast<Scalar>(n - i) / static_cast<Scalar>(n);
      break;
    case Spectrum::Kind::geometric:
      require(spectrum.ratio > 0 && spectrum.ratio <= 1, ErrorKind::invalid_parameter,
              "geometric ratio must lie in (0, 1]");
      for (Index i = 0; i < n; ++i) {
        diag(i) = static_cast<Scalar>(std::pow(spectrum.ratio, static_cast<double>(i + 1)));
      }
      break;
  }
  return diag;
}

template <typename Scalar = double>
ForwardOperator<Scalar> make_diagonal_operator(Index n, const Spectrum& spectrum) {
  return ForwardOperator<Scalar>(diagonal_spectrum<Scalar>(n, spectrum).asDiagonal().toDenseMatrix());
}

template <typename Scalar>
void check_dimensions(const SubspaceModel<Scalar>& model, const ForwardOperator<Scalar>& op,
                      const NoiseModel<Scalar>& noise) {
  op.check_compatible(model);
  require(op.m() == noise.m(), ErrorKind::invalid_dimension,
          "forward operator has " + std::to_string(op.m()) +
              " rows but the noise dimension is " + std::to_string(noise.m()));
}

/// One draw addressed by (seed, stream, index): the latent coefficients come
/// first, then the noise.
template <typename Scalar>
Sample<Scalar> draw_sample(const SubspaceModel<Scalar>& model, const ForwardOperator<Scalar>& op,
                           const NoiseModel<Scalar>& noise, std::uint64_t seed,
                           std::uint64_t stream_tag, std::uint64_t index) {
  RandomStream stream(seed, stream_tag, index);
  Sample<Scalar> s;
  s.c = stream.normal_vector<Scalar>(model.d(), static_cast<double>(model.latent_std()));
  s.z = stream.normal_vector<Scalar>(noise.m(), static_cast<double>(noise.coordinate_std()));
  s.x = model.basis() * s.c;
  s.y = op.matrix() * s.x + s.z;
  return s;
}

template <typename Scalar = double>
std::vector<Sample<Scalar>> sample_pairs(const SubspaceModel<Scalar>& model,
                                         const ForwardOperator<Scalar>& op,
                                         const NoiseModel<Scalar>& noise, std::size_t count,
                                         std::uint64_t seed) {
  check_dimensions(model, op, noise);
  std::vector<Sample<Scalar>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(draw_sample(model, op, noise, seed, streams::samples, i));
  }
  return out;
}

/// Column-stacked minibatch: X is n x B, Y is m x B.
template <typename Scalar>
struct Batch {
  Matrix<Scalar> x;
  Matrix<Scalar> y;
};

template <typename Scalar>
Batch<Scalar> draw_batch(const SubspaceModel<Scalar>& model, const ForwardOperator<Scalar>& op,
                         const NoiseModel<Scalar>& noise, std::uint64_t seed,
                         std::uint64_t stream_tag, std::uint64_t first_index, Index count) {
  Matrix<Scalar> latent(model.d(), count);
  Matrix<Scalar> z(noise.m(), count);
  const double latent_std = static_cast<double>(model.latent_std());
  const double noise_std = static_cast<double>(noise.coordinate_std());
  for (Index b = 0; b < count; ++b) {
    RandomStream stream(seed, stream_tag, first_index + static_cast<std::uint64_t>(b));
    latent.col(b) = stream.normal_vector<Scalar>(model.d(), latent_std);
    z.col(b) = stream.normal_vector<Scalar>(noise.m(), noise_std);
  }
  Batch<Scalar> batch;
  batch.x = model.basis() * latent;
  batch.y = op.matrix() * batch.x + z;
  return batch;
}

}  // namespace jitterlab
