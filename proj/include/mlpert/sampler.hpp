#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

#include "mlpert/covariance.hpp"
#include "mlpert/error.hpp"
#include "mlpert/rng.hpp"

namespace mlpert {

template <typename Scalar>
struct CholeskyFactor {
  Matrix<Scalar> lower;
  /// Diagonal shift applied before factoring; zero unless the input was
  /// semidefinite enough to make the plain factorization fail.
  Scalar jitter = Scalar(0);
  std::string warning;
};

/// Lower Cholesky factor. Semidefinite inputs whose smallest eigenvalue is
/// above -1e-8 * max diagonal are retried once with a 1e-10 * trace/dim
/// diagonal shift; anything more negative is rejected as indefinite.
template <typename Derived>
CholeskyFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& cov) {
  using Scalar = typename Derived::Scalar;
  using Mat = Matrix<Scalar>;
  if (cov.rows() != cov.cols()) throw Error(Errc::shape, "cholesky: matrix is not square");
  const Eigen::Index n = cov.rows();
  CholeskyFactor<Scalar> out;
  if (n == 0) return out;

  const Mat a = cov;
  const double scale = static_cast<double>(a.cwiseAbs().maxCoeff());
  if (!std::isfinite(scale)) throw Error(Errc::not_psd, "cholesky: non-finite entries");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10 * std::max(scale, 1e-300)))
    throw Error(Errc::not_psd, "cholesky: matrix is not symmetric");
  if (scale == 0.0) {
    out.lower = Mat::Zero(n, n);
    return out;
  }

  Eigen::LLT<Mat> llt(a);
  if (llt.info() == Eigen::Success) {
    out.lower = llt.matrixL();
    return out;
  }

  const Scalar max_diag = a.diagonal().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Mat> eig(a, Eigen::EigenvaluesOnly);
  const Scalar min_eig = eig.eigenvalues().minCoeff();
  if (max_diag <= Scalar(0) || min_eig < Scalar(-1e-8) * max_diag)
    throw Error(Errc::not_psd, "cholesky: matrix is indefinite (min eigenvalue " +
                                   std::to_string(static_cast<double>(min_eig)) + ")");

  out.jitter = Scalar(1e-10) * a.trace() / Scalar(n);
  Mat shifted = a;
  shifted.diagonal().array() += out.jitter;
  Eigen::LLT<Mat> retry(shifted);
  if (retry.info() != Eigen::Success)
    throw Error(Errc::not_psd, "cholesky: factorization failed after diagonal jitter");
  out.lower = retry.matrixL();
  out.warning = "semidefinite covariance factored with diagonal jitter " +
                std::to_string(static_cast<double>(out.jitter));
  return out;
}

/// Covariance Sigma (x) Base without materializing the product.
template <typename Scalar>
struct KroneckerCovariance {
  Matrix<Scalar> sigma;  // P x P multipliers
  Matrix<Scalar> base;   // Q x Q base covariance
};

template <typename Scalar>
struct GaussianSpec {
  Vector<Scalar> mean;
  std::variant<Matrix<Scalar>, KroneckerCovariance<Scalar>> cov;

  bool is_kronecker() const { return std::holds_alternative<KroneckerCovariance<Scalar>>(cov); }

  Eigen::Index dimension() const {
    if (const auto* k = std::get_if<KroneckerCovariance<Scalar>>(&cov))
      return k->sigma.rows() * k->base.rows();
    return std::get<Matrix<Scalar>>(cov).rows();
  }

  Matrix<Scalar> dense_covariance() const {
    if (const auto* k = std::get_if<KroneckerCovariance<Scalar>>(&cov)) {
      const Eigen::Index p = k->sigma.rows(), q = k->base.rows();
      Matrix<Scalar> out(p * q, p * q);
      for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < p; ++i)
          out.block(i * q, j * q, q, q) = k->sigma(i, j) * k->base;
      return out;
    }
    return std::get<Matrix<Scalar>>(cov);
  }

  void validate() const {
    if (const auto* k = std::get_if<KroneckerCovariance<Scalar>>(&cov)) {
      if (k->sigma.rows() != k->sigma.cols() || k->base.rows() != k->base.cols())
        throw Error(Errc::shape, "Kronecker factors must be square");
    } else {
      const auto& d = std::get<Matrix<Scalar>>(cov);
      if (d.rows() != d.cols()) throw Error(Errc::shape, "covariance must be square");
    }
    if (mean.size() != dimension()) throw Error(Errc::shape, "mean length does not match covariance");
  }
};

/// vec(L0 * N * Ls^T) + mean, where `normals` is the Q x P standard-normal
/// matrix (column-major fill). Cost O(P^2 Q + P Q^2).
template <typename DMean, typename DLs, typename DL0, typename DN>
Vector<typename DMean::Scalar> kron_transform(const Eigen::MatrixBase<DMean>& mean,
                                              const Eigen::MatrixBase<DLs>& l_sigma,
                                              const Eigen::MatrixBase<DL0>& l_base,
                                              const Eigen::MatrixBase<DN>& normals) {
  using Scalar = typename DMean::Scalar;
  const Eigen::Index p = l_sigma.rows(), q = l_base.rows();
  if (normals.rows() != q || normals.cols() != p || mean.size() != p * q)
    throw Error(Errc::shape, "kron_transform: dimension mismatch");
  const Matrix<Scalar> z = l_base.template triangularView<Eigen::Lower>() *
                           (normals * l_sigma.transpose().template triangularView<Eigen::Upper>());
  return mean + Eigen::Map<const Vector<Scalar>>(z.data(), p * q);
}

/// One draw from N(mean, Sigma (x) K0) given precomputed lower factors.
template <typename DMean, typename DLs, typename DL0>
Vector<typename DMean::Scalar> sample_kron_gaussian(const Eigen::MatrixBase<DMean>& mean,
                                                    const Eigen::MatrixBase<DLs>& l_sigma,
                                                    const Eigen::MatrixBase<DL0>& l_base,
                                                    SeededRng& rng) {
  using Scalar = typename DMean::Scalar;
  const Eigen::Index p = l_sigma.rows(), q = l_base.rows();
  Matrix<Scalar> normals(q, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < q; ++i) normals(i, j) = Scalar(rng.normal());
  return kron_transform(mean, l_sigma, l_base, normals);
}

template <typename Scalar>
Vector<Scalar> sample_gaussian(const GaussianSpec<Scalar>& spec, SeededRng& rng) {
  spec.validate();
  if (const auto* k = std::get_if<KroneckerCovariance<Scalar>>(&spec.cov)) {
    const auto ls = cholesky(k->sigma);
    const auto l0 = cholesky(k->base);
    return sample_kron_gaussian(spec.mean, ls.lower, l0.lower, rng);
  }
  const auto l = cholesky(std::get<Matrix<Scalar>>(spec.cov));
  const Matrix<Scalar> one = Matrix<Scalar>::Ones(1, 1);
  return sample_kron_gaussian(spec.mean, one, l.lower, rng);
}

enum class Conditioning { exact, pseudo_inverse };

/// Regression coefficients K21 * K11^{-1}. Exact mode rejects singular K11.
template <typename D11, typename D21>
Matrix<typename D11::Scalar> regression_coefficients(const Eigen::MatrixBase<D11>& k11,
                                                     const Eigen::MatrixBase<D21>& k21,
                                                     Conditioning mode = Conditioning::exact) {
  using Scalar = typename D11::Scalar;
  using Mat = Matrix<Scalar>;
  if (k11.rows() != k11.cols() || k21.cols() != k11.rows())
    throw Error(Errc::shape, "conditioning: block dimensions disagree");
  if (k11.rows() == 0) return Mat::Zero(k21.rows(), 0);
  if (mode == Conditioning::pseudo_inverse) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(k11);
    return cod.solve(k21.transpose()).transpose();
  }
  Eigen::FullPivLU<Mat> lu(k11);
  lu.setThreshold(Scalar(1e-12));
  if (!lu.isInvertible())
    throw Error(Errc::singular, "conditioning block is singular; use the pseudo-inverse option");
  return lu.solve(k21.transpose()).transpose();
}

/// Distribution of the trailing block given the leading `lead` coordinates
/// equal `observed`. For a Kronecker spec the split is in whole Q-blocks
/// and the result stays Kronecker-structured.
template <typename Scalar, typename DObs>
GaussianSpec<Scalar> conditional_gaussian(const GaussianSpec<Scalar>& joint, Eigen::Index lead,
                                          const Eigen::MatrixBase<DObs>& observed,
                                          Conditioning mode = Conditioning::exact) {
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;
  joint.validate();
  const Eigen::Index n = joint.dimension();
  if (lead < 0 || lead > n || observed.size() != lead)
    throw Error(Errc::shape, "conditional_gaussian: bad partition");
  const Eigen::Index trail = n - lead;
  const Vec delta = observed - joint.mean.head(lead);

  GaussianSpec<Scalar> out;
  if (const auto* k = std::get_if<KroneckerCovariance<Scalar>>(&joint.cov)) {
    const Eigen::Index q = k->base.rows();
    if (lead % q != 0) throw Error(Errc::shape, "conditional_gaussian: split inside a Kronecker block");
    const Eigen::Index p1 = lead / q, p2 = k->sigma.rows() - p1;
    const Mat coef = regression_coefficients(k->sigma.topLeftCorner(p1, p1),
                                             k->sigma.bottomLeftCorner(p2, p1), mode);
    // (coef (x) I_Q) vec(D) = vec(D coef^T)
    const Eigen::Map<const Mat> d(delta.data(), q, p1);
    const Mat shift = d * coef.transpose();
    out.mean = joint.mean.tail(trail) + Eigen::Map<const Vec>(shift.data(), trail);
    const Mat s22 = k->sigma.bottomRightCorner(p2, p2) -
                    coef * k->sigma.bottomLeftCorner(p2, p1).transpose();
    out.cov = KroneckerCovariance<Scalar>{Mat((s22 + s22.transpose()) / Scalar(2)), k->base};
    return out;
  }
  const Mat& c = std::get<Mat>(joint.cov);
  const Mat coef = regression_coefficients(c.topLeftCorner(lead, lead),
                                           c.bottomLeftCorner(trail, lead), mode);
  out.mean = joint.mean.tail(trail) + coef * delta;
  const Mat c22 = c.bottomRightCorner(trail, trail) - coef * c.bottomLeftCorner(trail, lead).transpose();
  out.cov = Mat((c22 + c22.transpose()) / Scalar(2));
  return out;
}

}  // namespace mlpert
