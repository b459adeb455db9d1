#pragma once

// Corner-wave trust-level covariance: for sorted perturbation magnitudes
// s_1 < s_2 < ... < s_M the M x M multiplier matrix has entries
// Sigma(i, j) = s_min(i, j), and the full noise covariance is Sigma (x) K_X.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mlpert/error.hpp"

namespace mlpert {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Whether a zero perturbation magnitude (an unperturbed release) is accepted.
enum class ZeroLevel { reject, allow_smallest };

/// Perturbation magnitudes in the order they were requested, plus their
/// deduplicated ascending arrangement. Equal requests share one sorted slot
/// and therefore one noise realization.
class TrustLevelSet {
 public:
  TrustLevelSet() = default;

  static TrustLevelSet from_request(std::span<const double> levels,
                                    ZeroLevel zero = ZeroLevel::reject);
  static TrustLevelSet from_request(std::initializer_list<double> levels,
                                    ZeroLevel zero = ZeroLevel::reject) {
    return from_request(std::span<const double>(levels.begin(), levels.size()), zero);
  }

  /// Number of distinct levels (M).
  std::size_t size() const { return static_cast<std::size_t>(sorted_.size()); }
  std::size_t request_count() const { return request_.size(); }

  /// Distinct levels, strictly increasing.
  const Eigen::VectorXd& sorted() const { return sorted_; }
  /// Levels in request order (duplicates kept).
  const std::vector<double>& requested() const { return request_; }
  /// Sorted slot that serves request `r`.
  std::size_t sorted_index(std::size_t r) const { return request_to_sorted_[r]; }
  const std::vector<std::size_t>& request_to_sorted() const { return request_to_sorted_; }
  /// First request index served by each sorted slot.
  const std::vector<std::size_t>& order() const { return order_; }

  double min_level() const { return sorted_(0); }

 private:
  Eigen::VectorXd sorted_;
  std::vector<double> request_;
  std::vector<std::size_t> request_to_sorted_;
  std::vector<std::size_t> order_;
};

namespace detail {

template <typename Derived>
void require_increasing(const Eigen::MatrixBase<Derived>& s, bool strict, const char* who) {
  if (s.size() == 0) throw Error(Errc::invalid_level, std::string(who) + ": no levels");
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!std::isfinite(static_cast<double>(s(i))) || s(i) < 0)
      throw Error(Errc::invalid_level, std::string(who) + ": level must be finite and >= 0");
  }
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (s(i) == s(i - 1) && strict)
      throw Error(Errc::duplicate_level, std::string(who) + ": adjacent levels are equal");
    if (s(i) < s(i - 1))
      throw Error(Errc::ordering, std::string(who) + ": levels must be increasing");
  }
}

}  // namespace detail

/// Sigma(i, j) = s(min(i, j)) over ascending levels.
template <typename Derived>
Matrix<typename Derived::Scalar> corner_wave_matrix(const Eigen::MatrixBase<Derived>& sorted) {
  using Scalar = typename Derived::Scalar;
  detail::require_increasing(sorted, false, "corner_wave_matrix");
  const Eigen::Index m = sorted.size();
  Matrix<Scalar> sigma(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) sigma(i, j) = sorted(std::min(i, j));
  return sigma;
}

inline Eigen::MatrixXd build_corner_wave(const TrustLevelSet& levels) {
  return corner_wave_matrix(levels.sorted());
}

/// Closed-form lower factor L = U * diag(v) with U the all-ones lower
/// triangle and v = [s_1, s_2 - s_1, ..., s_M - s_{M-1}]^(1/2).
template <typename Derived>
Matrix<typename Derived::Scalar> corner_wave_cholesky(const Eigen::MatrixBase<Derived>& sorted) {
  using Scalar = typename Derived::Scalar;
  detail::require_increasing(sorted, true, "corner_wave_cholesky");
  const Eigen::Index m = sorted.size();
  Matrix<Scalar> l = Matrix<Scalar>::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    using std::sqrt;
    const Scalar step = sqrt(j == 0 ? sorted(0) : Scalar(sorted(j) - sorted(j - 1)));
    l.col(j).tail(m - j).setConstant(step);
  }
  return l;
}

inline Eigen::MatrixXd corner_wave_cholesky(const TrustLevelSet& levels) {
  return corner_wave_cholesky(levels.sorted());
}

/// Explicit tridiagonal inverse. With d_i = 1 / (s_{i+1} - s_i):
///   (0,0) = 1/s_1 + d_1,  (i,i) = d_{i-1} + d_i,  (M-1,M-1) = d_{M-1},
///   (i,i+1) = (i+1,i) = -d_i.
/// Equivalent to scaling the c_i = s_1 * d_i coefficient form by 1/s_1.
template <typename Derived>
Matrix<typename Derived::Scalar> corner_wave_inverse(const Eigen::MatrixBase<Derived>& sorted) {
  using Scalar = typename Derived::Scalar;
  detail::require_increasing(sorted, true, "corner_wave_inverse");
  if (sorted(0) == Scalar(0))
    throw Error(Errc::singular, "corner_wave_inverse: smallest level is zero");
  const Eigen::Index m = sorted.size();
  Matrix<Scalar> inv = Matrix<Scalar>::Zero(m, m);
  inv(0, 0) = Scalar(1) / sorted(0);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const Scalar d = Scalar(1) / (sorted(i + 1) - sorted(i));
    inv(i, i) += d;
    inv(i + 1, i + 1) += d;
    inv(i, i + 1) = -d;
    inv(i + 1, i) = -d;
  }
  return inv;
}

inline Eigen::MatrixXd corner_wave_inverse(const TrustLevelSet& levels) {
  return corner_wave_inverse(levels.sorted());
}

/// Independent-noise baseline: diag(s).
template <typename Derived>
Matrix<typename Derived::Scalar> diagonal_levels_matrix(const Eigen::MatrixBase<Derived>& levels) {
  return levels.asDiagonal();
}

/// Rows and columns `idx` of a square matrix, in the given order.
template <typename Derived>
Matrix<typename Derived::Scalar> principal_submatrix(const Eigen::MatrixBase<Derived>& a,
                                                     std::span<const std::size_t> idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix<typename Derived::Scalar> sub(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < k; ++i)
      sub(i, j) = a(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(idx[j]));
  return sub;
}

/// True when every entry right of and below (i,i) equals (i,i), up to `tol`.
template <typename Derived>
bool is_corner_wave(const Eigen::MatrixBase<Derived>& a, double tol = 0.0) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i; j < a.cols(); ++j) {
      if (std::abs(static_cast<double>(a(i, j) - a(i, i))) > tol) return false;
      if (std::abs(static_cast<double>(a(j, i) - a(i, i))) > tol) return false;
    }
  }
  return true;
}

}  // namespace mlpert
