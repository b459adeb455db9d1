#include "mlpert/covariance.hpp"

#include <algorithm>
#include <numeric>

namespace mlpert {

TrustLevelSet TrustLevelSet::from_request(std::span<const double> levels, ZeroLevel zero) {
  if (levels.empty()) throw Error(Errc::invalid_level, "trust level set is empty");
  for (double s : levels) {
    if (!std::isfinite(s) || s < 0.0 || (s == 0.0 && zero == ZeroLevel::reject)) {
      throw Error(Errc::invalid_level,
                  "perturbation magnitude must be finite and positive, got " + std::to_string(s));
    }
  }

  TrustLevelSet out;
  out.request_.assign(levels.begin(), levels.end());

  std::vector<std::size_t> perm(levels.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return levels[a] < levels[b]; });

  std::vector<double> distinct;
  out.request_to_sorted_.assign(levels.size(), 0);
  for (std::size_t r : perm) {
    if (distinct.empty() || levels[r] != distinct.back()) {
      distinct.push_back(levels[r]);
      out.order_.push_back(r);
    }
    out.request_to_sorted_[r] = distinct.size() - 1;
  }
  out.sorted_ = Eigen::Map<const Eigen::VectorXd>(distinct.data(),
                                                  static_cast<Eigen::Index>(distinct.size()));
  return out;
}

}  // namespace mlpert
