#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mlpert/covariance.hpp"
#include "mlpert/dataset.hpp"
#include "mlpert/perturb.hpp"

namespace mlpert {

enum class KnowledgeKind { perfect, partial };

std::string to_string(KnowledgeKind kind);
KnowledgeKind parse_knowledge(const std::string& text);

/// What the adversary uses for mu_X and K_X. A partial-knowledge adversary
/// builds `model` from released copies only (see estimate_model).
struct AdversaryKnowledge {
  KnowledgeKind kind = KnowledgeKind::perfect;
  DataModel model;
};

/// Reconstruction of X from a set of copies.
struct LLSEEstimate {
  Eigen::MatrixXd xhat;  // T x N
  std::vector<std::size_t> subset;
  /// Per-copy gains: xhat = mu + sum_i weights(i) * (Y_i - mu).
  Eigen::VectorXd weights;
  Eigen::MatrixXd predicted_error_cov;  // N x N
};

LLSEEstimate llse_single(const PerturbedCopy& copy, const AdversaryKnowledge& knowledge);

/// Joint LLSE over `copies` whose noise covariance is noise_cov (x) K_X.
/// With K_yy = (1 1^T + noise_cov) (x) K_X the estimator collapses to
/// per-copy scalar weights w = (1 1^T + noise_cov)^{-1} 1, and the error
/// covariance to (1 - 1^T w) K_X.
LLSEEstimate llse_joint(std::span<const PerturbedCopy* const> copies, const Eigen::MatrixXd& noise_cov,
                        const AdversaryKnowledge& knowledge);
LLSEEstimate llse_joint(const std::vector<PerturbedCopy>& copies, const Eigen::MatrixXd& noise_cov,
                        const AdversaryKnowledge& knowledge);

/// Same estimator with the MN x MN covariance materialized; kept as an
/// oracle for M * N <= 64.
LLSEEstimate llse_joint_dense(std::span<const PerturbedCopy* const> copies,
                              const Eigen::MatrixXd& noise_cov, const AdversaryKnowledge& knowledge);

/// Scalar combination weights (1 1^T + noise_cov)^{-1} 1.
Eigen::VectorXd joint_weights(const Eigen::MatrixXd& noise_cov);

/// Error covariance of the joint estimate for any trust-level matrix.
Eigen::MatrixXd predict_error_joint(const Eigen::MatrixXd& noise_cov, const DataModel& model);

/// (1 + sum 1/s_i)^{-1} K_X for mutually independent noise; every request
/// counts, repeated levels included.
Eigen::MatrixXd predict_error_independent(std::span<const double> levels, const DataModel& model);
Eigen::MatrixXd predict_error_independent(const TrustLevelSet& levels, const DataModel& model);

/// s_min / (s_min + 1) * Tr(K_X) / N, the distortion of the best single copy.
double predict_error_corner_wave(const TrustLevelSet& levels, const DataModel& model);

/// Noise multiplier matrix the adversary assumes for a set of copies.
Eigen::MatrixXd scheme_noise_matrix(NoiseScheme scheme, std::span<const double> levels);

enum class ModelSource { least_perturbed, pooled };

struct EstimateOptions {
  ModelSource source = ModelSource::least_perturbed;
  /// Use only the first `samples` tuples of each copy; 0 means all.
  Eigen::Index samples = 0;
};

/// mu from the sample mean, K_X from the unbiased sample covariance divided
/// by (1 + s). Never looks at the original data.
DataModel estimate_model(std::span<const PerturbedCopy* const> copies, const EstimateOptions& opts = {});
DataModel estimate_model(const std::vector<PerturbedCopy>& copies, const EstimateOptions& opts = {});

AdversaryKnowledge perfect_knowledge(const DataModel& truth);
AdversaryKnowledge partial_knowledge(std::span<const PerturbedCopy* const> copies,
                                     const EstimateOptions& opts = {});

}  // namespace mlpert
