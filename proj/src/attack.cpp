#include "mlpert/attack.hpp"

#include <algorithm>
#include <limits>

#include "mlpert/error.hpp"

namespace mlpert {

std::string to_string(KnowledgeKind kind) { return kind == KnowledgeKind::perfect ? "perfect" : "partial"; }

KnowledgeKind parse_knowledge(const std::string& text) {
  if (text == "perfect") return KnowledgeKind::perfect;
  if (text == "partial") return KnowledgeKind::partial;
  throw Error(Errc::invalid_argument, "knowledge must be 'perfect' or 'partial', got '" + text + "'");
}

namespace {

void check_copy(const PerturbedCopy& c, const DataModel& model) {
  if (c.values.cols() != model.dimension())
    throw Error(Errc::shape, "copy has " + std::to_string(c.values.cols()) + " attributes, model has " +
                                 std::to_string(model.dimension()));
  if (!(c.level >= 0.0)) throw Error(Errc::invalid_level, "copy has a negative level");
}

std::vector<std::size_t> iota_subset(std::size_t m) {
  std::vector<std::size_t> s(m);
  for (std::size_t i = 0; i < m; ++i) s[i] = i;
  return s;
}

void check_joint_inputs(std::span<const PerturbedCopy* const> copies, const Eigen::MatrixXd& noise_cov,
                        const DataModel& model) {
  if (copies.empty()) throw Error(Errc::shape, "joint estimate needs at least one copy");
  const auto m = static_cast<Eigen::Index>(copies.size());
  if (noise_cov.rows() != m || noise_cov.cols() != m)
    throw Error(Errc::shape, "noise matrix is " + std::to_string(noise_cov.rows()) + "x" +
                                 std::to_string(noise_cov.cols()) + " for " + std::to_string(m) + " copies");
  const double scale = std::max(1.0, noise_cov.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = *copies[static_cast<std::size_t>(i)];
    check_copy(c, model);
    if (c.values.rows() != copies[0]->values.rows())
      throw Error(Errc::shape, "copies disagree on tuple count");
    if (std::abs(noise_cov(i, i) - c.level) > 1e-12 * scale)
      throw Error(Errc::invalid_argument, "noise matrix diagonal does not match the copy levels");
  }
}

}  // namespace

LLSEEstimate llse_single(const PerturbedCopy& copy, const AdversaryKnowledge& knowledge) {
  const DataModel& model = knowledge.model;
  check_copy(copy, model);
  const Eigen::Index n = model.dimension();
  LLSEEstimate est;
  est.subset = {0};
  est.weights = Eigen::VectorXd::Constant(1, 1.0 / (1.0 + copy.level));

  Eigen::MatrixXd gain;
  if (copy.level == 0.0) {
    gain = Eigen::MatrixXd::Identity(n, n);
    est.weights(0) = 1.0;
  } else {
    // K_XY = K_X, K_Y = (1 + s) K_X
    const Eigen::MatrixXd k_y = (1.0 + copy.level) * model.cov;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k_y);
    if (!lu.isInvertible()) throw Error(Errc::singular, "covariance of the perturbed copy is singular");
    gain = lu.solve(model.cov).transpose();
  }
  est.xhat = ((copy.values.rowwise() - model.mu.transpose()) * gain.transpose()).rowwise() +
             model.mu.transpose();
  const Eigen::MatrixXd err = model.cov - gain * model.cov;
  est.predicted_error_cov = (err + err.transpose()) / 2.0;
  return est;
}

Eigen::VectorXd joint_weights(const Eigen::MatrixXd& noise_cov) {
  const Eigen::Index m = noise_cov.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Ones(m, m) + noise_cov;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw Error(Errc::singular, "combined covariance of the copies is singular");
  return lu.solve(Eigen::VectorXd::Ones(m));
}

LLSEEstimate llse_joint(std::span<const PerturbedCopy* const> copies, const Eigen::MatrixXd& noise_cov,
                        const AdversaryKnowledge& knowledge) {
  const DataModel& model = knowledge.model;
  check_joint_inputs(copies, noise_cov, model);
  LLSEEstimate est;
  est.subset = iota_subset(copies.size());
  est.weights = joint_weights(noise_cov);

  const Eigen::RowVectorXd mu = model.mu.transpose();
  est.xhat = Eigen::MatrixXd::Zero(copies[0]->values.rows(), model.dimension());
  for (std::size_t i = 0; i < copies.size(); ++i)
    est.xhat += est.weights(static_cast<Eigen::Index>(i)) * (copies[i]->values.rowwise() - mu);
  est.xhat.rowwise() += mu;
  est.predicted_error_cov = (1.0 - est.weights.sum()) * model.cov;
  return est;
}

LLSEEstimate llse_joint(const std::vector<PerturbedCopy>& copies, const Eigen::MatrixXd& noise_cov,
                        const AdversaryKnowledge& knowledge) {
  std::vector<const PerturbedCopy*> ptrs;
  for (const auto& c : copies) ptrs.push_back(&c);
  return llse_joint(ptrs, noise_cov, knowledge);
}

LLSEEstimate llse_joint_dense(std::span<const PerturbedCopy* const> copies,
                              const Eigen::MatrixXd& noise_cov, const AdversaryKnowledge& knowledge) {
  const DataModel& model = knowledge.model;
  check_joint_inputs(copies, noise_cov, model);
  const Eigen::Index m = static_cast<Eigen::Index>(copies.size());
  const Eigen::Index n = model.dimension();
  if (m * n > 64) throw Error(Errc::invalid_argument, "dense joint estimate is limited to M*N <= 64");

  // K_yy = H K_X H^T + K_zz, K_xy = K_X H^T
  Eigen::MatrixXd k_yy(m * n, m * n), k_xy(n, m * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    k_xy.block(0, i * n, n, n) = model.cov;
    for (Eigen::Index j = 0; j < m; ++j) k_yy.block(i * n, j * n, n, n) = (1.0 + noise_cov(i, j)) * model.cov;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k_yy);
  if (!lu.isInvertible()) throw Error(Errc::singular, "joint covariance of the copies is singular");
  const Eigen::MatrixXd gain = lu.solve(k_xy.transpose()).transpose();  // N x MN

  LLSEEstimate est;
  est.subset = iota_subset(copies.size());
  const Eigen::Index t = copies[0]->values.rows();
  est.xhat.resize(t, n);
  Eigen::VectorXd yy(m * n);
  for (Eigen::Index r = 0; r < t; ++r) {
    for (Eigen::Index i = 0; i < m; ++i)
      yy.segment(i * n, n) = copies[static_cast<std::size_t>(i)]->values.row(r).transpose() - model.mu;
    est.xhat.row(r) = (model.mu + gain * yy).transpose();
  }
  const Eigen::MatrixXd err = model.cov - gain * k_xy.transpose();
  est.predicted_error_cov = (err + err.transpose()) / 2.0;
  est.weights = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
  return est;
}

Eigen::MatrixXd predict_error_joint(const Eigen::MatrixXd& noise_cov, const DataModel& model) {
  return (1.0 - joint_weights(noise_cov).sum()) * model.cov;
}

Eigen::MatrixXd predict_error_independent(std::span<const double> levels, const DataModel& model) {
  if (levels.empty()) throw Error(Errc::invalid_level, "no levels");
  double precision = 1.0;
  for (double s : levels) {
    if (!(s >= 0.0)) throw Error(Errc::invalid_level, "negative level");
    if (s == 0.0) return Eigen::MatrixXd::Zero(model.dimension(), model.dimension());
    precision += 1.0 / s;
  }
  return model.cov / precision;
}

Eigen::MatrixXd predict_error_independent(const TrustLevelSet& levels, const DataModel& model) {
  return predict_error_independent(std::span<const double>(levels.requested()), model);
}

double predict_error_corner_wave(const TrustLevelSet& levels, const DataModel& model) {
  const double s = levels.min_level();
  return s / (s + 1.0) * model.cov.trace() / static_cast<double>(model.dimension());
}

Eigen::MatrixXd scheme_noise_matrix(NoiseScheme scheme, std::span<const double> levels) {
  const auto m = static_cast<Eigen::Index>(levels.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (scheme == NoiseScheme::independent) {
      out(i, i) = levels[static_cast<std::size_t>(i)];
    } else {
      for (Eigen::Index j = 0; j < m; ++j)
        out(i, j) = std::min(levels[static_cast<std::size_t>(i)], levels[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

DataModel estimate_model(std::span<const PerturbedCopy* const> copies, const EstimateOptions& opts) {
  if (copies.empty()) throw Error(Errc::invalid_argument, "no copies to estimate a model from");
  auto one = [&](const PerturbedCopy& c) {
    const Eigen::Index rows =
        opts.samples > 0 ? std::min<Eigen::Index>(opts.samples, c.values.rows()) : c.values.rows();
    if (rows < 2) throw Error(Errc::insufficient_samples, "model estimation needs at least two tuples");
    DataModel m = estimate_data_model(c.values.topRows(rows));
    m.cov /= (1.0 + c.level);
    return m;
  };

  if (opts.source == ModelSource::least_perturbed) {
    const auto* best = *std::min_element(copies.begin(), copies.end(),
                                         [](const auto* a, const auto* b) { return a->level < b->level; });
    return one(*best);
  }
  DataModel pooled = one(*copies[0]);
  for (std::size_t i = 1; i < copies.size(); ++i) {
    const DataModel m = one(*copies[i]);
    pooled.mu += m.mu;
    pooled.cov += m.cov;
  }
  pooled.mu /= static_cast<double>(copies.size());
  pooled.cov /= static_cast<double>(copies.size());
  return pooled;
}

DataModel estimate_model(const std::vector<PerturbedCopy>& copies, const EstimateOptions& opts) {
  std::vector<const PerturbedCopy*> ptrs;
  for (const auto& c : copies) ptrs.push_back(&c);
  return estimate_model(ptrs, opts);
}

AdversaryKnowledge perfect_knowledge(const DataModel& truth) { return {KnowledgeKind::perfect, truth}; }

AdversaryKnowledge partial_knowledge(std::span<const PerturbedCopy* const> copies, const EstimateOptions& opts) {
  return {KnowledgeKind::partial, estimate_model(copies, opts)};
}

}  // namespace mlpert
