#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mlpert/attack.hpp"
#include "mlpert/covariance.hpp"
#include "mlpert/dataset.hpp"
#include "mlpert/perturb.hpp"

namespace mlpert {

/// Mean squared entrywise difference, 1/(T N) * sum (a - b)^2.
double distortion(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Per-attribute mean squared difference (length N).
Eigen::VectorXd attribute_distortion(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Distortion relative to the average attribute variance, Tr(K_X) / N.
/// A single copy at level s scores s / (s + 1) under perfect knowledge.
double normalized_error(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat, const DataModel& model);
double normalized_from_distortion(double distortion, const DataModel& model);

/// Analytic distortion (1/N) Tr(error covariance) for a given trust-level matrix.
double predicted_distortion(const Eigen::MatrixXd& noise_cov, const DataModel& model);

/// Which subsets of copies to examine.
struct AllSubsets {};
struct SampledSubsets {
  std::size_t count = 200;
  std::uint64_t seed = 0;
};
using SubsetSpec = std::variant<AllSubsets, SampledSubsets, std::vector<std::vector<std::size_t>>>;

/// Exhaustive for M <= 12, otherwise 200 random subsets plus every prefix
/// of the ascending levels.
SubsetSpec default_subsets(std::size_t m, std::uint64_t seed = 0);

/// Expands a spec into concrete, sorted, non-empty index subsets over m
/// copies. AllSubsets requires m <= 20.
std::vector<std::vector<std::size_t>> expand_subsets(const SubsetSpec& spec, std::size_t m);

struct GoalVerdict {
  std::vector<std::size_t> subset;
  std::vector<double> levels;
  double joint_distortion = 0.0;
  double min_single_distortion = 0.0;
  double ratio = 1.0;  // joint / min single
  bool pass = false;
};

/// Analytic privacy-goal check: joint distortion of every subset against the
/// best single copy in it. Indices refer to the ascending distinct levels.
/// PASS iff |ratio - 1| <= 1e-9.
std::vector<GoalVerdict> verify_privacy_goal(const TrustLevelSet& levels, const DataModel& model,
                                             NoiseScheme scheme, const SubsetSpec& subsets = AllSubsets{});

inline constexpr double kAnalyticTolerance = 1e-9;
inline constexpr double kEmpiricalTolerance = 0.05;

struct SubsetRecord {
  std::vector<std::size_t> subset;  // indices into the copy list
  std::vector<double> levels;
  double predicted_distortion = 0.0;
  double predicted_min_single = 0.0;
  double empirical_distortion = 0.0;
  double empirical_min_single = 0.0;
  double normalized_error = 0.0;
  Eigen::VectorXd attribute_error;  // per-attribute empirical MSE
  bool analytic_pass = false;
  double empirical_ratio = 1.0;  // empirical joint / empirical best single
  bool empirical_pass = false;
  /// Empirical joint distortion within 5% of the prediction.
  bool consistent = false;
};

struct AttackReport {
  std::string scheme;
  std::string knowledge;
  Eigen::Index tuples = 0;
  Eigen::Index samples = 0;
  std::vector<std::string> attributes;
  std::vector<SubsetRecord> records;

  nlohmann::json to_json() const;
  void write_json(const std::filesystem::path& path) const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Knowledge an adversary holding the given copies works with. Returning the
/// same object for different subsets lets single-copy results be reused.
using KnowledgeProvider =
    std::function<std::shared_ptr<const AdversaryKnowledge>(const std::vector<std::size_t>& subset)>;

/// Runs single and joint LLSE over each subset of `copies`. Predictions and
/// normalization use the true statistics `truth`; the estimates use whatever
/// the provider hands the adversary.
AttackReport build_attack_report(const Dataset& original, const DataModel& truth,
                                 const std::vector<PerturbedCopy>& copies, NoiseScheme scheme,
                                 KnowledgeKind kind, const KnowledgeProvider& provider,
                                 const std::vector<std::vector<std::size_t>>& subsets);
AttackReport build_attack_report(const Dataset& original, const DataModel& truth,
                                 const std::vector<PerturbedCopy>& copies, NoiseScheme scheme,
                                 const AdversaryKnowledge& knowledge,
                                 const std::vector<std::vector<std::size_t>>& subsets);

}  // namespace mlpert
