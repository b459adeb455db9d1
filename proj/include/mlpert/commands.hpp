#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlpert/attack.hpp"
#include "mlpert/dataset.hpp"
#include "mlpert/experiments.hpp"
#include "mlpert/metrics.hpp"

namespace mlpert {

enum class GenerationMode { parallel, sequential, ondemand, independent };

GenerationMode parse_generation_mode(const std::string& text);

struct RandomLevelSpec {
  std::size_t count = 0;
  double lo = 0.25;
  double hi = 1.0;
};

struct GenerateConfig {
  std::optional<std::filesystem::path> input;
  /// Generate the synthetic two-attribute dataset instead of reading input.
  std::optional<Eigen::Index> synthetic_tuples;
  SyntheticShape synthetic_shape = SyntheticShape::gaussian;
  std::vector<double> levels;
  std::optional<RandomLevelSpec> random_levels;
  GenerationMode mode = GenerationMode::parallel;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> model_file;
  bool estimate = false;

  void validate() const;
};

struct GeneratedLevel {
  double level = 0.0;
  double predicted_normalized = 0.0;  // s / (s + 1)
  std::filesystem::path file;
};

/// Writes copy_<level>.csv per requested level plus the session files.
std::vector<GeneratedLevel> cmd_generate(const GenerateConfig& config, std::ostream& log);

struct AttackConfig {
  std::filesystem::path session;
  /// Empty means every subset (sampled above 12 copies); otherwise one
  /// 1-based subset of released copies.
  std::vector<std::size_t> subset;
  KnowledgeKind knowledge = KnowledgeKind::perfect;
  /// Tuples visible to a partial-knowledge adversary; 0 means 100 N^2.
  Eigen::Index samples = 0;
  ModelSource source = ModelSource::least_perturbed;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

AttackReport cmd_attack(const AttackConfig& config, std::ostream& log);

Experiment1Result cmd_experiment1(const Experiment1Config& config, const std::filesystem::path& out,
                                  std::ostream& log);
Experiment2Result cmd_experiment2(const Experiment2Config& config, const std::filesystem::path& out,
                                  std::ostream& log);

/// Comma separated doubles, e.g. "1,4,0.25".
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::size_t> parse_index_list(const std::string& text);

/// Process exit code for an error class: 2 validation, 3 IO, 4 numerical.
int exit_code_for(ErrorClass cls);

}  // namespace mlpert
