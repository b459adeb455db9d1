#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mlpert/dataset.hpp"

namespace mlpert {

/// Attack strength as copies are released one at a time.
struct Experiment1Config {
  std::size_t copies = 30;
  Eigen::Index tuples = 100000;
  double lo = 0.25;
  double hi = 1.0;
  std::uint64_t seed = 1;
  /// Partial-knowledge adversaries see k * N^2 tuples for each k.
  std::vector<Eigen::Index> sample_factors = {100, 200, 300};
  SyntheticShape shape = SyntheticShape::gaussian;
};

struct Experiment1Row {
  std::size_t released = 0;  // copies available after this release
  double level = 0.0;
  double running_min = 0.0;
  bool new_minimum = false;
  double independent_perfect = 0.0;
  double corner_wave_perfect = 0.0;
  double corner_wave_min_single = 0.0;
  double independent_min_single = 0.0;
  std::vector<double> independent_partial;  // one per sample factor
  std::vector<double> corner_wave_partial;
  double theory_independent = 0.0;
  double theory_corner_wave = 0.0;
};

struct Experiment1Result {
  Experiment1Config config;
  std::vector<Experiment1Row> rows;
  void write_csv(const std::filesystem::path& path) const;
};

Experiment1Result run_experiment1(const Experiment1Config& config);

/// On-demand generation cost as the total number of copies grows.
struct Experiment2Config {
  std::vector<std::size_t> m_list = {8, 16, 32, 64};
  Eigen::Index tuples = 100000;
  std::size_t reps = 3;
  std::uint64_t seed = 1;
  /// Existing copies L = floor(f * M) for each f.
  std::vector<double> fractions = {0.25, 0.5, 0.75};
};

struct Experiment2Row {
  std::size_t m = 0;
  std::size_t existing = 0;
  double fraction = 0.0;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  double per_tuple_ns = 0.0;  // median / tuples
  double independent_mean_seconds = 0.0;
  double independent_median_seconds = 0.0;
};

struct Experiment2Result {
  Experiment2Config config;
  std::vector<Experiment2Row> rows;
  /// Least-squares log-log slope of per-tuple cost against M, per fraction.
  std::vector<double> slopes;
  double max_slope() const;
  void write_csv(const std::filesystem::path& path) const;
  void write_slopes_csv(const std::filesystem::path& path) const;
};

Experiment2Result run_experiment2(const Experiment2Config& config);

/// Slope of log(y) against log(x) by ordinary least squares.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// `count` draws from U[lo, hi] on a dedicated stream of `seed`.
std::vector<double> random_levels(std::size_t count, double lo, double hi, std::uint64_t seed);

}  // namespace mlpert
