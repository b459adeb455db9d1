#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mlpert {

/// T x N numeric table: one row per tuple, one column per attribute.
struct Dataset {
  Eigen::MatrixXd values;
  std::vector<std::string> names;

  Eigen::Index tuples() const { return values.rows(); }
  Eigen::Index attributes() const { return values.cols(); }
  void validate() const;
};

/// First- and second-order statistics of the original data.
struct DataModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;

  Eigen::Index dimension() const { return mu.size(); }
  void validate() const;
};

/// Sample mean and unbiased sample covariance of the rows.
DataModel estimate_data_model(const Eigen::MatrixXd& rows);

Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Eigen::MatrixXd& values, const std::vector<std::string>& names);
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values,
               const std::vector<std::string>& names);

/// Shortest text that is guaranteed to round-trip: 17 significant digits.
std::string format_double(double x);

DataModel read_model_json(const std::filesystem::path& path);
void write_model_json(const std::filesystem::path& path, const DataModel& model);

enum class SyntheticShape { gaussian, lognormal };

/// Two-attribute stand-in for the Age/Income census extract: columns are
/// rescaled so the sample means are exactly 50.06 / 16.57 and the unbiased
/// sample variances exactly 303.03 / 219.92.
Dataset synthetic_census(Eigen::Index tuples, std::uint64_t seed,
                         SyntheticShape shape = SyntheticShape::gaussian);

/// Gaussian tuples with the given statistics (no moment matching).
Dataset gaussian_dataset(const DataModel& model, Eigen::Index tuples, std::uint64_t seed);

}  // namespace mlpert
