#include "mlpert/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlpert/error.hpp"
#include "mlpert/rng.hpp"
#include "mlpert/sampler.hpp"

namespace mlpert {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (values.rows() < 1 || values.cols() < 1)
    throw Error(Errc::shape, "dataset needs at least one tuple and one attribute");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != values.cols())
    throw Error(Errc::shape, "attribute names do not match column count");
  if (!values.allFinite()) throw Error(Errc::invalid_argument, "dataset has non-finite entries");
}

void DataModel::validate() const {
  if (mu.size() < 1) throw Error(Errc::shape, "data model is empty");
  if (cov.rows() != mu.size() || cov.cols() != mu.size())
    throw Error(Errc::shape, "data model covariance does not match mean length");
  if (!mu.allFinite() || !cov.allFinite())
    throw Error(Errc::invalid_argument, "data model has non-finite entries");
  // Symmetry and semidefiniteness are checked by the factorization.
  (void)cholesky(cov);
}

DataModel estimate_data_model(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2)
    throw Error(Errc::insufficient_samples, "at least two tuples are needed to estimate a covariance");
  DataModel m;
  m.mu = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - m.mu.transpose();
  m.cov = (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);
  return m;
}

Dataset parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(Errc::parse, source + ": missing header row");
  for (auto f : split_fields(line)) ds.names.emplace_back(f);

  const std::size_t n = ds.names.size();
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n) {
      throw Error(Errc::parse, source + ": line " + std::to_string(line_no) + " has " +
                                   std::to_string(fields.size()) + " fields, expected " +
                                   std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw Error(Errc::parse, source + ": non-numeric value '" + std::string(f) + "' at line " +
                                     std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                     " (" + ds.names[c] + ")");
      }
      flat.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error(Errc::parse, source + ": no data rows");
  ds.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  return ds;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return parse_csv(in, path.string());
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& values, const std::vector<std::string>& names) {
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  std::string row;
  for (Eigen::Index t = 0; t < values.rows(); ++t) {
    row.clear();
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) row += ',';
      row += format_double(values(t, c));
    }
    row += '\n';
    out << row;
  }
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values,
               const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  write_csv(out, values, names);
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

DataModel read_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto cov = j.at("cov").get<std::vector<std::vector<double>>>();
    DataModel m;
    m.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    m.cov.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(mu.size()));
    for (std::size_t i = 0; i < cov.size(); ++i) {
      if (cov[i].size() != mu.size()) throw Error(Errc::shape, "model covariance row length mismatch");
      for (std::size_t k = 0; k < mu.size(); ++k)
        m.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cov[i][k];
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
}

void write_model_json(const std::filesystem::path& path, const DataModel& model) {
  nlohmann::json j;
  j["mu"] = std::vector<double>(model.mu.data(), model.mu.data() + model.mu.size());
  auto& cov = j["cov"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.cov.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(model.cov.cols()));
    for (Eigen::Index k = 0; k < model.cov.cols(); ++k) row[static_cast<std::size_t>(k)] = model.cov(i, k);
    cov.push_back(row);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

// Keeps data streams apart from noise streams drawn with the same seed.
constexpr std::uint64_t kDataLabel = 0xda7a;

}  // namespace

Dataset gaussian_dataset(const DataModel& model, Eigen::Index tuples, std::uint64_t seed) {
  model.validate();
  const Eigen::MatrixXd l = cholesky(model.cov).lower;
  const Eigen::Index n = model.dimension();
  const std::uint64_t data_seed = derive_seed(seed, kDataLabel);
  Dataset ds;
  ds.values.resize(tuples, n);
  Eigen::VectorXd g(n);
  for (Eigen::Index t = 0; t < tuples; ++t) {
    SeededRng rng(data_seed, static_cast<std::uint64_t>(t));
    for (Eigen::Index k = 0; k < n; ++k) g(k) = rng.normal();
    ds.values.row(t) = (model.mu + l * g).transpose();
  }
  for (Eigen::Index k = 0; k < n; ++k) ds.names.push_back("x" + std::to_string(k + 1));
  return ds;
}

Dataset synthetic_census(Eigen::Index tuples, std::uint64_t seed, SyntheticShape shape) {
  if (tuples < 2) throw Error(Errc::invalid_argument, "synthetic data needs at least two tuples");
  const double means[2] = {50.06, 16.57};
  const double vars[2] = {303.03, 219.92};
  const std::uint64_t data_seed = derive_seed(seed, kDataLabel);
  Dataset ds;
  ds.names = {"Age", "Income"};
  ds.values.resize(tuples, 2);
  for (Eigen::Index t = 0; t < tuples; ++t) {
    SeededRng rng(data_seed, static_cast<std::uint64_t>(t));
    for (int k = 0; k < 2; ++k) {
      const double g = rng.normal();
      if (shape == SyntheticShape::lognormal) {
        const double s2 = std::log1p(vars[k] / (means[k] * means[k]));
        ds.values(t, k) = std::exp(std::log(means[k]) - 0.5 * s2 + std::sqrt(s2) * g);
      } else {
        ds.values(t, k) = means[k] + std::sqrt(vars[k]) * g;
      }
    }
  }
  for (int k = 0; k < 2; ++k) {
    auto col = ds.values.col(k);
    const double m = col.mean();
    const double v = (col.array() - m).square().sum() / static_cast<double>(tuples - 1);
    col = ((col.array() - m) * std::sqrt(vars[k] / v) + means[k]).matrix();
  }
  return ds;
}

}  // namespace mlpert
