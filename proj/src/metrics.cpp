#include "mlpert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "mlpert/error.hpp"
#include "mlpert/rng.hpp"

namespace mlpert {

double distortion(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::shape, "distortion: shapes differ");
  if (a.size() == 0) throw Error(Errc::shape, "distortion: empty matrices");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

Eigen::VectorXd attribute_distortion(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::shape, "distortion: shapes differ");
  return (a - b).colwise().squaredNorm().transpose() / static_cast<double>(a.rows());
}

double normalized_from_distortion(double d, const DataModel& model) {
  const double tr = model.cov.trace();
  if (!(tr > 0.0)) throw Error(Errc::invalid_argument, "normalized error needs a model with positive trace");
  return d * static_cast<double>(model.dimension()) / tr;
}

double normalized_error(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat, const DataModel& model) {
  return normalized_from_distortion(distortion(x, xhat), model);
}

double predicted_distortion(const Eigen::MatrixXd& noise_cov, const DataModel& model) {
  return predict_error_joint(noise_cov, model).trace() / static_cast<double>(model.dimension());
}

SubsetSpec default_subsets(std::size_t m, std::uint64_t seed) {
  if (m <= 12) return AllSubsets{};
  return SampledSubsets{200, seed};
}

std::vector<std::vector<std::size_t>> expand_subsets(const SubsetSpec& spec, std::size_t m) {
  std::vector<std::vector<std::size_t>> out;
  if (std::holds_alternative<AllSubsets>(spec)) {
    if (m > 20) throw Error(Errc::invalid_argument, "exhaustive subsets are limited to 20 copies");
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < m; ++i)
        if (mask & (std::uint64_t{1} << i)) s.push_back(i);
      out.push_back(std::move(s));
    }
    return out;
  }
  if (const auto* sampled = std::get_if<SampledSubsets>(&spec)) {
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t k = 1; k <= m; ++k) {
      std::vector<std::size_t> prefix(k);
      std::iota(prefix.begin(), prefix.end(), std::size_t{0});
      if (seen.insert(prefix).second) out.push_back(prefix);
    }
    SeededRng rng(sampled->seed, 0x5eb5e7);
    std::vector<std::size_t> pool(m);
    for (std::size_t draw = 0; draw < sampled->count; ++draw) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      const std::size_t size = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m));
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m - i));
        std::swap(pool[i], pool[j]);
      }
      std::vector<std::size_t> s(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
      std::sort(s.begin(), s.end());
      if (seen.insert(s).second) out.push_back(std::move(s));
    }
    return out;
  }
  for (auto s : std::get<std::vector<std::vector<std::size_t>>>(spec)) {
    if (s.empty()) continue;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.back() >= m) throw Error(Errc::invalid_argument, "subset index out of range");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<GoalVerdict> verify_privacy_goal(const TrustLevelSet& levels, const DataModel& model,
                                             NoiseScheme scheme, const SubsetSpec& subsets) {
  model.validate();
  const Eigen::VectorXd& s = levels.sorted();
  const double per_attr = model.cov.trace() / static_cast<double>(model.dimension());
  std::vector<GoalVerdict> out;
  for (const auto& subset : expand_subsets(subsets, levels.size())) {
    GoalVerdict v;
    v.subset = subset;
    for (std::size_t i : subset) v.levels.push_back(s(static_cast<Eigen::Index>(i)));
    v.joint_distortion = predicted_distortion(scheme_noise_matrix(scheme, v.levels), model);
    v.min_single_distortion = std::numeric_limits<double>::infinity();
    for (double level : v.levels)
      v.min_single_distortion = std::min(v.min_single_distortion, level / (level + 1.0) * per_attr);
    if (v.min_single_distortion > 0.0) {
      v.ratio = v.joint_distortion / v.min_single_distortion;
      v.pass = std::abs(v.ratio - 1.0) <= kAnalyticTolerance;
    } else {
      v.ratio = v.joint_distortion == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      v.pass = std::abs(v.joint_distortion) <= kAnalyticTolerance * per_attr;
    }
    out.push_back(std::move(v));
  }
  return out;
}

AttackReport build_attack_report(const Dataset& original, const DataModel& truth,
                                 const std::vector<PerturbedCopy>& copies, NoiseScheme scheme,
                                 KnowledgeKind kind, const KnowledgeProvider& provider,
                                 const std::vector<std::vector<std::size_t>>& subsets) {
  const double per_attr = truth.cov.trace() / static_cast<double>(truth.dimension());

  // Single-copy distortions, keyed by the knowledge object that produced them.
  std::map<const AdversaryKnowledge*, std::vector<double>> singles;
  std::vector<std::shared_ptr<const AdversaryKnowledge>> keep_alive;

  AttackReport report;
  report.scheme = to_string(scheme);
  report.knowledge = to_string(kind);
  report.tuples = original.tuples();
  report.attributes = original.names;

  for (const auto& subset : subsets) {
    const auto knowledge = provider(subset);
    auto [it, inserted] = singles.try_emplace(knowledge.get());
    if (inserted) {
      keep_alive.push_back(knowledge);
      it->second.assign(copies.size(), -1.0);
    }
    std::vector<double>& single = it->second;

    SubsetRecord rec;
    rec.subset = subset;
    std::vector<const PerturbedCopy*> held;
    rec.empirical_min_single = std::numeric_limits<double>::infinity();
    rec.predicted_min_single = std::numeric_limits<double>::infinity();
    for (std::size_t i : subset) {
      const PerturbedCopy& c = copies.at(i);
      held.push_back(&c);
      rec.levels.push_back(c.level);
      if (single[i] < 0.0) single[i] = distortion(original.values, llse_single(c, *knowledge).xhat);
      rec.empirical_min_single = std::min(rec.empirical_min_single, single[i]);
      rec.predicted_min_single = std::min(rec.predicted_min_single, c.level / (c.level + 1.0) * per_attr);
    }
    const Eigen::MatrixXd noise_cov = scheme_noise_matrix(scheme, rec.levels);
    const LLSEEstimate est = llse_joint(held, noise_cov, *knowledge);
    rec.predicted_distortion = predicted_distortion(noise_cov, truth);
    rec.empirical_distortion = distortion(original.values, est.xhat);
    rec.attribute_error = attribute_distortion(original.values, est.xhat);
    rec.normalized_error = normalized_from_distortion(rec.empirical_distortion, truth);
    rec.analytic_pass = rec.predicted_min_single > 0.0
                            ? std::abs(rec.predicted_distortion / rec.predicted_min_single - 1.0) <= kAnalyticTolerance
                            : rec.predicted_distortion <= kAnalyticTolerance * per_attr;
    rec.empirical_ratio =
        rec.empirical_min_single > 0.0 ? rec.empirical_distortion / rec.empirical_min_single : 1.0;
    rec.empirical_pass = std::abs(rec.empirical_ratio - 1.0) <= kEmpiricalTolerance;
    rec.consistent = rec.predicted_distortion > 0.0
                         ? std::abs(rec.empirical_distortion / rec.predicted_distortion - 1.0) <= kEmpiricalTolerance
                         : rec.empirical_distortion <= kEmpiricalTolerance * per_attr;
    report.records.push_back(std::move(rec));
  }
  return report;
}

AttackReport build_attack_report(const Dataset& original, const DataModel& truth,
                                 const std::vector<PerturbedCopy>& copies, NoiseScheme scheme,
                                 const AdversaryKnowledge& knowledge,
                                 const std::vector<std::vector<std::size_t>>& subsets) {
  const auto shared = std::make_shared<const AdversaryKnowledge>(knowledge);
  return build_attack_report(original, truth, copies, scheme, knowledge.kind,
                             [&](const std::vector<std::size_t>&) { return shared; }, subsets);
}

nlohmann::json AttackReport::to_json() const {
  nlohmann::json j;
  j["scheme"] = scheme;
  j["knowledge"] = knowledge;
  j["tuples"] = tuples;
  j["samples"] = samples;
  j["attributes"] = attributes;
  auto& recs = j["subsets"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json e;
    std::vector<std::size_t> one_based;
    for (auto i : r.subset) one_based.push_back(i + 1);
    e["copies"] = one_based;
    e["levels"] = r.levels;
    e["predicted_distortion"] = r.predicted_distortion;
    e["predicted_min_single"] = r.predicted_min_single;
    e["empirical_distortion"] = r.empirical_distortion;
    e["empirical_min_single"] = r.empirical_min_single;
    e["normalized_error"] = r.normalized_error;
    e["attribute_error"] = std::vector<double>(r.attribute_error.data(), r.attribute_error.data() + r.attribute_error.size());
    e["analytic_verdict"] = r.analytic_pass ? "PASS" : "FAIL";
    e["empirical_ratio"] = r.empirical_ratio;
    e["empirical_verdict"] = r.empirical_pass ? "PASS" : "FAIL";
    e["consistent"] = r.consistent;
    recs.push_back(std::move(e));
  }
  return j;
}

void AttackReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

void AttackReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "subset,levels,predicted_distortion,empirical_distortion,normalized_error";
  for (const auto& a : attributes) out << ",error_" << a;
  out << ",analytic_verdict,empirical_verdict\n";
  for (const auto& r : records) {
    std::string ids, lv;
    for (std::size_t k = 0; k < r.subset.size(); ++k) {
      ids += (k ? ";" : "") + std::to_string(r.subset[k] + 1);
      lv += (k ? ";" : "") + format_double(r.levels[k]);
    }
    out << ids << ',' << lv << ',' << format_double(r.predicted_distortion) << ','
        << format_double(r.empirical_distortion) << ',' << format_double(r.normalized_error);
    for (Eigen::Index a = 0; a < r.attribute_error.size(); ++a) out << ',' << format_double(r.attribute_error(a));
    out << ',' << (r.analytic_pass ? "PASS" : "FAIL") << ',' << (r.empirical_pass ? "PASS" : "FAIL") << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace mlpert
