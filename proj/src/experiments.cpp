#include "mlpert/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mlpert/attack.hpp"
#include "mlpert/error.hpp"
#include "mlpert/metrics.hpp"
#include "mlpert/perturb.hpp"
#include "mlpert/rng.hpp"

namespace mlpert {

namespace {

constexpr std::uint64_t kLevelStream = 0x1e7e15;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double joint_normalized(const Dataset& x, const std::vector<PerturbedCopy>& held, NoiseScheme scheme,
                        const AdversaryKnowledge& knowledge, const DataModel& truth) {
  std::vector<double> levels;
  for (const auto& c : held) levels.push_back(c.level);
  const auto est = llse_joint(held, scheme_noise_matrix(scheme, levels), knowledge);
  return normalized_error(x.values, est.xhat, truth);
}

std::size_t least_perturbed(const std::vector<PerturbedCopy>& held) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < held.size(); ++i)
    if (held[i].level < held[best].level) best = i;
  return best;
}

}  // namespace

std::vector<double> random_levels(std::size_t count, double lo, double hi, std::uint64_t seed) {
  if (!(lo > 0.0) || !(hi >= lo)) throw Error(Errc::invalid_level, "level range must satisfy 0 < lo <= hi");
  SeededRng rng(seed, kLevelStream);
  std::vector<double> out(count);
  for (double& s : out) s = lo + (hi - lo) * rng.uniform();
  return out;
}

Experiment1Result run_experiment1(const Experiment1Config& config) {
  if (config.copies == 0) throw Error(Errc::invalid_argument, "experiment 1 needs at least one copy");
  const Dataset data = synthetic_census(config.tuples, derive_seed(config.seed, 1), config.shape);
  const DataModel truth = estimate_data_model(data.values);
  const auto levels = random_levels(config.copies, config.lo, config.hi, config.seed);
  const Eigen::Index n = data.attributes();

  PerturbSession cw = start_session(data, truth, derive_seed(config.seed, 2), NoiseScheme::corner_wave);
  PerturbSession in = start_session(data, truth, derive_seed(config.seed, 3), NoiseScheme::independent);
  std::vector<PerturbedCopy> cw_held, in_held;
  const AdversaryKnowledge perfect = perfect_knowledge(truth);

  Experiment1Result result;
  result.config = config;
  double running_min = std::numeric_limits<double>::infinity();
  double precision = 1.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const TrustLevelSet request = TrustLevelSet::from_request({levels[i]});
    cw_held.push_back(on_demand(cw, request).front());
    in_held.push_back(on_demand(in, request).front());

    Experiment1Row row;
    row.released = i + 1;
    row.level = levels[i];
    row.new_minimum = levels[i] < running_min;
    running_min = std::min(running_min, levels[i]);
    row.running_min = running_min;
    precision += 1.0 / levels[i];
    row.theory_independent = 1.0 / precision;
    row.theory_corner_wave = running_min / (1.0 + running_min);

    row.independent_perfect = joint_normalized(data, in_held, NoiseScheme::independent, perfect, truth);
    row.corner_wave_perfect = joint_normalized(data, cw_held, NoiseScheme::corner_wave, perfect, truth);
    row.corner_wave_min_single =
        normalized_error(data.values, llse_single(cw_held[least_perturbed(cw_held)], perfect).xhat, truth);
    row.independent_min_single =
        normalized_error(data.values, llse_single(in_held[least_perturbed(in_held)], perfect).xhat, truth);

    for (Eigen::Index factor : config.sample_factors) {
      EstimateOptions opts;
      opts.samples = factor * n * n;
      std::vector<const PerturbedCopy*> in_ptrs, cw_ptrs;
      for (const auto& c : in_held) in_ptrs.push_back(&c);
      for (const auto& c : cw_held) cw_ptrs.push_back(&c);
      row.independent_partial.push_back(
          joint_normalized(data, in_held, NoiseScheme::independent, partial_knowledge(in_ptrs, opts), truth));
      row.corner_wave_partial.push_back(
          joint_normalized(data, cw_held, NoiseScheme::corner_wave, partial_knowledge(cw_ptrs, opts), truth));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

void Experiment1Result::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "copies,level,running_min,new_minimum,in_perfect,ours_perfect,ours_min_single,in_min_single";
  for (auto f : config.sample_factors) out << ",in_partial_" << f << "N2";
  for (auto f : config.sample_factors) out << ",ours_partial_" << f << "N2";
  out << ",theory_in,theory_ours\n";
  for (const auto& r : rows) {
    out << r.released << ',' << format_double(r.level) << ',' << format_double(r.running_min) << ','
        << (r.new_minimum ? 1 : 0) << ',' << format_double(r.independent_perfect) << ','
        << format_double(r.corner_wave_perfect) << ',' << format_double(r.corner_wave_min_single) << ','
        << format_double(r.independent_min_single);
    for (double v : r.independent_partial) out << ',' << format_double(v);
    for (double v : r.corner_wave_partial) out << ',' << format_double(v);
    out << ',' << format_double(r.theory_independent) << ',' << format_double(r.theory_corner_wave) << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(Errc::invalid_argument, "slope needs two or more points");
  Eigen::VectorXd lx(static_cast<Eigen::Index>(x.size())), ly(lx.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error(Errc::invalid_argument, "log-log slope needs positive data");
    lx(static_cast<Eigen::Index>(i)) = std::log(x[i]);
    ly(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  const Eigen::VectorXd cx = lx.array() - lx.mean();
  const Eigen::VectorXd cy = ly.array() - ly.mean();
  return cx.dot(cy) / cx.squaredNorm();
}

Experiment2Result run_experiment2(const Experiment2Config& config) {
  if (config.m_list.empty() || config.reps == 0) throw Error(Errc::invalid_argument, "experiment 2 needs M values and reps");
  using clock = std::chrono::steady_clock;
  const Dataset data = synthetic_census(config.tuples, derive_seed(config.seed, 1));
  const DataModel truth = estimate_data_model(data.values);

  Experiment2Result result;
  result.config = config;
  for (std::size_t m : config.m_list) {
    const auto levels = random_levels(m, 0.25, 1.0, derive_seed(config.seed, m));
    for (double f : config.fractions) {
      const auto existing = static_cast<std::size_t>(std::floor(f * static_cast<double>(m)));
      const std::vector<double> old_levels(levels.begin(), levels.begin() + static_cast<std::ptrdiff_t>(existing));
      const std::vector<double> new_levels(levels.begin() + static_cast<std::ptrdiff_t>(existing), levels.end());
      if (new_levels.empty()) continue;
      const TrustLevelSet request = TrustLevelSet::from_request(new_levels);

      auto timed = [&](NoiseScheme scheme) {
        PerturbSession base = start_session(data, truth, derive_seed(config.seed, 7), scheme);
        if (!old_levels.empty()) {
          const TrustLevelSet old_set = TrustLevelSet::from_request(old_levels);
          const auto copies = scheme == NoiseScheme::corner_wave
                                  ? batch_parallel(data, truth, old_set, next_call_seed(base))
                                  : independent_noise(data, truth, old_set, next_call_seed(base));
          record_release(base, copies);
        }
        std::vector<double> seconds;
        for (std::size_t rep = 0; rep <= config.reps; ++rep) {
          PerturbSession s = base;
          const auto t0 = clock::now();
          const auto out = on_demand(s, request);
          const auto t1 = clock::now();
          if (out.size() != new_levels.size()) throw Error(Errc::invalid_argument, "on-demand returned wrong copy count");
          if (rep > 0) seconds.push_back(std::chrono::duration<double>(t1 - t0).count());  // rep 0 is warm-up
        }
        return seconds;
      };

      const auto cw_times = timed(NoiseScheme::corner_wave);
      const auto in_times = timed(NoiseScheme::independent);
      Experiment2Row row;
      row.m = m;
      row.existing = existing;
      row.fraction = f;
      row.mean_seconds = mean(cw_times);
      row.median_seconds = median(cw_times);
      row.per_tuple_ns = row.median_seconds / static_cast<double>(config.tuples) * 1e9;
      row.independent_mean_seconds = mean(in_times);
      row.independent_median_seconds = median(in_times);
      result.rows.push_back(row);
    }
  }

  for (double f : config.fractions) {
    std::vector<double> ms, cost;
    for (const auto& r : result.rows)
      if (r.fraction == f) {
        ms.push_back(static_cast<double>(r.m));
        cost.push_back(r.per_tuple_ns);
      }
    result.slopes.push_back(ms.size() >= 2 ? loglog_slope(ms, cost) : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

double Experiment2Result::max_slope() const {
  double best = -std::numeric_limits<double>::infinity();
  for (double s : slopes)
    if (!std::isnan(s)) best = std::max(best, s);
  return best;
}

void Experiment2Result::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "M,L,fraction,tuples,reps,mean_seconds,median_seconds,per_tuple_ns,in_mean_seconds,in_median_seconds\n";
  for (const auto& r : rows) {
    out << r.m << ',' << r.existing << ',' << format_double(r.fraction) << ',' << config.tuples << ','
        << config.reps << ',' << format_double(r.mean_seconds) << ',' << format_double(r.median_seconds) << ','
        << format_double(r.per_tuple_ns) << ',' << format_double(r.independent_mean_seconds) << ','
        << format_double(r.independent_median_seconds) << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

void Experiment2Result::write_slopes_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "fraction,loglog_slope\n";
  for (std::size_t i = 0; i < slopes.size(); ++i)
    out << format_double(config.fractions[i]) << ',' << format_double(slopes[i]) << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace mlpert
