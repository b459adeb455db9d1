#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mlpert/covariance.hpp"
#include "mlpert/dataset.hpp"

namespace mlpert {

enum class NoiseScheme { corner_wave, independent };

std::string to_string(NoiseScheme scheme);
NoiseScheme parse_noise_scheme(const std::string& text);

/// One released copy Y = X + Z. `noise` holds Y - X as evaluated in double
/// precision, so recomputing Y - X reproduces it bit for bit.
struct PerturbedCopy {
  double level = 0.0;
  Eigen::MatrixXd values;
  Eigen::MatrixXd noise;
};

struct GenerationOptions {
  /// Tuples processed per block; bounds the temporaries to O(M * block * N).
  Eigen::Index block = 1024;
};

/// All levels at once: per tuple zz ~ N(0, Sigma (x) K_X) through the
/// closed-form corner-wave factor. Copies come back in request order.
std::vector<PerturbedCopy> batch_parallel(const Dataset& data, const DataModel& model,
                                          const TrustLevelSet& levels, std::uint64_t seed,
                                          const GenerationOptions& opts = {});

/// Z_1 first, then independent increments with variance (s_i - s_{i-1}) K_X.
/// Consumes the same per-tuple normals as batch_parallel.
std::vector<PerturbedCopy> batch_sequential(const Dataset& data, const DataModel& model,
                                            const TrustLevelSet& levels, std::uint64_t seed);

/// Baseline: every requested copy gets its own independent N(0, s_i K_X) noise.
std::vector<PerturbedCopy> independent_noise(const Dataset& data, const DataModel& model,
                                             const TrustLevelSet& levels, std::uint64_t seed,
                                             const GenerationOptions& opts = {});

struct ReleasedNoise {
  double level = 0.0;
  Eigen::MatrixXd noise;  // T x N
};

/// Owner-side state needed to keep later releases consistent with earlier ones.
struct PerturbSession {
  Dataset data;
  DataModel model;
  std::uint64_t seed = 0;
  NoiseScheme scheme = NoiseScheme::corner_wave;
  /// Completed generation calls; each call draws from its own derived seed.
  std::uint64_t epoch = 0;
  /// Distinct levels in release order.
  std::vector<ReleasedNoise> released;

  std::vector<double> levels() const;
  PerturbedCopy copy(std::size_t i) const;
  /// Index of an already released level, or -1.
  std::ptrdiff_t find(double level) const;
  void validate() const;
};

PerturbSession start_session(Dataset data, DataModel model, std::uint64_t seed,
                             NoiseScheme scheme = NoiseScheme::corner_wave);

/// Seed used by the session's next generation call.
std::uint64_t next_call_seed(const PerturbSession& session);

/// Releases copies for `levels` conditioned on every realization already in
/// the session (corner-wave scheme), or independently (independent scheme).
/// Levels already released are served from stored noise. Appends new
/// realizations and returns copies in request order.
std::vector<PerturbedCopy> on_demand(PerturbSession& session, const TrustLevelSet& levels,
                                     const GenerationOptions& opts = {});

/// Records batch output into a session (distinct levels only).
void record_release(PerturbSession& session, const std::vector<PerturbedCopy>& copies);

/// Cross-level conditioning at the multiplier level: coefficients A with
/// E[new | old] = old * A^T (per attribute), and the conditional multiplier
/// covariance. `old_levels` in release order, `new_levels` distinct.
struct LevelConditioning {
  Eigen::MatrixXd coef;  // new x old
  Eigen::MatrixXd cov;   // new x new
};
LevelConditioning condition_levels(const std::vector<double>& old_levels,
                                   const std::vector<double>& new_levels);

}  // namespace mlpert
