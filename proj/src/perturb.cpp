#include "mlpert/perturb.hpp"

#include <algorithm>
#include <numeric>

#include "mlpert/error.hpp"
#include "mlpert/rng.hpp"
#include "mlpert/sampler.hpp"

namespace mlpert {

std::string to_string(NoiseScheme scheme) {
  return scheme == NoiseScheme::corner_wave ? "corner_wave" : "independent";
}

NoiseScheme parse_noise_scheme(const std::string& text) {
  if (text == "corner_wave") return NoiseScheme::corner_wave;
  if (text == "independent") return NoiseScheme::independent;
  throw Error(Errc::invalid_argument, "unknown noise scheme '" + text + "'");
}

namespace {

void check_inputs(const Dataset& data, const DataModel& model) {
  data.validate();
  model.validate();
  if (model.dimension() != data.attributes())
    throw Error(Errc::shape, "data model has " + std::to_string(model.dimension()) +
                                 " attributes, dataset has " + std::to_string(data.attributes()));
}

// Per tuple t: Z_t (N x P) = mean_t + L_X * G_t * L_S^T, where G_t is filled
// column-major from stream t and mean_t = [old_1(t) .. old_L(t)] * coef^T.
// Blocks of tuples are stacked so each block costs two GEMMs.
std::vector<Eigen::MatrixXd> kron_noise(Eigen::Index tuples, const Eigen::MatrixXd& l_x,
                                        const Eigen::MatrixXd& l_s, std::uint64_t seed,
                                        Eigen::Index block,
                                        const std::vector<const Eigen::MatrixXd*>& old = {},
                                        const Eigen::MatrixXd& coef = {}) {
  const Eigen::Index n = l_x.rows();
  const Eigen::Index p = l_s.rows();
  const Eigen::Index l = static_cast<Eigen::Index>(old.size());
  block = std::max<Eigen::Index>(block, 1);

  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(p), Eigen::MatrixXd(tuples, n));
  Eigen::MatrixXd g, w, r, stacked_old, mean;
  for (Eigen::Index t0 = 0; t0 < tuples; t0 += block) {
    const Eigen::Index b_count = std::min(block, tuples - t0);
    g.resize(n * b_count, p);
    for (Eigen::Index b = 0; b < b_count; ++b) {
      SeededRng rng(seed, static_cast<std::uint64_t>(t0 + b));
      for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index q = 0; q < n; ++q) g(q + n * b, j) = rng.normal();
    }
    w.noalias() = g * l_s.transpose().triangularView<Eigen::Upper>();
    const Eigen::Map<const Eigen::MatrixXd> w_view(w.data(), n, b_count * p);
    r.noalias() = l_x.triangularView<Eigen::Lower>() * w_view;

    if (l > 0) {
      stacked_old.resize(n * b_count, l);
      for (Eigen::Index k = 0; k < l; ++k)
        for (Eigen::Index b = 0; b < b_count; ++b)
          stacked_old.col(k).segment(n * b, n) = old[static_cast<std::size_t>(k)]->row(t0 + b).transpose();
      mean.noalias() = stacked_old * coef.transpose();
      r += Eigen::Map<const Eigen::MatrixXd>(mean.data(), n, b_count * p);
    }

    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index b = 0; b < b_count; ++b)
        out[static_cast<std::size_t>(j)].row(t0 + b) = r.col(b + b_count * j).transpose();
  }
  return out;
}

PerturbedCopy make_copy(const Dataset& data, double level, const Eigen::MatrixXd& raw_noise) {
  PerturbedCopy c;
  c.level = level;
  c.values = data.values + raw_noise;
  c.noise = c.values - data.values;
  return c;
}

std::vector<PerturbedCopy> to_request_order(const Dataset& data, const TrustLevelSet& levels,
                                            const std::vector<Eigen::MatrixXd>& sorted_noise) {
  std::vector<PerturbedCopy> slots;
  slots.reserve(sorted_noise.size());
  for (std::size_t s = 0; s < sorted_noise.size(); ++s)
    slots.push_back(make_copy(data, levels.sorted()(static_cast<Eigen::Index>(s)), sorted_noise[s]));
  std::vector<PerturbedCopy> out;
  out.reserve(levels.request_count());
  for (std::size_t r = 0; r < levels.request_count(); ++r) out.push_back(slots[levels.sorted_index(r)]);
  return out;
}

Eigen::MatrixXd factor_model(const DataModel& model) { return cholesky(model.cov).lower; }

}  // namespace

std::vector<PerturbedCopy> batch_parallel(const Dataset& data, const DataModel& model,
                                          const TrustLevelSet& levels, std::uint64_t seed,
                                          const GenerationOptions& opts) {
  check_inputs(data, model);
  const auto noise = kron_noise(data.tuples(), factor_model(model), corner_wave_cholesky(levels),
                                seed, opts.block);
  return to_request_order(data, levels, noise);
}

std::vector<PerturbedCopy> batch_sequential(const Dataset& data, const DataModel& model,
                                            const TrustLevelSet& levels, std::uint64_t seed) {
  check_inputs(data, model);
  const Eigen::MatrixXd l_x = factor_model(model);
  const Eigen::Index n = data.attributes();
  const Eigen::Index m = static_cast<Eigen::Index>(levels.size());
  const Eigen::VectorXd& s = levels.sorted();
  for (Eigen::Index i = 1; i < m; ++i)
    if (!(s(i) > s(i - 1))) throw Error(Errc::ordering, "batch_sequential: levels not increasing");

  Eigen::VectorXd step(m);
  for (Eigen::Index i = 0; i < m; ++i) step(i) = std::sqrt(i == 0 ? s(0) : s(i) - s(i - 1));

  std::vector<Eigen::MatrixXd> noise(static_cast<std::size_t>(m), Eigen::MatrixXd(data.tuples(), n));
  Eigen::VectorXd z(n), g(n), inc(n);
  for (Eigen::Index t = 0; t < data.tuples(); ++t) {
    SeededRng rng(seed, static_cast<std::uint64_t>(t));
    z.setZero();
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index q = 0; q < n; ++q) g(q) = rng.normal();
      inc.noalias() = l_x.triangularView<Eigen::Lower>() * g;
      z += step(i) * inc;
      noise[static_cast<std::size_t>(i)].row(t) = z.transpose();
    }
  }
  return to_request_order(data, levels, noise);
}

std::vector<PerturbedCopy> independent_noise(const Dataset& data, const DataModel& model,
                                             const TrustLevelSet& levels, std::uint64_t seed,
                                             const GenerationOptions& opts) {
  check_inputs(data, model);
  const auto& req = levels.requested();
  Eigen::VectorXd scale(static_cast<Eigen::Index>(req.size()));
  for (std::size_t r = 0; r < req.size(); ++r) scale(static_cast<Eigen::Index>(r)) = std::sqrt(req[r]);
  const Eigen::MatrixXd l_s = scale.asDiagonal();
  const auto noise = kron_noise(data.tuples(), factor_model(model), l_s, seed, opts.block);
  std::vector<PerturbedCopy> out;
  out.reserve(req.size());
  for (std::size_t r = 0; r < req.size(); ++r) out.push_back(make_copy(data, req[r], noise[r]));
  return out;
}

std::vector<double> PerturbSession::levels() const {
  std::vector<double> out;
  out.reserve(released.size());
  for (const auto& r : released) out.push_back(r.level);
  return out;
}

PerturbedCopy PerturbSession::copy(std::size_t i) const {
  PerturbedCopy c;
  c.level = released.at(i).level;
  c.noise = released[i].noise;
  c.values = data.values + c.noise;
  return c;
}

std::ptrdiff_t PerturbSession::find(double level) const {
  for (std::size_t i = 0; i < released.size(); ++i)
    if (released[i].level == level) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

void PerturbSession::validate() const {
  check_inputs(data, model);
  for (std::size_t i = 0; i < released.size(); ++i) {
    const auto& r = released[i];
    if (r.noise.rows() != data.tuples() || r.noise.cols() != data.attributes())
      throw Error(Errc::shape, "session noise for level " + format_double(r.level) +
                                   " does not match the dataset shape");
    if (!(r.level >= 0.0)) throw Error(Errc::invalid_level, "session holds a negative level");
    for (std::size_t k = 0; k < i; ++k)
      if (released[k].level == r.level) throw Error(Errc::duplicate_level, "session repeats a level");
  }
}

PerturbSession start_session(Dataset data, DataModel model, std::uint64_t seed, NoiseScheme scheme) {
  PerturbSession s;
  s.data = std::move(data);
  s.model = std::move(model);
  s.seed = seed;
  s.scheme = scheme;
  check_inputs(s.data, s.model);
  return s;
}

std::uint64_t next_call_seed(const PerturbSession& session) {
  return derive_seed(session.seed, session.epoch);
}

void record_release(PerturbSession& session, const std::vector<PerturbedCopy>& copies) {
  for (const auto& c : copies) {
    if (c.noise.rows() != session.data.tuples() || c.noise.cols() != session.data.attributes())
      throw Error(Errc::shape, "released copy does not match the session dataset");
    if (session.find(c.level) < 0) session.released.push_back({c.level, c.noise});
  }
  ++session.epoch;
}

LevelConditioning condition_levels(const std::vector<double>& old_levels,
                                   const std::vector<double>& new_levels) {
  const auto l = static_cast<Eigen::Index>(old_levels.size());
  const auto p = static_cast<Eigen::Index>(new_levels.size());
  LevelConditioning out;
  // Corner-wave covariance between any two levels is the smaller of the two.
  Eigen::MatrixXd s21(p, l), s22(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < l; ++j) s21(i, j) = std::min(new_levels[i], old_levels[j]);
    for (Eigen::Index j = 0; j < p; ++j) s22(i, j) = std::min(new_levels[i], new_levels[j]);
  }
  if (l == 0) {
    out.coef = Eigen::MatrixXd::Zero(p, 0);
    out.cov = s22;
    return out;
  }

  std::vector<std::size_t> rank(static_cast<std::size_t>(l));
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](auto a, auto b) { return old_levels[a] < old_levels[b]; });
  Eigen::VectorXd sorted_old(l);
  for (Eigen::Index k = 0; k < l; ++k) sorted_old(k) = old_levels[rank[static_cast<std::size_t>(k)]];

  if (sorted_old(0) > 0.0) {
    const Eigen::MatrixXd inv_sorted = corner_wave_inverse(sorted_old);
    Eigen::MatrixXd s21_sorted(p, l);
    for (Eigen::Index k = 0; k < l; ++k) s21_sorted.col(k) = s21.col(static_cast<Eigen::Index>(rank[k]));
    const Eigen::MatrixXd coef_sorted = s21_sorted * inv_sorted;
    out.coef.resize(p, l);
    for (Eigen::Index k = 0; k < l; ++k) out.coef.col(static_cast<Eigen::Index>(rank[k])) = coef_sorted.col(k);
  } else {
    // A zero level carries no noise; the pseudo-inverse keeps the remaining
    // regression well defined.
    Eigen::MatrixXd s11(l, l);
    for (Eigen::Index i = 0; i < l; ++i)
      for (Eigen::Index j = 0; j < l; ++j) s11(i, j) = std::min(old_levels[i], old_levels[j]);
    out.coef = regression_coefficients(s11, s21, Conditioning::pseudo_inverse);
  }
  const Eigen::MatrixXd cov = s22 - out.coef * s21.transpose();
  out.cov = (cov + cov.transpose()) / 2.0;
  return out;
}

std::vector<PerturbedCopy> on_demand(PerturbSession& session, const TrustLevelSet& levels,
                                     const GenerationOptions& opts) {
  session.validate();
  const std::uint64_t seed = next_call_seed(session);

  std::vector<double> fresh;
  for (Eigen::Index i = 0; i < levels.sorted().size(); ++i)
    if (session.find(levels.sorted()(i)) < 0) fresh.push_back(levels.sorted()(i));

  if (!fresh.empty()) {
    const Eigen::MatrixXd l_x = factor_model(session.model);
    std::vector<Eigen::MatrixXd> noise;
    if (session.scheme == NoiseScheme::independent) {
      Eigen::VectorXd scale(static_cast<Eigen::Index>(fresh.size()));
      for (std::size_t i = 0; i < fresh.size(); ++i) scale(static_cast<Eigen::Index>(i)) = std::sqrt(fresh[i]);
      noise = kron_noise(session.data.tuples(), l_x, Eigen::MatrixXd(scale.asDiagonal()), seed, opts.block);
    } else {
      const auto cond = condition_levels(session.levels(), fresh);
      const Eigen::MatrixXd l_c = cholesky(cond.cov).lower;
      std::vector<const Eigen::MatrixXd*> old;
      for (const auto& r : session.released) old.push_back(&r.noise);
      noise = kron_noise(session.data.tuples(), l_x, l_c, seed, opts.block, old, cond.coef);
    }
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      const auto c = make_copy(session.data, fresh[i], noise[i]);
      session.released.push_back({c.level, c.noise});
    }
  }
  ++session.epoch;

  std::vector<PerturbedCopy> out;
  out.reserve(levels.request_count());
  for (double level : levels.requested())
    out.push_back(session.copy(static_cast<std::size_t>(session.find(level))));
  return out;
}

}  // namespace mlpert
