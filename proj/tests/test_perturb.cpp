#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlpert/covariance.hpp"
#include "mlpert/dataset.hpp"
#include "mlpert/error.hpp"
#include "mlpert/perturb.hpp"

using namespace mlpert;

namespace {

DataModel unit_model(Eigen::Index n = 1) {
  DataModel m;
  m.mu = Eigen::VectorXd::Zero(n);
  m.cov = Eigen::MatrixXd::Identity(n, n);
  return m;
}

DataModel two_attr_model() {
  DataModel m;
  m.mu = Eigen::Vector2d(10.0, -5.0);
  m.cov.resize(2, 2);
  m.cov << 2.0, 0.8, 0.8, 1.0;
  return m;
}

Dataset zeros(Eigen::Index t, Eigen::Index n = 1) {
  Dataset d;
  d.values = Eigen::MatrixXd::Zero(t, n);
  for (Eigen::Index j = 0; j < n; ++j) d.names.push_back("x" + std::to_string(j + 1));
  return d;
}

// Empirical covariance between the attribute-`a` noise columns of each copy.
Eigen::MatrixXd level_cov(const std::vector<PerturbedCopy>& copies, Eigen::Index a = 0) {
  const Eigen::Index t = copies.front().noise.rows();
  Eigen::MatrixXd z(t, static_cast<Eigen::Index>(copies.size()));
  for (std::size_t i = 0; i < copies.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = copies[i].noise.col(a);
  const Eigen::MatrixXd c = z.rowwise() - z.colwise().mean();
  return c.transpose() * c / static_cast<double>(t - 1);
}

double max_rel(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return ((got - want).array().abs() / want.array().abs().max(1e-12)).maxCoeff();
}

constexpr Eigen::Index kT = 100000;

}  // namespace

TEST_CASE("batch_parallel cross-level covariance") {
  const auto copies = batch_parallel(zeros(kT), unit_model(), TrustLevelSet::from_request({1, 4}), 17);
  REQUIRE(copies.size() == 2);
  CHECK(copies[0].level == 1);
  CHECK(copies[1].level == 4);
  Eigen::MatrixXd want(2, 2);
  want << 1, 1, 1, 4;
  CHECK((level_cov(copies) - want).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("copies come back in request order") {
  const auto data = gaussian_dataset(two_attr_model(), 200, 1);
  const auto a = batch_parallel(data, two_attr_model(), TrustLevelSet::from_request({4, 1, 2}), 3);
  const auto b = batch_parallel(data, two_attr_model(), TrustLevelSet::from_request({1, 2, 4}), 3);
  CHECK(a[0].level == 4);
  CHECK(a[0].values == b[2].values);
  CHECK(a[1].values == b[0].values);
  CHECK(a[2].values == b[1].values);

  const auto dup = batch_parallel(data, two_attr_model(), TrustLevelSet::from_request({2, 1, 2}), 3);
  REQUIRE(dup.size() == 3);
  CHECK(dup[0].values == dup[2].values);
}

TEST_CASE("stored noise is exactly Y - X") {
  DataModel m = two_attr_model();
  Dataset data = gaussian_dataset(m, 500, 2);
  data.values.col(0) *= 1e6;
  for (const auto& c : batch_parallel(data, m, TrustLevelSet::from_request({0.3, 7}), 5))
    CHECK((c.values - data.values) == c.noise);
  for (const auto& c : independent_noise(data, m, TrustLevelSet::from_request({0.3, 7}), 5))
    CHECK((c.values - data.values) == c.noise);
}

TEST_CASE("parallel and sequential generation agree") {
  const DataModel m = two_attr_model();
  const Dataset data = gaussian_dataset(m, 3000, 8);
  const auto levels = TrustLevelSet::from_request({2, 0.5, 1});
  const auto par = batch_parallel(data, m, levels, 99);
  const auto seq = batch_sequential(data, m, levels, 99);
  REQUIRE(par.size() == seq.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].level == seq[i].level);
    CHECK((par[i].noise - seq[i].noise).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Block size does not change realizations.
  GenerationOptions small;
  small.block = 7;
  const auto blocked = batch_parallel(data, m, levels, 99, small);
  for (std::size_t i = 0; i < par.size(); ++i) CHECK(blocked[i].noise == par[i].noise);
}

TEST_CASE("sequential increments are independent") {
  const auto seq = batch_sequential(zeros(kT), unit_model(), TrustLevelSet::from_request({1, 4}), 23);
  std::vector<PerturbedCopy> parts(2);
  parts[0].noise = seq[0].noise;
  parts[1].noise = seq[1].noise - seq[0].noise;
  Eigen::MatrixXd want(2, 2);
  want << 1, 0, 0, 3;
  CHECK((level_cov(parts) - want).cwiseAbs().maxCoeff() < 0.05);

  const auto three = batch_sequential(zeros(kT), unit_model(), TrustLevelSet::from_request({1, 2, 4}), 24);
  Eigen::MatrixXd cw(3, 3);
  cw << 1, 1, 1, 1, 2, 2, 1, 2, 4;
  CHECK(max_rel(level_cov(three), cw) < 0.05);

  const auto one = batch_sequential(zeros(10), unit_model(), TrustLevelSet::from_request({2}), 1);
  CHECK(one.size() == 1);
}

TEST_CASE("Kronecker structure across attributes") {
  const DataModel m = two_attr_model();
  Dataset data = zeros(kT, 2);
  const auto copies = batch_parallel(data, m, TrustLevelSet::from_request({1, 3}), 41);
  Eigen::MatrixXd z(kT, 4);
  z << copies[0].noise, copies[1].noise;
  const Eigen::MatrixXd c = z.rowwise() - z.colwise().mean();
  const Eigen::MatrixXd emp = c.transpose() * c / static_cast<double>(kT - 1);
  Eigen::MatrixXd sig(2, 2);
  sig << 1, 1, 1, 3;
  Eigen::MatrixXd want(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) want.block(2 * i, 2 * j, 2, 2) = sig(i, j) * m.cov;
  CHECK(max_rel(emp, want) < 0.05);
}

TEST_CASE("independent baseline has no cross-level correlation") {
  const auto copies = independent_noise(zeros(kT), unit_model(), TrustLevelSet::from_request({1, 4}), 5);
  const Eigen::MatrixXd c = level_cov(copies);
  CHECK(std::abs(c(0, 1)) < 0.05);
  CHECK(c(0, 0) == doctest::Approx(1).epsilon(0.05));
  CHECK(c(1, 1) == doctest::Approx(4).epsilon(0.05));
}

TEST_CASE("marginals agree across generators") {
  const DataModel m = two_attr_model();
  const Dataset data = zeros(kT, 2);
  const auto lv = TrustLevelSet::from_request({0.5, 2});
  PerturbSession s = start_session(data, m, 77);
  on_demand(s, TrustLevelSet::from_request({2}));
  const std::vector<Eigen::MatrixXd> z = {
      batch_parallel(data, m, lv, 1)[1].noise, batch_sequential(data, m, lv, 2)[1].noise,
      independent_noise(data, m, lv, 3)[1].noise, on_demand(s, TrustLevelSet::from_request({0.5, 2}))[1].noise};
  for (const auto& n : z) {
    const Eigen::MatrixXd c = n.rowwise() - n.colwise().mean();
    CHECK(max_rel(c.transpose() * c / static_cast<double>(kT - 1), 2.0 * m.cov) < 0.05);
    CHECK(n.colwise().mean().cwiseAbs().maxCoeff() < 0.03);
  }
}

TEST_CASE("level conditioning matches the Brownian oracle") {
  // Below every old level: scaled down, variance s (a - s) / a.
  auto c = condition_levels({4}, {1});
  CHECK(c.coef(0, 0) == doctest::Approx(0.25));
  CHECK(c.cov(0, 0) == doctest::Approx(0.75));
  CHECK(c.coef(0, 0) * 2.0 == doctest::Approx(0.5));

  // Above: carried over, variance s - a.
  c = condition_levels({1}, {9});
  CHECK(c.coef(0, 0) == doctest::Approx(1.0));
  CHECK(c.cov(0, 0) == doctest::Approx(8.0));

  // Between: bridge interpolation, old levels in arbitrary release order.
  c = condition_levels({4, 1}, {2});
  CHECK(c.coef(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(c.coef(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(c.cov(0, 0) == doctest::Approx(2.0 / 3.0));

  // Several old levels: only the neighbours matter.
  c = condition_levels({0.5, 8, 1, 3}, {2, 10});
  CHECK(c.coef(0, 0) == doctest::Approx(0).scale(1));
  CHECK(c.coef(0, 1) == doctest::Approx(0).scale(1));
  CHECK(c.coef(0, 2) == doctest::Approx(0.5));
  CHECK(c.coef(0, 3) == doctest::Approx(0.5));
  CHECK(c.coef(1, 1) == doctest::Approx(1));
  CHECK(c.cov(0, 0) == doctest::Approx(0.5));
  CHECK(c.cov(1, 1) == doctest::Approx(2));
  CHECK(c.cov(0, 1) == doctest::Approx(0).scale(1));

  c = condition_levels({}, {1, 4});
  CHECK(c.coef.cols() == 0);
  CHECK(c.cov(1, 0) == 1);

  // A zero old level is accepted through the pseudo-inverse.
  c = condition_levels({0, 2}, {1});
  CHECK(c.coef(0, 1) == doctest::Approx(0.5));
  CHECK(c.cov(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("on-demand realized conditional moments") {
  // N = 1, K_X = 1; the old copy at level 4 has realized noise; draw level 1.
  const DataModel m = unit_model();
  Dataset data = zeros(kT);
  PerturbSession s = start_session(data, m, 3);
  const auto first = on_demand(s, TrustLevelSet::from_request({4}));
  const auto fresh = on_demand(s, TrustLevelSet::from_request({1}));
  const Eigen::VectorXd v = first[0].noise.col(0);
  const Eigen::VectorXd r = fresh[0].noise.col(0) - 0.25 * v;
  CHECK(std::abs(r.mean()) < 0.01);
  CHECK((r.array() - r.mean()).square().mean() == doctest::Approx(0.75).epsilon(0.03));
  CHECK(std::abs((r.array() * v.array()).mean()) < 0.03);
}

TEST_CASE("on-demand versus batch equivalence") {
  const DataModel m = unit_model();
  const Dataset data = zeros(kT);
  PerturbSession s = start_session(data, m, 12);
  const auto ac = batch_parallel(data, m, TrustLevelSet::from_request({1, 4}), next_call_seed(s));
  record_release(s, ac);
  const auto b = on_demand(s, TrustLevelSet::from_request({2}));
  const std::vector<PerturbedCopy> all = {ac[0], b[0], ac[1]};
  Eigen::MatrixXd cw(3, 3);
  cw << 1, 1, 1, 1, 2, 2, 1, 2, 4;
  CHECK(max_rel(level_cov(all), cw) < 0.05);
  CHECK(max_rel(level_cov(batch_parallel(data, m, TrustLevelSet::from_request({1, 2, 4}), 4)), cw) < 0.05);
}

TEST_CASE("on-demand session bookkeeping") {
  const DataModel m = two_attr_model();
  const Dataset data = gaussian_dataset(m, 50, 6);
  PerturbSession s = start_session(data, m, 1);
  const auto a = on_demand(s, TrustLevelSet::from_request({2, 0.5}));
  CHECK(s.epoch == 1);
  CHECK(s.levels() == std::vector<double>{0.5, 2});
  CHECK(a[0].level == 2);

  // Re-requesting an old level returns the stored realization.
  const auto b = on_demand(s, TrustLevelSet::from_request({1, 2}));
  CHECK(s.levels() == std::vector<double>{0.5, 2, 1});
  CHECK(b[1].values == a[0].values);
  CHECK(s.epoch == 2);

  // Replay with the same seed and request sequence is identical.
  PerturbSession t = start_session(data, m, 1);
  on_demand(t, TrustLevelSet::from_request({2, 0.5}));
  const auto c = on_demand(t, TrustLevelSet::from_request({1, 2}));
  CHECK(c[0].values == b[0].values);

  // Empty session: same realizations as batch_parallel with the call seed.
  PerturbSession u = start_session(data, m, 9);
  const auto batch = batch_parallel(data, m, TrustLevelSet::from_request({0.5, 2}), next_call_seed(u));
  const auto od = on_demand(u, TrustLevelSet::from_request({0.5, 2}));
  CHECK((od[0].noise - batch[0].noise).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((od[1].noise - batch[1].noise).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("independent-scheme sessions draw fresh noise") {
  const DataModel m = unit_model();
  PerturbSession s = start_session(zeros(kT), m, 4, NoiseScheme::independent);
  const auto a = on_demand(s, TrustLevelSet::from_request({1}));
  const auto b = on_demand(s, TrustLevelSet::from_request({4}));
  const Eigen::MatrixXd c = level_cov({a[0], b[0]});
  CHECK(std::abs(c(0, 1)) < 0.05);
  CHECK(c(1, 1) == doctest::Approx(4).epsilon(0.05));
}

TEST_CASE("input validation") {
  const DataModel m = two_attr_model();
  const Dataset one_col = zeros(5, 1);
  CHECK_THROWS_AS(batch_parallel(one_col, m, TrustLevelSet::from_request({1}), 1), Error);
  DataModel bad = m;
  bad.cov(0, 0) = -3;
  CHECK_THROWS_AS(batch_parallel(zeros(5, 2), bad, TrustLevelSet::from_request({1}), 1), Error);
  CHECK(parse_noise_scheme(to_string(NoiseScheme::independent)) == NoiseScheme::independent);
  CHECK_THROWS_AS(parse_noise_scheme("bogus"), Error);
}
