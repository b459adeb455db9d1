#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlpert/rng.hpp"

using namespace mlpert;

TEST_CASE("same seed and stream give the same sequence") {
  SeededRng a(123, 5), b(123, 5);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("streams and seeds are distinct") {
  SeededRng a(123, 0), b(123, 1), c(124, 0);
  const double x = a.uniform();
  CHECK(x != b.uniform());
  CHECK(x != c.uniform());
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(0, 0) != 0);
}

TEST_CASE("uniform stays in [0, 1)") {
  SeededRng r(9);
  double lo = 1, hi = 0, sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("standard normal moments over 1e5 draws") {
  SeededRng r(2024);
  const int n = 100000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  const double mean = s1 / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("fill_normal matches repeated normal()") {
  SeededRng a(77, 3), b(77, 3);
  std::vector<double> v(11);
  a.fill_normal(v);
  for (double x : v) CHECK(x == b.normal());
}
