#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlpert/dataset.hpp"
#include "mlpert/error.hpp"
#include "mlpert/perturb.hpp"
#include "mlpert/session.hpp"

using namespace mlpert;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mlpert_test_session" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PerturbSession sample_session(std::uint64_t seed = 5) {
  DataModel m;
  m.mu = Eigen::Vector2d(3.0, 4.0);
  m.cov.resize(2, 2);
  m.cov << 1.5, 0.2, 0.2, 0.7;
  Dataset d = gaussian_dataset(m, 40, 2);
  d.names = {"Age", "Income"};
  PerturbSession s = start_session(std::move(d), m, seed);
  on_demand(s, TrustLevelSet::from_request({1.0, 0.25}));
  return s;
}

}  // namespace

TEST_CASE("file names embed the level") {
  CHECK(level_tag(0.25) == "0.25");
  CHECK(level_tag(4) == "4");
  CHECK(level_tag(0.1) == "0.1");
  CHECK(noise_file_name(1.5) == "noise_1.5.csv");
  CHECK(copy_file_name(1e-7) == "copy_1e-07.csv");
}

TEST_CASE("save and load round trip") {
  const fs::path dir = fresh_dir("round");
  const PerturbSession s = sample_session();
  CHECK_FALSE(has_session(dir));
  save_session(dir, s);
  CHECK(has_session(dir));
  CHECK(fs::exists(dir / "original.csv"));
  CHECK(fs::exists(dir / "noise_0.25.csv"));
  CHECK(fs::exists(dir / "noise_1.csv"));

  const PerturbSession back = load_session(dir);
  CHECK(back.seed == s.seed);
  CHECK(back.epoch == s.epoch);
  CHECK(back.scheme == s.scheme);
  CHECK(back.levels() == s.levels());
  CHECK(back.data.names == s.data.names);
  CHECK(back.data.values == s.data.values);
  CHECK(back.model.mu == s.model.mu);
  CHECK(back.model.cov == s.model.cov);
  for (std::size_t i = 0; i < s.released.size(); ++i) {
    CHECK(back.released[i].noise == s.released[i].noise);
    CHECK(back.copy(i).values == s.copy(i).values);
  }

  const auto meta = nlohmann::json::parse(slurp(dir / "session.json"));
  CHECK(meta["format"] == "mlpert-session");
  CHECK(meta["levels"].size() == 2);
}

TEST_CASE("continuing from disk matches continuing in memory") {
  const fs::path dir = fresh_dir("continue");
  PerturbSession mem = sample_session(11);
  save_session(dir, mem);
  PerturbSession disk = load_session(dir);
  const auto a = on_demand(mem, TrustLevelSet::from_request({0.5}));
  const auto b = on_demand(disk, TrustLevelSet::from_request({0.5}));
  CHECK(a[0].values == b[0].values);

  save_session(dir, disk);
  const std::string before = slurp(dir / "session.json");
  save_session(dir, load_session(dir));
  CHECK(slurp(dir / "session.json") == before);
}

TEST_CASE("lock file excludes a second writer") {
  const fs::path dir = fresh_dir("lock");
  {
    SessionLock lock(dir);
    CHECK(fs::exists(dir / ".lock"));
    try {
      SessionLock second(dir);
      FAIL("second lock should fail");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::io);
    }
  }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  SessionLock again(dir);
}

TEST_CASE("corrupt or missing sessions are reported") {
  const fs::path dir = fresh_dir("corrupt");
  CHECK_THROWS_AS(load_session(dir), Error);
  fs::create_directories(dir);
  std::ofstream(dir / "session.json") << "{ not json";
  try {
    load_session(dir);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
  }

  const fs::path d2 = fresh_dir("missing_noise");
  save_session(d2, sample_session());
  fs::remove(d2 / "noise_1.csv");
  try {
    load_session(d2);
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io);
  }
}
