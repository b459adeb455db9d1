#include "mlpert/session.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mlpert/error.hpp"

namespace mlpert {

namespace fs = std::filesystem;
using nlohmann::json;

std::string level_tag(double level) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), level);
  return std::string(buf, res.ptr);
}

std::string noise_file_name(double level) { return "noise_" + level_tag(level) + ".csv"; }
std::string copy_file_name(double level) { return "copy_" + level_tag(level) + ".csv"; }

bool has_session(const fs::path& dir) { return fs::exists(dir / "session.json"); }

void save_session(const fs::path& dir, const PerturbSession& session) {
  session.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());

  const auto levels = session.levels();
  std::vector<std::size_t> perm(levels.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return levels[a] < levels[b]; });

  json j;
  j["format"] = "mlpert-session";
  j["version"] = 1;
  j["seed"] = session.seed;
  j["scheme"] = to_string(session.scheme);
  j["epoch"] = session.epoch;
  j["attributes"] = session.data.names;
  j["tuples"] = session.data.tuples();
  j["dataset"] = "original.csv";
  j["model"]["mu"] = std::vector<double>(session.model.mu.data(),
                                         session.model.mu.data() + session.model.mu.size());
  auto& cov = j["model"]["cov"] = json::array();
  for (Eigen::Index i = 0; i < session.model.cov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < session.model.cov.cols(); ++k) row.push_back(session.model.cov(i, k));
    cov.push_back(row);
  }
  j["levels"] = levels;
  j["permutation"] = perm;
  auto& files = j["noise_files"] = json::array();
  for (double s : levels) files.push_back(noise_file_name(s));

  if (!fs::exists(dir / "original.csv"))
    write_csv(dir / "original.csv", session.data.values, session.data.names);
  for (const auto& r : session.released) {
    const fs::path p = dir / noise_file_name(r.level);
    if (!fs::exists(p)) write_csv(p, r.noise, session.data.names);
  }

  // Metadata last and atomically, so readers never see levels whose noise
  // files are not on disk yet.
  const fs::path tmp = dir / "session.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(Errc::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, dir / "session.json", ec);
  if (ec) throw Error(Errc::io, "cannot commit session.json: " + ec.message());
}

PerturbSession load_session(const fs::path& dir) {
  const fs::path meta = dir / "session.json";
  std::ifstream in(meta);
  if (!in) throw Error(Errc::io, "no session at " + dir.string());
  PerturbSession s;
  try {
    json j;
    in >> j;
    if (j.value("format", "") != "mlpert-session") throw Error(Errc::parse, meta.string() + ": not a session file");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.scheme = parse_noise_scheme(j.at("scheme").get<std::string>());
    s.epoch = j.at("epoch").get<std::uint64_t>();
    s.data = read_csv(dir / j.at("dataset").get<std::string>());
    const auto mu = j.at("model").at("mu").get<std::vector<double>>();
    const auto cov = j.at("model").at("cov").get<std::vector<std::vector<double>>>();
    const auto n = static_cast<Eigen::Index>(mu.size());
    s.model.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), n);
    s.model.cov.resize(n, n);
    if (static_cast<Eigen::Index>(cov.size()) != n) throw Error(Errc::shape, "session model covariance has wrong size");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(cov[i].size()) != n) throw Error(Errc::shape, "session model covariance has wrong size");
      for (Eigen::Index k = 0; k < n; ++k) s.model.cov(i, k) = cov[i][k];
    }
    const auto levels = j.at("levels").get<std::vector<double>>();
    const auto files = j.at("noise_files").get<std::vector<std::string>>();
    if (files.size() != levels.size()) throw Error(Errc::parse, meta.string() + ": levels and noise files disagree");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const Dataset noise = read_csv(dir / files[i]);
      s.released.push_back({levels[i], noise.values});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse, meta.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

SessionLock::SessionLock(const fs::path& dir) : path_(dir / ".lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  // "x" mode fails if the file exists.
  std::FILE* f = std::fopen(path_.string().c_str(), "wx");
  if (!f) throw Error(Errc::io, "session " + dir.string() + " is locked by another writer (" + path_.string() + ")");
  std::fclose(f);
}

SessionLock::~SessionLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace mlpert
