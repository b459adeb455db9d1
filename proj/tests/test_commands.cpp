#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlpert/commands.hpp"
#include "mlpert/error.hpp"
#include "mlpert/session.hpp"

using namespace mlpert;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mlpert_test_commands" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mlpert::Error");
  return Errc::io;
}

fs::path small_csv() {
  const fs::path dir = fs::temp_directory_path() / "mlpert_test_commands";
  fs::create_directories(dir);
  const fs::path p = dir / "input.csv";
  std::ofstream out(p);
  out << "Age,Income\n";
  for (int i = 0; i < 300; ++i) out << 20 + (i * 37) % 50 << ',' << 5 + (i * 11) % 23 << '\n';
  return p;
}

}  // namespace

TEST_CASE("list parsing") {
  CHECK(parse_double_list("1,4,0.25") == std::vector<double>{1, 4, 0.25});
  CHECK(parse_index_list("1,3,4") == std::vector<std::size_t>{1, 3, 4});
  CHECK_THROWS_AS(parse_double_list("1,,2"), Error);
  CHECK_THROWS_AS(parse_double_list("1,x"), Error);
  CHECK_THROWS_AS(parse_index_list("0"), Error);
  CHECK_THROWS_AS(parse_index_list("1.5"), Error);
  CHECK(parse_generation_mode("ondemand") == GenerationMode::ondemand);
  CHECK_THROWS_AS(parse_generation_mode("fast"), Error);
}

TEST_CASE("exit codes by error class") {
  CHECK(exit_code_for(ErrorClass::validation) == 2);
  CHECK(exit_code_for(ErrorClass::io) == 3);
  CHECK(exit_code_for(ErrorClass::numerical) == 4);
  CHECK(exit_code_for(Error(Errc::not_psd, "x").error_class()) == 4);
  CHECK(exit_code_for(Error(Errc::parse, "x").error_class()) == 2);
}

TEST_CASE("generate from a CSV, sequentially") {
  GenerateConfig c;
  c.input = small_csv();
  c.levels = {1, 4};
  c.mode = GenerationMode::sequential;
  c.seed = 5;
  c.out = fresh_dir("seq");
  std::ostringstream log;
  const auto out = cmd_generate(c, log);
  REQUIRE(out.size() == 2);
  CHECK(out[0].predicted_normalized == doctest::Approx(0.5));
  CHECK(out[1].predicted_normalized == doctest::Approx(0.8));
  CHECK(fs::exists(c.out / "copy_1.csv"));
  CHECK(fs::exists(c.out / "copy_4.csv"));
  CHECK(has_session(c.out));
  CHECK_FALSE(fs::exists(c.out / ".lock"));
  CHECK(log.str().find("0.80000000000000004") != std::string::npos);

  const Dataset copy = read_csv(c.out / "copy_4.csv");
  const Dataset orig = read_csv(*c.input);
  const PerturbSession s = load_session(c.out);
  CHECK(copy.names == orig.names);
  CHECK(copy.values - orig.values == s.released[s.find(4)].noise);
}

TEST_CASE("on-demand extends an existing session consistently") {
  GenerateConfig c;
  c.synthetic_tuples = 500;
  c.levels = {1, 4};
  c.seed = 3;
  c.out = fresh_dir("ondemand");
  std::ostringstream log;
  cmd_generate(c, log);
  const std::string copy1 = slurp(c.out / "copy_1.csv");

  GenerateConfig more;
  more.levels = {2};
  more.mode = GenerationMode::ondemand;
  more.seed = 3;
  more.out = c.out;
  const auto out = cmd_generate(more, log);
  REQUIRE(out.size() == 1);
  CHECK(fs::exists(c.out / "copy_2.csv"));
  CHECK(slurp(c.out / "copy_1.csv") == copy1);
  const PerturbSession s = load_session(c.out);
  CHECK(s.levels() == std::vector<double>{1, 4, 2});
  CHECK(s.epoch == 2);

  // Fresh starts refuse to overwrite, on-demand needs a session.
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::invalid_argument);
  more.out = fresh_dir("no_session");
  CHECK(code_of([&] { cmd_generate(more, log); }) == Errc::invalid_argument);
}

TEST_CASE("configuration validation") {
  std::ostringstream log;
  GenerateConfig c;
  c.synthetic_tuples = 100;
  c.out = fresh_dir("invalid");
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::invalid_argument);  // no levels
  c.levels = {1};
  c.random_levels = RandomLevelSpec{3, 0.25, 1};
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::invalid_argument);  // two level specs
  c.random_levels.reset();
  c.input = small_csv();
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::invalid_argument);  // two data sources
  c.input.reset();
  c.levels = {-1};
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::invalid_level);
  c.levels = {1};
  c.synthetic_tuples.reset();
  c.input = fs::temp_directory_path() / "mlpert_test_commands" / "missing.csv";
  CHECK(code_of([&] { cmd_generate(c, log); }) == Errc::io);
  CHECK_FALSE(fs::exists(c.out / ".lock"));

  const fs::path bad = fs::temp_directory_path() / "mlpert_test_commands" / "bad.csv";
  std::ofstream(bad) << "a,b\n1,2\n3,oops\n";
  c.input = bad;
  try {
    cmd_generate(c, log);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
    CHECK(std::string(e.what()).find("line 3, column 2") != std::string::npos);
  }
}

TEST_CASE("model file and random levels") {
  const fs::path dir = fresh_dir("model");
  fs::create_directories(dir);
  DataModel m;
  m.mu = Eigen::Vector2d(50, 16);
  m.cov.resize(2, 2);
  m.cov << 300, 5, 5, 220;
  write_model_json(dir / "model.json", m);

  GenerateConfig c;
  c.synthetic_tuples = 200;
  c.random_levels = RandomLevelSpec{4, 0.25, 1};
  c.model_file = dir / "model.json";
  c.mode = GenerationMode::independent;
  c.seed = 8;
  c.out = dir / "session";
  std::ostringstream log;
  const auto out = cmd_generate(c, log);
  CHECK(out.size() == 4);
  for (const auto& g : out) {
    CHECK(g.level >= 0.25);
    CHECK(g.level < 1.0);
  }
  const PerturbSession s = load_session(c.out);
  CHECK(s.model.cov == m.cov);
  CHECK(s.scheme == NoiseScheme::independent);
}

TEST_CASE("attack command and byte-identical reruns") {
  std::ostringstream log;
  auto run = [&](const std::string& name) {
    GenerateConfig c;
    c.synthetic_tuples = 4000;
    c.levels = {0.5, 2, 1};
    c.seed = 21;
    c.out = fresh_dir(name);
    cmd_generate(c, log);
    AttackConfig a;
    a.session = c.out;
    a.knowledge = KnowledgeKind::partial;
    a.out = c.out / "report";
    const AttackReport r = cmd_attack(a, log);
    CHECK(r.records.size() == 7);
    CHECK(r.samples == 400);
    return c.out;
  };
  const fs::path a = run("det_a"), b = run("det_b");
  for (const char* f : {"copy_0.5.csv", "copy_2.csv", "copy_1.csv", "noise_1.csv", "session.json",
                        "report/report.json", "report/report.csv"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);

  AttackConfig one;
  one.session = a;
  one.subset = {1, 3};
  one.out = a / "one";
  const AttackReport r = cmd_attack(one, log);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].subset == std::vector<std::size_t>{0, 2});
  CHECK(r.records[0].analytic_pass);

  one.subset = {4};
  CHECK(code_of([&] { cmd_attack(one, log); }) == Errc::invalid_argument);
  one.session = fresh_dir("nothing");
  CHECK(code_of([&] { cmd_attack(one, log); }) == Errc::io);
}

TEST_CASE("small experiment runs write their CSVs") {
  std::ostringstream log;
  Experiment1Config e1;
  e1.copies = 4;
  e1.tuples = 2000;
  const fs::path dir = fresh_dir("exp");
  const auto r1 = cmd_experiment1(e1, dir, log);
  CHECK(r1.rows.size() == 4);
  CHECK(fs::exists(dir / "exp1.csv"));

  Experiment2Config e2;
  e2.m_list = {4, 8};
  e2.tuples = 500;
  e2.reps = 1;
  const auto r2 = cmd_experiment2(e2, dir, log);
  CHECK(r2.rows.size() == 6);
  CHECK(r2.slopes.size() == 3);
  CHECK(fs::exists(dir / "exp2.csv"));
  CHECK(fs::exists(dir / "exp2_slopes.csv"));
}
