#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "mlpert/commands.hpp"
#include "mlpert/error.hpp"

namespace {

std::pair<double, double> parse_range(const std::string& text) {
  const auto v = mlpert::parse_double_list(text);
  if (v.size() != 2) throw mlpert::Error(mlpert::Errc::invalid_argument, "--range takes lo,hi");
  return {v[0], v[1]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level trust perturbation of tabular data"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Release perturbed copies at the given trust levels");
  std::string gen_input, gen_levels, gen_random, gen_mode = "parallel", gen_model;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  long long gen_synthetic = 0;
  bool gen_lognormal = false, gen_estimate = false;
  gen->add_option("--input", gen_input, "Original data (CSV with header)");
  gen->add_option("--synthetic", gen_synthetic, "Use T synthetic (Age, Income) tuples instead of --input");
  gen->add_flag("--lognormal", gen_lognormal, "Skewed synthetic data");
  gen->add_option("--levels", gen_levels, "Comma separated noise levels, e.g. 0.25,0.5,1");
  gen->add_option("--random-levels", gen_random, "M,lo,hi: M levels drawn from U[lo,hi]");
  gen->add_option("--mode", gen_mode, "parallel | sequential | ondemand | independent")
      ->check(CLI::IsMember({"parallel", "sequential", "ondemand", "independent"}));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Session directory")->required();
  gen->add_option("--model", gen_model, "JSON file with mu and cov");
  gen->add_flag("--estimate", gen_estimate, "Estimate mu and cov from the data (default)");

  // attack
  auto* attack = app.add_subcommand("attack", "Run LLSE reconstruction attacks against a session");
  std::string at_session, at_subset = "all", at_knowledge = "perfect", at_source = "least", at_out;
  long long at_samples = 0;
  std::uint64_t at_seed = 0;
  attack->add_option("--session", at_session, "Session directory")->required();
  attack->add_option("--subset", at_subset, "all, or 1-based copy ids such as 1,3,4");
  attack->add_option("--knowledge", at_knowledge, "perfect | partial")
      ->check(CLI::IsMember({"perfect", "partial"}));
  attack->add_option("--samples", at_samples, "Tuples a partial adversary sees (default 100 N^2)");
  attack->add_option("--source", at_source, "least | pooled: copies used to estimate the model")
      ->check(CLI::IsMember({"least", "pooled"}));
  attack->add_option("--seed", at_seed, "Seed for subset sampling");
  attack->add_option("--out", at_out, "Report directory")->required();

  // exp1
  auto* exp1 = app.add_subcommand("exp1", "Attack strength as copies are released");
  mlpert::Experiment1Config e1;
  long long e1_tuples = e1.tuples;
  std::string e1_range = "0.25,1", e1_out;
  exp1->add_option("--m", e1.copies, "Number of copies");
  exp1->add_option("--t", e1_tuples, "Number of tuples");
  exp1->add_option("--range", e1_range, "lo,hi of the level distribution");
  exp1->add_option("--seed", e1.seed, "Random seed");
  exp1->add_option("--out", e1_out, "Output directory")->required();

  // exp2
  auto* exp2 = app.add_subcommand("exp2", "On-demand generation cost against the number of copies");
  mlpert::Experiment2Config e2;
  long long e2_tuples = e2.tuples;
  std::string e2_mlist = "8,16,32,64", e2_out;
  exp2->add_option("--m-list", e2_mlist, "Comma separated M values");
  exp2->add_option("--t", e2_tuples, "Number of tuples");
  exp2->add_option("--reps", e2.reps, "Timed repetitions");
  exp2->add_option("--seed", e2.seed, "Random seed");
  exp2->add_option("--out", e2_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      mlpert::GenerateConfig c;
      if (!gen_input.empty()) c.input = gen_input;
      if (gen->count("--synthetic")) {
        if (gen_synthetic < 1) throw mlpert::Error(mlpert::Errc::invalid_argument, "--synthetic needs T >= 1");
        c.synthetic_tuples = static_cast<Eigen::Index>(gen_synthetic);
      }
      c.synthetic_shape = gen_lognormal ? mlpert::SyntheticShape::lognormal : mlpert::SyntheticShape::gaussian;
      if (!gen_levels.empty()) c.levels = mlpert::parse_double_list(gen_levels);
      if (!gen_random.empty()) {
        const auto v = mlpert::parse_double_list(gen_random);
        if (v.size() != 3 || v[0] < 1 || v[0] != static_cast<double>(static_cast<std::size_t>(v[0])))
          throw mlpert::Error(mlpert::Errc::invalid_argument, "--random-levels takes M,lo,hi");
        c.random_levels = mlpert::RandomLevelSpec{static_cast<std::size_t>(v[0]), v[1], v[2]};
      }
      c.mode = mlpert::parse_generation_mode(gen_mode);
      c.seed = gen_seed;
      c.out = gen_out;
      if (!gen_model.empty()) c.model_file = gen_model;
      c.estimate = gen_estimate;
      mlpert::cmd_generate(c, std::cout);
    } else if (*attack) {
      mlpert::AttackConfig c;
      c.session = at_session;
      if (at_subset != "all") c.subset = mlpert::parse_index_list(at_subset);
      c.knowledge = mlpert::parse_knowledge(at_knowledge);
      if (at_samples < 0) throw mlpert::Error(mlpert::Errc::invalid_argument, "--samples must be positive");
      c.samples = static_cast<Eigen::Index>(at_samples);
      c.source = at_source == "pooled" ? mlpert::ModelSource::pooled : mlpert::ModelSource::least_perturbed;
      c.seed = at_seed;
      c.out = at_out;
      mlpert::cmd_attack(c, std::cout);
    } else if (*exp1) {
      if (e1_tuples < 2) throw mlpert::Error(mlpert::Errc::invalid_argument, "--t needs at least 2 tuples");
      e1.tuples = static_cast<Eigen::Index>(e1_tuples);
      std::tie(e1.lo, e1.hi) = parse_range(e1_range);
      mlpert::cmd_experiment1(e1, e1_out, std::cout);
    } else if (*exp2) {
      if (e2_tuples < 2) throw mlpert::Error(mlpert::Errc::invalid_argument, "--t needs at least 2 tuples");
      e2.tuples = static_cast<Eigen::Index>(e2_tuples);
      e2.m_list.clear();
      for (std::size_t m : mlpert::parse_index_list(e2_mlist)) e2.m_list.push_back(m);
      mlpert::cmd_experiment2(e2, e2_out, std::cout);
    }
  } catch (const mlpert::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mlpert::exit_code_for(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
