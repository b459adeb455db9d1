#include "mlpert/commands.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>

#include "mlpert/error.hpp"
#include "mlpert/perturb.hpp"
#include "mlpert/session.hpp"

namespace mlpert {

namespace fs = std::filesystem;

GenerationMode parse_generation_mode(const std::string& text) {
  if (text == "parallel") return GenerationMode::parallel;
  if (text == "sequential") return GenerationMode::sequential;
  if (text == "ondemand") return GenerationMode::ondemand;
  if (text == "independent") return GenerationMode::independent;
  throw Error(Errc::invalid_argument, "unknown mode '" + text + "'");
}

int exit_code_for(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::io:
      return 3;
    case ErrorClass::numerical:
      return 4;
    default:
      return 2;
  }
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw Error(Errc::invalid_argument, "'" + item + "' is not a number");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(text)) {
    if (v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw Error(Errc::invalid_argument, "copy indices are positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void GenerateConfig::validate() const {
  if (levels.empty() == !random_levels.has_value())
    throw Error(Errc::invalid_argument, "give exactly one of --levels or --random-levels");
  if (random_levels && random_levels->count == 0)
    throw Error(Errc::invalid_argument, "--random-levels needs at least one level");
  if (out.empty()) throw Error(Errc::invalid_argument, "--out is required");
  if (model_file && estimate) throw Error(Errc::invalid_argument, "give at most one of --model and --estimate");
  if (mode == GenerationMode::ondemand) {
    if (!has_session(out))
      throw Error(Errc::invalid_argument, "mode ondemand needs an existing session in " + out.string());
  } else {
    if (input.has_value() == synthetic_tuples.has_value())
      throw Error(Errc::invalid_argument, "give exactly one of --input or --synthetic");
    if (has_session(out))
      throw Error(Errc::invalid_argument, out.string() + " already holds a session; use --mode ondemand");
  }
}

std::vector<GeneratedLevel> cmd_generate(const GenerateConfig& config, std::ostream& log) {
  config.validate();
  SessionLock lock(config.out);

  const std::vector<double> requested =
      config.random_levels
          ? random_levels(config.random_levels->count, config.random_levels->lo, config.random_levels->hi, config.seed)
          : config.levels;
  const TrustLevelSet levels = TrustLevelSet::from_request(requested);

  PerturbSession session;
  std::vector<PerturbedCopy> copies;
  if (config.mode == GenerationMode::ondemand) {
    session = load_session(config.out);
    copies = on_demand(session, levels);
  } else {
    Dataset data = config.input ? read_csv(*config.input)
                                : synthetic_census(*config.synthetic_tuples, config.seed, config.synthetic_shape);
    DataModel model = config.model_file ? read_model_json(*config.model_file) : estimate_data_model(data.values);
    const NoiseScheme scheme =
        config.mode == GenerationMode::independent ? NoiseScheme::independent : NoiseScheme::corner_wave;
    session = start_session(std::move(data), std::move(model), config.seed, scheme);
    const std::uint64_t seed = next_call_seed(session);
    switch (config.mode) {
      case GenerationMode::parallel:
        copies = batch_parallel(session.data, session.model, levels, seed);
        break;
      case GenerationMode::sequential:
        copies = batch_sequential(session.data, session.model, levels, seed);
        break;
      default:
        // Repeated levels in one request are one trust level, hence one copy.
        copies = independent_noise(session.data, session.model,
                                   TrustLevelSet::from_request(std::vector<double>(
                                       levels.sorted().data(), levels.sorted().data() + levels.size())),
                                   seed);
        break;
    }
    record_release(session, copies);
  }

  save_session(config.out, session);

  std::vector<GeneratedLevel> out;
  for (double s : requested) {
    if (std::any_of(out.begin(), out.end(), [&](const auto& g) { return g.level == s; })) continue;
    const auto idx = session.find(s);
    const PerturbedCopy copy = session.copy(static_cast<std::size_t>(idx));
    GeneratedLevel g{s, s / (s + 1.0), config.out / copy_file_name(s)};
    write_csv(g.file, copy.values, session.data.names);
    log << "level " << format_double(s) << "  predicted normalized error " << format_double(g.predicted_normalized)
        << "  -> " << g.file.string() << '\n';
    out.push_back(std::move(g));
  }
  return out;
}

AttackReport cmd_attack(const AttackConfig& config, std::ostream& log) {
  const PerturbSession session = load_session(config.session);
  const std::size_t m = session.released.size();
  if (m == 0) throw Error(Errc::invalid_argument, "session has no released copies");

  std::vector<PerturbedCopy> copies;
  copies.reserve(m);
  for (std::size_t i = 0; i < m; ++i) copies.push_back(session.copy(i));

  std::vector<std::vector<std::size_t>> subsets;
  if (config.subset.empty()) {
    subsets = expand_subsets(default_subsets(m, config.seed), m);
  } else {
    std::vector<std::size_t> zero_based;
    for (std::size_t i : config.subset) {
      if (i < 1 || i > m)
        throw Error(Errc::invalid_argument, "copy " + std::to_string(i) + " is not in the session (1.." +
                                                std::to_string(m) + ")");
      zero_based.push_back(i - 1);
    }
    subsets = expand_subsets(std::vector<std::vector<std::size_t>>{zero_based}, m);
  }

  const Eigen::Index n = session.data.attributes();
  const Eigen::Index samples = config.samples > 0 ? config.samples : 100 * n * n;
  KnowledgeProvider provider;
  if (config.knowledge == KnowledgeKind::perfect) {
    const auto shared = std::make_shared<const AdversaryKnowledge>(perfect_knowledge(session.model));
    provider = [shared](const std::vector<std::size_t>&) { return shared; };
  } else {
    auto cache = std::make_shared<std::map<std::vector<std::size_t>, std::shared_ptr<const AdversaryKnowledge>>>();
    provider = [&, cache](const std::vector<std::size_t>& subset) {
      // The least-perturbed-copy estimate depends only on that copy.
      std::vector<std::size_t> key = subset;
      if (config.source == ModelSource::least_perturbed) {
        key = {*std::min_element(subset.begin(), subset.end(),
                                 [&](auto a, auto b) { return copies[a].level < copies[b].level; })};
      }
      auto& slot = (*cache)[key];
      if (!slot) {
        std::vector<const PerturbedCopy*> held;
        for (std::size_t i : key) held.push_back(&copies[i]);
        EstimateOptions opts;
        opts.samples = samples;
        opts.source = config.source;
        slot = std::make_shared<const AdversaryKnowledge>(partial_knowledge(held, opts));
      }
      return slot;
    };
  }

  AttackReport report =
      build_attack_report(session.data, session.model, copies, session.scheme, config.knowledge, provider, subsets);
  report.samples = config.knowledge == KnowledgeKind::partial ? samples : 0;

  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw Error(Errc::io, "cannot create " + config.out.string() + ": " + ec.message());
  report.write_json(config.out / "report.json");
  report.write_csv(config.out / "report.csv");

  std::size_t analytic_pass = 0, empirical_pass = 0;
  for (const auto& r : report.records) {
    analytic_pass += r.analytic_pass;
    empirical_pass += r.empirical_pass;
  }
  log << report.records.size() << " subset(s), scheme " << report.scheme << ", knowledge " << report.knowledge
      << ": analytic goal met on " << analytic_pass << ", empirical goal met on " << empirical_pass << '\n';
  return report;
}

Experiment1Result cmd_experiment1(const Experiment1Config& config, const fs::path& out, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::io, "cannot create " + out.string() + ": " + ec.message());
  Experiment1Result result = run_experiment1(config);
  result.write_csv(out / "exp1.csv");
  if (!result.rows.empty()) {
    const auto& last = result.rows.back();
    log << "after " << last.released << " copies: independent " << format_double(last.independent_perfect)
        << ", corner-wave " << format_double(last.corner_wave_perfect) << " (best single "
        << format_double(last.corner_wave_min_single) << ")\n";
  }
  return result;
}

Experiment2Result cmd_experiment2(const Experiment2Config& config, const fs::path& out, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::io, "cannot create " + out.string() + ": " + ec.message());
  Experiment2Result result = run_experiment2(config);
  result.write_csv(out / "exp2.csv");
  result.write_slopes_csv(out / "exp2_slopes.csv");
  for (std::size_t i = 0; i < result.slopes.size(); ++i)
    log << "L = floor(" << format_double(config.fractions[i]) << " M): log-log slope of per-tuple cost "
        << format_double(result.slopes[i]) << '\n';
  return result;
}

}  // namespace mlpert
