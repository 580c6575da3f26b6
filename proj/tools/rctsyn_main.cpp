// Command-line front end: synthesize one release, evaluate utility metrics
// for existing synthetic frames, or run a Monte-Carlo utility study.
//
// Exit codes: 0 on success, 2 for validation/configuration problems, 3 for
// runtime or numeric failures. Diagnostics go to stderr; data goes to files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rctsyn/rctsyn.hpp"

namespace fs = std::filesystem;
using namespace rctsyn;

namespace {

json load_json_file(const std::string &path, const char *what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return json::parse(in);
  } catch (const std::exception &e) {
    throw ValidationError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

Schema load_schema(const std::string &path) {
  return Schema::from_json(load_json_file(path, "schema"));
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string epsilon_label(double e) {
  return std::isfinite(e) ? detail::format_double(e) : std::string("inf");
}

/// Expands one --synthetic argument: a literal path, or a pattern whose final
/// component may contain '*'. Matches are sorted so runs are reproducible.
std::vector<std::string> expand_pattern(const std::string &arg) {
  if (arg.find('*') == std::string::npos) return {arg};
  const fs::path p(arg);
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  const std::string pat = p.filename().string();
  if (dir.string().find('*') != std::string::npos) {
    throw ValidationError("'*' is only supported in the file name: " + arg);
  }
  const auto matches = [&pat](const std::string &name) {
    // Greedy '*' matching over the final path component.
    std::size_t n = 0, s = 0;
    std::size_t star = std::string::npos, star_n = 0;
    while (n < name.size()) {
      if (s < pat.size() && (pat[s] == name[n])) {
        ++s;
        ++n;
      } else if (s < pat.size() && pat[s] == '*') {
        star = s++;
        star_n = n;
      } else if (star != std::string::npos) {
        s = star + 1;
        n = ++star_n;
      } else {
        return false;
      }
    }
    while (s < pat.size() && pat[s] == '*') ++s;
    return s == pat.size();
  };
  std::vector<std::string> out;
  if (fs::is_directory(dir)) {
    for (const auto &entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && matches(entry.path().filename().string())) {
        out.push_back(entry.path().string());
      }
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no files match '" + arg + "'");
  return out;
}

struct SynthesizeArgs {
  std::string data, schema, model, config, out;
  std::string epsilon, zeta, design, outcome_family;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_out;
};

int run_synthesize(const SynthesizeArgs &a) {
  SynthesisConfig cfg;
  bool seed_given = false;
  if (!a.config.empty()) {
    const json j = load_json_file(a.config, "synthesis config");
    cfg = SynthesisConfig::from_json(j);
    seed_given = j.contains("seed");
  }
  if (!a.epsilon.empty()) cfg.epsilon = parse_epsilon(a.epsilon);
  if (!a.zeta.empty()) cfg.zeta = parse_zeta(a.zeta);
  if (!a.design.empty()) cfg.design = design_choice_from_string(a.design);
  if (!a.outcome_family.empty()) cfg.outcome_family = family_from_string(a.outcome_family);
  if (a.n_out) cfg.n_out = a.n_out;
  if (a.seed) {
    cfg.seed = *a.seed;
    seed_given = true;
  }
  if (!seed_given) {
    cfg.seed = random_seed();
    std::cerr << "note: no seed given; using generated seed " << cfg.seed << "\n";
  }

  const Schema schema = load_schema(a.schema);
  const bool dp = std::isfinite(cfg.epsilon);
  const Dataset data = load_dataset_file(a.data, schema, dp);
  const ModelSpec model =
      a.model.empty() ? ModelSpec::canonical(schema)
                      : ModelSpec::from_json(load_json_file(a.model, "model"), schema);

  const SynthesisOutput result = synthesize(data, model, cfg);

  std::cerr << "rctsyn synthesize: data=" << a.data << " schema=" << a.schema
            << " model=" << (a.model.empty() ? "<canonical>" : a.model)
            << " epsilon=" << epsilon_label(cfg.epsilon)
            << " zeta=" << detail::format_double(cfg.zeta)
            << " n_out=" << *result.config.n_out
            << " design=" << design_name(result.design_used)
            << " outcome_family="
            << family_name(cfg.outcome_family.value_or(model.family))
            << " seed=" << cfg.seed << " out=" << a.out << "\n";
  for (const auto &w : result.warnings) std::cerr << "warning: " << w << "\n";

  write_release(result, a.out);
  std::cerr << "wrote " << (fs::path(a.out) / "synthetic.csv").string() << " and "
            << (fs::path(a.out) / "release.json").string() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string data, schema, model, out, stat;
  std::vector<std::string> synthetic;
};

int run_evaluate(const EvaluateArgs &a) {
  const Schema schema = load_schema(a.schema);
  const Dataset original = load_dataset_file(a.data, schema, /*dp_mode=*/false);
  const ModelSpec model =
      a.model.empty() ? ModelSpec::canonical(schema)
                      : ModelSpec::from_json(load_json_file(a.model, "model"), schema);

  std::vector<std::string> paths;
  for (const auto &arg : a.synthetic) {
    const auto expanded = expand_pattern(arg);
    paths.insert(paths.end(), expanded.begin(), expanded.end());
  }
  if (paths.empty()) throw ValidationError("evaluate needs at least one synthetic frame");

  std::cerr << "rctsyn evaluate: data=" << a.data << " schema=" << a.schema
            << " model=" << (a.model.empty() ? "<canonical>" : a.model)
            << " synthetic_frames=" << paths.size()
            << (a.stat.empty() ? "" : " sensitive_stat=" + a.stat)
            << " out=" << a.out << "\n";

  const FitResult original_fit = fit_model(original, model);
  std::vector<PairMetrics> pairs;
  std::vector<Dataset> synthetics;
  pairs.reserve(paths.size());
  synthetics.reserve(paths.size());
  for (const auto &p : paths) {
    synthetics.push_back(load_dataset_file(p, schema, /*dp_mode=*/false));
    pairs.push_back(compare_fits(original_fit, fit_model(synthetics.back(), model)));
  }
  const MetricsReport report = aggregate_metrics(pairs);

  json j;
  j["pairs"] = report.n_pairs;
  j["metrics"] = report.to_json();
  std::optional<double> metric5;
  if (!a.stat.empty()) {
    const StatSpec spec = StatSpec::parse(a.stat);
    metric5 = sensitive_stat_mse(spec, original, synthetics);
    j["metric5_" + spec.str()] = *metric5;
  }

  fs::create_directories(a.out);
  {
    std::ofstream out(fs::path(a.out) / "metrics.csv");
    if (!out) throw ValidationError("cannot write metrics.csv");
    write_metrics_csv(out, {{"", report}}, /*budget_column=*/false);
  }
  {
    std::ofstream out(fs::path(a.out) / "metrics.json");
    if (!out) throw ValidationError("cannot write metrics.json");
    out << j.dump(2) << '\n';
  }
  std::cerr << "wrote " << (fs::path(a.out) / "metrics.csv").string() << " and "
            << (fs::path(a.out) / "metrics.json").string() << "\n";
  return 0;
}

struct SimulateArgs {
  std::string config, out;
  std::optional<std::size_t> runs, reps;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

int run_simulate(const SimulateArgs &a) {
  const json raw = load_json_file(a.config, "study config");
  StudyConfig cfg = StudyConfig::from_json(raw);
  if (a.runs) cfg.n_private = *a.runs;
  if (a.reps) cfg.n_synthetic_per_private = *a.reps;
  if (a.seed) {
    cfg.seed = *a.seed;
  } else if (!raw.contains("seed")) {
    cfg.seed = random_seed();
    std::cerr << "note: no seed given; using generated seed " << cfg.seed << "\n";
  }

  std::string eps_list;
  for (double e : cfg.epsilons) {
    if (!eps_list.empty()) eps_list += ",";
    eps_list += epsilon_label(e);
  }
  std::cerr << "rctsyn simulate: config=" << a.config << " name=" << cfg.name
            << " epsilons=" << eps_list << " n_private=" << cfg.n_private
            << " n_synthetic_per_private=" << cfg.n_synthetic_per_private
            << " zeta=" << detail::format_double(cfg.zeta)
            << " outcome_family=" << family_name(cfg.outcome_family)
            << " sensitive_stat=" << cfg.sensitive_stat.str()
            << " seed=" << cfg.seed << " threads=" << a.threads
            << " out=" << a.out << "\n";

  const StudyResult result = run_study(cfg, a.threads);
  result.write_tables(a.out);
  std::uint64_t degenerate = 0;
  for (const auto &r : result.per_epsilon) degenerate += r.degenerate_histograms;
  if (degenerate > 0) {
    std::cerr << "warning: " << degenerate
              << " synthesis run(s) fell back to a uniform histogram\n";
  }
  std::cerr << "wrote metrics.csv, metric5.csv, study.json under " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"epsilon-differentially-private synthetic trial data"};
  app.require_subcommand(1);

  SynthesizeArgs syn;
  auto *syn_cmd = app.add_subcommand(
      "synthesize", "generate one synthetic frame and its released inference");
  syn_cmd->add_option("--data", syn.data, "original frame (CSV)")->required();
  syn_cmd->add_option("--schema", syn.schema, "schema (JSON)")->required();
  syn_cmd->add_option("--model", syn.model, "model spec (JSON); default: canonical");
  syn_cmd->add_option("--config", syn.config, "synthesis config (JSON); flags override");
  syn_cmd->add_option("--epsilon", syn.epsilon, "privacy budget (> 0 or 'inf')");
  syn_cmd->add_option("--zeta", syn.zeta, "bin growth exponent in (0,1), e.g. '2/3'");
  syn_cmd->add_option("--seed", syn.seed, "RNG seed");
  syn_cmd->add_option("--n-out", syn.n_out, "synthetic rows (default: input rows)");
  syn_cmd->add_option("--design", syn.design, "infer|simple|complete|stratified");
  syn_cmd->add_option("--outcome-model", syn.outcome_family,
                      "imputation family: gaussian|logistic");
  syn_cmd->add_option("--out", syn.out, "output directory")->required();

  EvaluateArgs ev;
  auto *ev_cmd = app.add_subcommand(
      "evaluate", "utility metrics of synthetic frames against the original");
  ev_cmd->add_option("--data", ev.data, "original frame (CSV)")->required();
  ev_cmd->add_option("--schema", ev.schema, "schema (JSON)")->required();
  ev_cmd->add_option("--model", ev.model, "model spec (JSON); default: canonical");
  ev_cmd->add_option("--synthetic", ev.synthetic,
                     "synthetic frame(s); '*' patterns allowed")
      ->required();
  ev_cmd->add_option("--sensitive-stat", ev.stat,
                     "metric 5 target, e.g. 'variance:x1'");
  ev_cmd->add_option("--out", ev.out, "output directory")->required();

  SimulateArgs sim;
  auto *sim_cmd = app.add_subcommand("simulate", "run a Monte-Carlo utility study");
  sim_cmd->add_option("--config", sim.config, "study config (JSON)")->required();
  sim_cmd->add_option("--runs", sim.runs, "override: number of simulated trials");
  sim_cmd->add_option("--reps", sim.reps, "override: syntheses per trial");
  sim_cmd->add_option("--seed", sim.seed, "override: study seed");
  sim_cmd->add_option("--threads", sim.threads, "worker threads (default 1)");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (syn_cmd->parsed()) return run_synthesize(syn);
    if (ev_cmd->parsed()) return run_evaluate(ev);
    if (sim_cmd->parsed()) return run_simulate(sim);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
