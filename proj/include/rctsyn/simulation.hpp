#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "rctsyn/synthesis.hpp"

namespace rctsyn {

/// One simulated covariate: its marginal law, its coefficient in the linear
/// response, and the support declared to the synthesizer.
struct CovariateDGP {
  enum class Dist { uniform, beta, categorical };

  std::string name;
  Dist dist = Dist::uniform;
  double a = 0.0, b = 1.0;           // uniform range / beta shapes
  std::vector<double> probs;         // categorical level probabilities
  double coef = 0.0;

  ColumnSpec column_spec() const {
    ColumnSpec c;
    c.name = name;
    c.role = Role::covariate;
    if (dist == Dist::categorical) {
      c.kind = Kind::discrete;
      for (std::size_t l = 0; l < probs.size(); ++l) c.levels.push_back(std::to_string(l));
    } else {
      c.kind = Kind::continuous;
      c.lower = dist == Dist::uniform ? a : 0.0;
      c.upper = dist == Dist::uniform ? b : 1.0;
    }
    return c;
  }

  json to_json() const {
    json j;
    j["name"] = name;
    switch (dist) {
      case Dist::uniform:
        j["dist"] = "uniform";
        j["a"] = a;
        j["b"] = b;
        break;
      case Dist::beta:
        j["dist"] = "beta";
        j["a"] = a;
        j["b"] = b;
        break;
      case Dist::categorical:
        j["dist"] = "categorical";
        j["probs"] = probs;
        break;
    }
    j["coef"] = coef;
    return j;
  }

  static CovariateDGP from_json(const json &j) {
    CovariateDGP c;
    c.name = j.at("name").get<std::string>();
    const std::string dist = j.at("dist").get<std::string>();
    if (dist == "uniform") c.dist = Dist::uniform;
    else if (dist == "beta") c.dist = Dist::beta;
    else if (dist == "categorical") c.dist = Dist::categorical;
    else throw ValidationError("unknown covariate distribution '" + dist + "'");
    if (c.dist == Dist::categorical) {
      if (!j.contains("probs")) throw ValidationError("categorical covariate needs probs");
      c.probs = j["probs"].get<std::vector<double>>();
      double s = 0.0;
      for (double p : c.probs) {
        if (p < 0.0) throw ValidationError("negative category probability");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw ValidationError("category probabilities must sum to 1");
      }
    } else {
      c.a = j.value("a", 0.0);
      c.b = j.value("b", 1.0);
      if (c.dist == Dist::uniform && !(c.a < c.b)) {
        throw ValidationError("uniform covariate needs a < b");
      }
      if (c.dist == Dist::beta && (!(c.a > 0.0) || !(c.b > 0.0))) {
        throw ValidationError("beta covariate needs positive shapes");
      }
    }
    c.coef = j.value("coef", 0.0);
    return c;
  }
};

/// Data-generating process for one simulated trial: a single Bernoulli(1/2)
/// treatment, independent covariates, and a gaussian linear response.
struct DGPSpec {
  std::size_t n = 100;
  std::string response = "y";
  std::string treatment = "t1";
  double intercept = 0.0;
  double treatment_effect = 0.0;
  double residual_variance = 1.0;
  std::vector<CovariateDGP> covariates;

  Schema make_schema() const {
    Schema s;
    ColumnSpec resp;
    resp.name = response;
    resp.role = Role::response;
    resp.kind = Kind::continuous;
    s.columns.push_back(resp);
    ColumnSpec tr;
    tr.name = treatment;
    tr.role = Role::treatment;
    tr.kind = Kind::discrete;
    tr.levels = {"0", "1"};
    s.columns.push_back(tr);
    for (const auto &c : covariates) s.columns.push_back(c.column_spec());
    s.validate();
    return s;
  }

  json to_json() const {
    json cov = json::array();
    for (const auto &c : covariates) cov.push_back(c.to_json());
    return json{{"n", n},
                {"response", response},
                {"treatment", treatment},
                {"intercept", intercept},
                {"treatment_effect", treatment_effect},
                {"residual_variance", residual_variance},
                {"covariates", cov}};
  }

  static DGPSpec from_json(const json &j) {
    DGPSpec d;
    d.n = j.value("n", std::size_t{100});
    if (d.n < 2) throw ValidationError("simulated frames need at least 2 rows");
    d.response = j.value("response", std::string("y"));
    d.treatment = j.value("treatment", std::string("t1"));
    d.intercept = j.value("intercept", 0.0);
    d.treatment_effect = j.value("treatment_effect", 0.0);
    d.residual_variance = j.value("residual_variance", 1.0);
    if (!(d.residual_variance >= 0.0)) {
      throw ValidationError("residual variance must be non-negative");
    }
    if (j.contains("covariates")) {
      for (const auto &c : j["covariates"]) d.covariates.push_back(CovariateDGP::from_json(c));
    }
    return d;
  }
};

/// Draws one trial frame. Columns are generated one at a time (treatment,
/// covariates, then response noise), all independent.
inline Dataset generate_trial(const DGPSpec &spec, Rng &rng) {
  const Schema schema = spec.make_schema();
  Dataset d = Dataset::empty_like(schema, spec.n);
  const std::size_t t = schema.require(spec.treatment);
  for (std::size_t r = 0; r < spec.n; ++r) {
    d.levels(t)[r] = rng.bernoulli(0.5) ? 1 : 0;
  }
  for (const auto &cov : spec.covariates) {
    const std::size_t c = schema.require(cov.name);
    switch (cov.dist) {
      case CovariateDGP::Dist::uniform:
        for (std::size_t r = 0; r < spec.n; ++r) d.real(c)[r] = rng.uniform(cov.a, cov.b);
        break;
      case CovariateDGP::Dist::beta:
        for (std::size_t r = 0; r < spec.n; ++r) d.real(c)[r] = rng.beta(cov.a, cov.b);
        break;
      case CovariateDGP::Dist::categorical:
        for (std::size_t r = 0; r < spec.n; ++r) {
          d.levels(c)[r] = static_cast<std::int32_t>(rng.categorical(cov.probs));
        }
        break;
    }
  }
  const std::size_t yc = schema.require(spec.response);
  const double sd = std::sqrt(spec.residual_variance);
  for (std::size_t r = 0; r < spec.n; ++r) {
    double eta = spec.intercept + spec.treatment_effect * (d.levels(t)[r] == 1 ? 1.0 : 0.0);
    for (const auto &cov : spec.covariates) {
      eta += cov.coef * d.numeric_value(schema.require(cov.name), r);
    }
    d.real(yc)[r] = eta + sd * rng.normal();
  }
  return d;
}

/// A Monte-Carlo utility study: generate trials, synthesize each one several
/// times per privacy budget, and aggregate the five utility metrics.
struct StudyConfig {
  std::string name = "study";
  DGPSpec dgp;
  std::vector<double> epsilons = {0.1, 0.5, 1.0,
                                  std::numeric_limits<double>::infinity()};
  std::size_t n_private = 100;
  std::size_t n_synthetic_per_private = 20;
  double zeta = 2.0 / 3.0;
  Family outcome_family = Family::gaussian;
  StatSpec sensitive_stat;
  std::uint64_t seed = 1;

  json to_json() const {
    json eps = json::array();
    for (double e : epsilons) eps.push_back(std::isfinite(e) ? json(e) : json("inf"));
    return json{{"name", name},
                {"dgp", dgp.to_json()},
                {"epsilons", eps},
                {"n_private", n_private},
                {"n_synthetic_per_private", n_synthetic_per_private},
                {"zeta", zeta},
                {"outcome_family", family_name(outcome_family)},
                {"sensitive_stat", sensitive_stat.str()},
                {"seed", seed}};
  }

  static StudyConfig from_json(const json &j) {
    StudyConfig c;
    c.name = j.value("name", std::string("study"));
    if (!j.contains("dgp")) throw ValidationError("study config needs a dgp section");
    c.dgp = DGPSpec::from_json(j["dgp"]);
    if (j.contains("epsilons")) {
      c.epsilons.clear();
      for (const auto &e : j["epsilons"]) {
        c.epsilons.push_back(e.is_string() ? parse_epsilon(e.get<std::string>())
                                           : e.get<double>());
      }
    }
    if (c.epsilons.empty()) throw ValidationError("study needs at least one epsilon");
    for (double e : c.epsilons) {
      if (!(e > 0.0)) throw ValidationError("epsilons must be positive or inf");
    }
    c.n_private = j.value("n_private", std::size_t{100});
    c.n_synthetic_per_private = j.value("n_synthetic_per_private", std::size_t{20});
    if (c.n_private == 0 || c.n_synthetic_per_private == 0) {
      throw ValidationError("study needs positive replication counts");
    }
    if (j.contains("zeta")) {
      const auto &z = j["zeta"];
      c.zeta = z.is_string() ? parse_zeta(z.get<std::string>()) : z.get<double>();
    }
    if (j.contains("outcome_family")) {
      c.outcome_family = family_from_string(j["outcome_family"].get<std::string>());
    }
    if (j.contains("sensitive_stat")) {
      c.sensitive_stat = StatSpec::parse(j["sensitive_stat"].get<std::string>());
    } else if (!c.dgp.covariates.empty()) {
      c.sensitive_stat = {StatSpec::Kind::variance, c.dgp.covariates.front().name};
    } else {
      throw ValidationError("study needs a sensitive_stat (no covariate to default to)");
    }
    c.seed = j.value("seed", std::uint64_t{1});
    return c;
  }

  static StudyConfig load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open study config '" + path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception &e) {
      throw ValidationError(std::string("study config is not valid JSON: ") + e.what());
    }
    return from_json(j);
  }
};

struct EpsilonReport {
  double epsilon = 0.0;
  MetricsReport metrics;
  double metric5 = 0.0;
  std::uint64_t degenerate_histograms = 0;
};

struct StudyResult {
  StudyConfig config;
  std::vector<EpsilonReport> per_epsilon;

  json to_json() const {
    json reports = json::array();
    for (const auto &r : per_epsilon) {
      json jr;
      jr["epsilon"] = std::isfinite(r.epsilon) ? json(r.epsilon) : json("inf");
      jr["metrics"] = r.metrics.to_json();
      jr["metric5_" + config.sensitive_stat.str()] = r.metric5;
      jr["degenerate_histograms"] = r.degenerate_histograms;
      reports.push_back(jr);
    }
    return json{{"config", config.to_json()}, {"results", reports}};
  }

  void write_tables(const std::filesystem::path &dir) const;
};

namespace detail {

inline std::string budget_label(double e) {
  if (!std::isfinite(e)) return "inf";
  return format_general(e);
}

// Stream tags for the study harness (distinct from the pipeline's own tags,
// which hang off each task's derived seed).
inline constexpr std::uint64_t kStreamTrial = 101;
inline constexpr std::uint64_t kStreamTask = 102;

}  // namespace detail

/// Runs the study. Work is split across threads task by task, but every task
/// derives its own seed from (study seed, epsilon index, trial index,
/// replicate index) and results are reduced in task order, so the output is
/// identical whatever the thread count.
inline StudyResult run_study(const StudyConfig &cfg, unsigned threads = 1) {
  const Schema schema = cfg.dgp.make_schema();
  const ModelSpec model = ModelSpec::canonical(schema, Family::gaussian);

  // The trial frames and their fits are shared across budgets and replicates.
  std::vector<Dataset> trials;
  trials.reserve(cfg.n_private);
  std::vector<FitResult> trial_fits(cfg.n_private);
  std::vector<double> trial_stats(cfg.n_private);
  for (std::size_t i = 0; i < cfg.n_private; ++i) {
    Rng rng(derive_seed(cfg.seed, {detail::kStreamTrial, i}));
    trials.push_back(generate_trial(cfg.dgp, rng));
    trial_fits[i] = fit_model(trials[i], model);
    trial_stats[i] = eval_stat(cfg.sensitive_stat, trials[i]);
  }

  struct Task {
    std::size_t eps_idx, trial_idx, rep_idx;
  };
  std::vector<Task> tasks;
  tasks.reserve(cfg.epsilons.size() * cfg.n_private * cfg.n_synthetic_per_private);
  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    for (std::size_t i = 0; i < cfg.n_private; ++i) {
      for (std::size_t r = 0; r < cfg.n_synthetic_per_private; ++r) {
        tasks.push_back({e, i, r});
      }
    }
  }

  struct TaskResult {
    PairMetrics pair;
    double stat_sq_error = 0.0;
    bool degenerate = false;
  };
  std::vector<TaskResult> results(tasks.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t t = cursor.fetch_add(1);
      if (t >= tasks.size() || failed.load()) break;
      const Task &task = tasks[t];
      try {
        SynthesisConfig scfg;
        scfg.epsilon = cfg.epsilons[task.eps_idx];
        scfg.zeta = cfg.zeta;
        scfg.outcome_family = cfg.outcome_family;
        scfg.seed = derive_seed(
            cfg.seed, {detail::kStreamTask, task.eps_idx, task.trial_idx, task.rep_idx});
        const SynthesisOutput s = synthesize(trials[task.trial_idx], model, scfg);
        TaskResult &res = results[t];
        res.pair = compare_fits(trial_fits[task.trial_idx], s.released);
        const double stat = eval_stat(cfg.sensitive_stat, s.synthetic);
        const double diff = stat - trial_stats[task.trial_idx];
        res.stat_sq_error = diff * diff;
        res.degenerate = s.degenerate_histogram;
      } catch (const std::exception &e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        break;
      }
    }
  };

  const unsigned n_threads = std::max(1u, threads);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto &th : pool) th.join();
  }
  if (failed.load()) {
    throw NumericError("study task failed: " + first_error);
  }

  StudyResult out;
  out.config = cfg;
  const std::size_t per_eps = cfg.n_private * cfg.n_synthetic_per_private;
  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    std::vector<PairMetrics> pairs;
    pairs.reserve(per_eps);
    EpsilonReport rep;
    rep.epsilon = cfg.epsilons[e];
    double mse = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].eps_idx != e) continue;
      pairs.push_back(results[t].pair);
      mse += results[t].stat_sq_error;
      if (results[t].degenerate) ++rep.degenerate_histograms;
    }
    rep.metrics = aggregate_metrics(pairs);
    rep.metric5 = mse / static_cast<double>(per_eps);
    out.per_epsilon.push_back(std::move(rep));
  }
  return out;
}

inline void StudyResult::write_tables(const std::filesystem::path &dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv");
    if (!out) throw ValidationError("cannot write metrics.csv");
    std::vector<std::pair<std::string, MetricsReport>> blocks;
    for (const auto &r : per_epsilon) {
      blocks.emplace_back(detail::budget_label(r.epsilon), r.metrics);
    }
    write_metrics_csv(out, blocks, /*budget_column=*/true);
  }
  {
    std::ofstream out(dir / "metric5.csv");
    if (!out) throw ValidationError("cannot write metric5.csv");
    out << "privacy_budget,mse_" << config.sensitive_stat.str() << '\n';
    for (const auto &r : per_epsilon) {
      out << detail::budget_label(r.epsilon) << ','
          << detail::format_double(r.metric5) << '\n';
    }
  }
  {
    std::ofstream out(dir / "study.json");
    if (!out) throw ValidationError("cannot write study.json");
    out << to_json().dump(2) << '\n';
  }
}

}  // namespace rctsyn
