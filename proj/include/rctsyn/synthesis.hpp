#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rctsyn/design.hpp"
#include "rctsyn/histogram.hpp"
#include "rctsyn/metrics.hpp"
#include "rctsyn/regression.hpp"

namespace rctsyn {

/// Accepts "inf"/"infinity" or a positive number.
inline double parse_epsilon(const std::string &text) {
  if (text == "inf" || text == "infinity" || text == "Inf") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos == text.size() && v > 0.0) return v;
  } catch (...) {
  }
  throw ValidationError("epsilon must be a positive number or 'inf', got '" + text + "'");
}

/// Accepts a decimal in (0,1) or a fraction like "2/3".
inline double parse_zeta(const std::string &text) {
  try {
    std::size_t pos = 0;
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
      const double num = std::stod(text.substr(0, slash), &pos);
      const double den = std::stod(text.substr(slash + 1));
      if (den != 0.0) {
        const double z = num / den;
        if (z > 0.0 && z < 1.0) return z;
      }
    } else {
      const double z = std::stod(text, &pos);
      if (pos == text.size() && z > 0.0 && z < 1.0) return z;
    }
  } catch (...) {
  }
  throw ValidationError("zeta must lie in (0,1), written as a decimal or 'a/b'; got '" +
                        text + "'");
}

enum class DesignChoice { infer, simple, complete, stratified };

inline DesignChoice design_choice_from_string(const std::string &s) {
  if (s == "infer") return DesignChoice::infer;
  if (s == "simple") return DesignChoice::simple;
  if (s == "complete") return DesignChoice::complete;
  if (s == "stratified") return DesignChoice::stratified;
  throw ValidationError("unknown design '" + s + "'");
}

struct SynthesisConfig {
  double epsilon = std::numeric_limits<double>::infinity();
  double zeta = 2.0 / 3.0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_out;  // default: as many rows as the input
  DesignChoice design = DesignChoice::infer;
  std::optional<Family> outcome_family;  // default: the release model's family
  std::uint64_t cell_limit = kDefaultCellLimit;
  PerturbOptions perturb;

  json to_json() const {
    json j;
    j["epsilon"] = std::isfinite(epsilon) ? json(epsilon) : json("inf");
    j["zeta"] = zeta;
    j["seed"] = seed;
    if (n_out) j["n_out"] = *n_out;
    switch (design) {
      case DesignChoice::infer: j["design"] = "infer"; break;
      case DesignChoice::simple: j["design"] = "simple"; break;
      case DesignChoice::complete: j["design"] = "complete"; break;
      case DesignChoice::stratified: j["design"] = "stratified"; break;
    }
    if (outcome_family) j["outcome_family"] = family_name(*outcome_family);
    j["cell_limit"] = cell_limit;
    return j;
  }

  static SynthesisConfig from_json(const json &j) {
    SynthesisConfig cfg;
    if (j.contains("epsilon")) {
      const auto &e = j["epsilon"];
      cfg.epsilon = e.is_string() ? parse_epsilon(e.get<std::string>())
                                  : e.get<double>();
      if (!(cfg.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    }
    if (j.contains("zeta")) {
      const auto &z = j["zeta"];
      cfg.zeta = z.is_string() ? parse_zeta(z.get<std::string>()) : z.get<double>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_out")) cfg.n_out = j["n_out"].get<std::size_t>();
    if (j.contains("design")) {
      cfg.design = design_choice_from_string(j["design"].get<std::string>());
    }
    if (j.contains("outcome_family")) {
      cfg.outcome_family = family_from_string(j["outcome_family"].get<std::string>());
    }
    if (j.contains("cell_limit")) cfg.cell_limit = j["cell_limit"].get<std::uint64_t>();
    return cfg;
  }
};

/// Everything one synthesis run produces. `released` is the public product
/// (inference refit on the synthetic frame); the two fits on the original
/// frame stay in memory for utility evaluation and are never serialized into
/// the release bundle.
struct SynthesisOutput {
  Dataset synthetic;
  FitResult released;
  FitResult original_fit;    // release-model family, fit on the original frame
  FitResult imputation_fit;  // outcome-family fit that generated the responses
  ModelSpec model;
  SynthesisConfig config;    // resolved: n_out and design filled in
  DesignVariant design_used = DesignVariant::simple;
  std::vector<std::string> warnings;
  bool degenerate_histogram = false;

  json release_json() const {
    json j;
    j["mechanism"] = kMechanism;
    j["version"] = kVersion;
    j["config"] = config.to_json();
    j["config"]["design"] = design_name(design_used);
    j["model"] = model.to_json();
    j["privacy"] = json{
        {"epsilon", std::isfinite(config.epsilon) ? json(config.epsilon) : json("inf")},
        {"covariates", "epsilon-DP perturbed histogram"},
        {"blocks_and_design",
         "block labels and arm counts are reproduced as-is and are not protected"},
        {"released_inference",
         "estimates and standard errors are computed on the synthetic frame and "
         "carry no separate formal privacy guarantee of their own"},
        {"budget_scope", "single release; no composition accounting"}};
    j["warnings"] = warnings;
    j["n"] = synthetic.n_rows();
    j["released_fit"] = released.to_json();
    return j;
  }
};

namespace detail {

inline DesignVariant resolve_design(DesignChoice choice, bool has_blocks) {
  switch (choice) {
    case DesignChoice::simple: return DesignVariant::simple;
    case DesignChoice::complete: return DesignVariant::complete;
    case DesignChoice::stratified: return DesignVariant::stratified;
    case DesignChoice::infer:
      return has_blocks ? DesignVariant::stratified : DesignVariant::simple;
  }
  return DesignVariant::simple;
}

// Sub-stream tags: each pipeline stage draws from its own derived stream, so
// a change in one stage's draw count cannot shift another stage's results.
inline constexpr std::uint64_t kStreamHistogram = 1;
inline constexpr std::uint64_t kStreamSampling = 2;
inline constexpr std::uint64_t kStreamAssignment = 3;
inline constexpr std::uint64_t kStreamImputation = 4;

}  // namespace detail

/// Runs the full mechanism on one frame:
///   count covariates on the grid -> perturb -> resample covariates ->
///   re-randomize treatment -> fit the outcome model on the original frame ->
///   impute responses -> refit on the synthetic frame.
inline SynthesisOutput synthesize(const Dataset &original, const ModelSpec &model,
                                  const SynthesisConfig &cfg) {
  model.validate_against(original.schema);
  const Schema &schema = original.schema;
  const std::size_t n = original.n_rows();
  const bool dp = std::isfinite(cfg.epsilon);
  const std::size_t n_out = cfg.n_out.value_or(n);
  if (n_out == 0) throw ValidationError("n_out must be positive");

  if (dp) {
    for (std::size_t c : schema.covariate_indices()) {
      const ColumnSpec &spec = schema.columns[c];
      if (spec.kind == Kind::continuous && !spec.bounded()) {
        throw ValidationError(
            "a private release requires finite declared bounds for continuous "
            "covariate '" + spec.name + "'");
      }
    }
  }

  SynthesisOutput out;
  out.model = model;
  out.config = cfg;
  out.config.n_out = n_out;

  // Step 1-2: grid and observed counts.
  GridOptions gopts;
  gopts.cell_limit = cfg.cell_limit;
  gopts.observed_fallback = dp ? nullptr : &original;
  const BinGrid grid = build_grid(schema, n, cfg.zeta, gopts);
  const SparseCounts counts = count_cells(original, grid);
  if (counts.clamped > 0) {
    out.warnings.push_back(std::to_string(counts.clamped) +
                           " value(s) outside the declared support were clamped "
                           "to the edge bins");
  }

  // Step 3: perturb and resample covariates.
  Rng rng_hist(derive_seed(cfg.seed, {detail::kStreamHistogram}));
  const PerturbedHistogram hist = perturb(counts, grid, cfg.epsilon, rng_hist, cfg.perturb);
  if (hist.degenerate_uniform) {
    out.degenerate_histogram = true;
    out.warnings.push_back(
        "perturbed histogram lost all mass; covariates were drawn uniformly "
        "over the grid");
  }
  Rng rng_sample(derive_seed(cfg.seed, {detail::kStreamSampling}));
  const auto cov_cols = sample_covariates(hist, grid, n_out, rng_sample);

  // Step 4: re-randomized treatment under the (inferred) design.
  out.design_used = detail::resolve_design(cfg.design, !schema.block_indices().empty());
  if (!schema.block_indices().empty() && out.design_used != DesignVariant::stratified) {
    throw ValidationError(
        "schema declares block columns; use the stratified design so the "
        "synthetic frame can reproduce them");
  }
  const DesignSpec design = infer_design(original, out.design_used);
  if (out.design_used != DesignVariant::simple && n_out != design.total()) {
    throw ValidationError(
        "count-based designs fix the synthetic size at the original " +
        std::to_string(design.total()) + " rows; requested n_out=" +
        std::to_string(n_out));
  }
  Rng rng_assign(derive_seed(cfg.seed, {detail::kStreamAssignment}));
  const AssignmentMatrix assignment = assign(design, n_out, rng_assign);

  // Steps 5-6: fit the outcome model on the original frame, impute responses.
  const Family outcome_family = cfg.outcome_family.value_or(model.family);
  out.imputation_fit = fit_model(original, model.with_family(outcome_family));
  out.original_fit = (outcome_family == model.family)
                         ? out.imputation_fit
                         : fit_model(original, model);

  Dataset synth = Dataset::empty_like(schema, n_out);
  const auto treat_cols = schema.treatment_indices();
  for (std::size_t r = 0; r < n_out; ++r) {
    const auto arm = assignment.arm[r];
    for (std::size_t k = 0; k < treat_cols.size(); ++k) {
      synth.levels(treat_cols[k])[r] =
          (arm == static_cast<std::int32_t>(k) + 1) ? 1 : 0;
    }
  }
  const auto block_cols = schema.block_indices();
  for (std::size_t i = 0; i < block_cols.size(); ++i) {
    synth.levels(block_cols[i]) = assignment.block_levels[i];
  }
  const auto cov_idx = schema.covariate_indices();
  for (std::size_t i = 0; i < cov_idx.size(); ++i) {
    synth.columns[cov_idx[i]] = cov_cols[i];
  }

  const Eigen::MatrixXd M = design_matrix(synth, model);
  Rng rng_impute(derive_seed(cfg.seed, {detail::kStreamImputation}));
  const std::vector<double> y = impute_response(M, out.imputation_fit, rng_impute);
  const std::size_t resp = schema.response_index();
  if (schema.columns[resp].kind == Kind::continuous) {
    synth.real(resp) = y;
  } else {
    auto &lv = synth.levels(resp);
    for (std::size_t r = 0; r < n_out; ++r) {
      const int idx = schema.columns[resp].level_index(y[r] == 1.0 ? "1" : "0");
      if (idx < 0) {
        throw ValidationError("discrete response must declare levels '0' and '1'");
      }
      lv[r] = idx;
    }
  }

  // Step 7: the released inference is a fresh fit on the synthetic frame.
  out.synthetic = std::move(synth);
  out.released = fit_model(out.synthetic, model);
  return out;
}

/// Writes the release bundle: the synthetic frame and the inference/provenance
/// JSON. Nothing derived from the original frame beyond the released fit and
/// declared design enters the directory.
inline void write_release(const SynthesisOutput &out, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_csv_file(out.synthetic, (dir / "synthetic.csv").string());
  std::ofstream rj(dir / "release.json");
  if (!rj) throw ValidationError("cannot write release.json");
  rj << out.release_json().dump(2) << '\n';
}

}  // namespace rctsyn
