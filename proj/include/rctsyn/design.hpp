#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "rctsyn/dataset.hpp"
#include "rctsyn/rng.hpp"

namespace rctsyn {

enum class DesignVariant { simple, complete, stratified };

inline const char *design_name(DesignVariant v) {
  switch (v) {
    case DesignVariant::simple: return "simple";
    case DesignVariant::complete: return "complete";
    case DesignVariant::stratified: return "stratified";
  }
  return "?";
}

/// Randomization plan reconstructed from an observed frame. Arm 0 is control;
/// arm k is the k-th declared treatment column.
struct DesignSpec {
  DesignVariant variant = DesignVariant::simple;
  std::vector<std::string> arm_names;  // ["control", t1, t2, ...]

  // simple: marginal assignment probabilities per arm
  std::vector<double> arm_probs;
  // complete: fixed arm counts summing to the frame size
  std::vector<std::uint64_t> arm_counts;
  // stratified: fixed arm counts inside each block-level combination
  struct BlockGroup {
    std::vector<std::int32_t> levels;  // one level index per block column
    std::vector<std::uint64_t> arm_counts;
  };
  std::vector<BlockGroup> groups;        // sorted by levels
  std::vector<std::string> block_columns;

  std::size_t n_arms() const { return arm_names.size(); }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    if (variant == DesignVariant::complete) {
      t = std::accumulate(arm_counts.begin(), arm_counts.end(), std::uint64_t{0});
    } else if (variant == DesignVariant::stratified) {
      for (const auto &g : groups) {
        t += std::accumulate(g.arm_counts.begin(), g.arm_counts.end(),
                             std::uint64_t{0});
      }
    }
    return t;
  }

  void validate() const {
    if (arm_names.empty()) throw ValidationError("design declares no arms");
    switch (variant) {
      case DesignVariant::simple: {
        if (arm_probs.size() != arm_names.size()) {
          throw ValidationError("design probabilities do not match arm count");
        }
        double s = 0.0;
        for (double p : arm_probs) {
          if (p < 0.0) throw ValidationError("negative assignment probability");
          s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) {
          throw ValidationError("assignment probabilities must sum to 1");
        }
        break;
      }
      case DesignVariant::complete: {
        if (arm_counts.size() != arm_names.size()) {
          throw ValidationError("design counts do not match arm count");
        }
        if (total() == 0) throw ValidationError("design assigns zero units");
        break;
      }
      case DesignVariant::stratified: {
        if (groups.empty()) {
          throw ValidationError("stratified design without block groups");
        }
        if (block_columns.empty()) {
          throw ValidationError("stratified design without block columns");
        }
        for (const auto &g : groups) {
          if (g.levels.size() != block_columns.size()) {
            throw ValidationError("block group level width mismatch");
          }
          if (g.arm_counts.size() != arm_names.size()) {
            throw ValidationError("block group arm counts mismatch");
          }
          const auto sz = std::accumulate(g.arm_counts.begin(), g.arm_counts.end(),
                                          std::uint64_t{0});
          if (sz == 0) throw ValidationError("empty block combination in design");
        }
        break;
      }
    }
  }
};

/// Result of re-randomizing: per-row arm labels plus, for stratified designs,
/// the block level columns that define each row's stratum.
struct AssignmentMatrix {
  std::vector<std::int32_t> arm;
  std::vector<std::vector<std::int32_t>> block_levels;  // one per block column

  std::size_t n() const { return arm.size(); }
};

/// Reads the design back from the observed frame: arm shares for a simple
/// design, arm totals for a complete one, per-stratum arm totals (and the
/// exact stratum sizes) for a stratified one.
inline DesignSpec infer_design(const Dataset &d, DesignVariant variant) {
  const auto treat_cols = d.schema.treatment_indices();
  const auto block_cols = d.schema.block_indices();
  const std::size_t n = d.n_rows();
  if (n == 0) throw ValidationError("cannot infer a design from an empty frame");
  if (variant == DesignVariant::stratified && block_cols.empty()) {
    throw ValidationError("stratified design requested but schema has no block columns");
  }

  DesignSpec spec;
  spec.variant = variant;
  spec.arm_names.push_back("control");
  for (std::size_t t : treat_cols) spec.arm_names.push_back(d.schema.columns[t].name);
  const std::size_t n_arms = spec.arm_names.size();

  if (variant == DesignVariant::stratified) {
    for (std::size_t b : block_cols) spec.block_columns.push_back(d.schema.columns[b].name);
    std::map<std::vector<std::int32_t>, std::vector<std::uint64_t>> groups;
    std::vector<std::int32_t> key(block_cols.size());
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < block_cols.size(); ++i) {
        key[i] = d.levels(block_cols[i])[r];
      }
      auto it = groups.try_emplace(key, std::vector<std::uint64_t>(n_arms, 0)).first;
      ++it->second[static_cast<std::size_t>(d.arm_of(treat_cols, r))];
    }
    for (auto &[levels, counts] : groups) {
      spec.groups.push_back({levels, counts});
    }
  } else {
    std::vector<std::uint64_t> counts(n_arms, 0);
    for (std::size_t r = 0; r < n; ++r) {
      ++counts[static_cast<std::size_t>(d.arm_of(treat_cols, r))];
    }
    if (variant == DesignVariant::simple) {
      spec.arm_probs.resize(n_arms);
      for (std::size_t a = 0; a < n_arms; ++a) {
        spec.arm_probs[a] = static_cast<double>(counts[a]) / static_cast<double>(n);
      }
    } else {
      spec.arm_counts = counts;
    }
  }
  spec.validate();
  return spec;
}

namespace detail {

inline void shuffle_arms(std::vector<std::int32_t> &arms, Rng &rng) {
  for (std::size_t i = arms.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(arms[i - 1], arms[j]);
  }
}

inline std::vector<std::int32_t> expand_counts(
    const std::vector<std::uint64_t> &counts) {
  std::vector<std::int32_t> arms;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    arms.insert(arms.end(), counts[a], static_cast<std::int32_t>(a));
  }
  return arms;
}

}  // namespace detail

/// Draws a fresh assignment of n_out units under the design. Count-based
/// designs replicate their counts exactly, so n_out must equal the design
/// total; stratified output is grouped by stratum, with each stratum's exact
/// size and arm counts preserved and its labels completely re-randomized.
inline AssignmentMatrix assign(const DesignSpec &spec, std::size_t n_out, Rng &rng) {
  spec.validate();
  AssignmentMatrix out;
  switch (spec.variant) {
    case DesignVariant::simple: {
      out.arm.resize(n_out);
      for (std::size_t r = 0; r < n_out; ++r) {
        out.arm[r] = static_cast<std::int32_t>(rng.categorical(spec.arm_probs));
      }
      break;
    }
    case DesignVariant::complete: {
      if (n_out != spec.total()) {
        throw ValidationError(
            "complete randomization fixes the output size at " +
            std::to_string(spec.total()) + " rows; got " + std::to_string(n_out));
      }
      out.arm = detail::expand_counts(spec.arm_counts);
      detail::shuffle_arms(out.arm, rng);
      break;
    }
    case DesignVariant::stratified: {
      if (n_out != spec.total()) {
        throw ValidationError(
            "stratified randomization fixes the output size at " +
            std::to_string(spec.total()) + " rows; got " + std::to_string(n_out));
      }
      out.block_levels.assign(spec.block_columns.size(), {});
      for (const auto &g : spec.groups) {
        auto arms = detail::expand_counts(g.arm_counts);
        detail::shuffle_arms(arms, rng);
        out.arm.insert(out.arm.end(), arms.begin(), arms.end());
        for (std::size_t i = 0; i < spec.block_columns.size(); ++i) {
          out.block_levels[i].insert(out.block_levels[i].end(), arms.size(),
                                     g.levels[i]);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace rctsyn
