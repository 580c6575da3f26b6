#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rctsyn/grid.hpp"
#include "rctsyn/rng.hpp"

namespace rctsyn {

struct PerturbOptions {
  /// Largest number of empty-cell masses drawn individually. Beyond it the
  /// empty cells are represented by one aggregate (count, total mass) pair,
  /// so grids with astronomically many cells stay cheap.
  std::uint64_t eager_empty_limit = 1ull << 22;
};

struct NoiseAccounting {
  std::uint64_t laplace = 0;      // one per occupied cell
  std::uint64_t binomial = 0;     // one, for the number of positive empty cells
  std::uint64_t exponential = 0;  // one per eagerly drawn empty-cell mass
  std::uint64_t gamma = 0;        // one, when the empty masses are aggregated
};

/// Noisy histogram after clamping negatives to zero. Only cells carrying
/// positive mass are represented:
///   - `occupied`: cells that held data, with their (positive) noisy counts;
///   - `pending`: masses of positive empty cells whose location has not yet
///     been fixed (drawn eagerly, assigned lazily at first hit);
///   - `aggregate_*`: the same population when it is too large to enumerate,
///     summarized by its exact count and the exact distribution of its total.
/// The split never changes the sampling distribution, only the bookkeeping:
/// empty cells are exchangeable, so their locations and the division of their
/// total mass can be materialized on demand.
struct PerturbedHistogram {
  std::vector<std::pair<std::uint64_t, double>> occupied;
  std::vector<std::uint64_t> clamped;  // occupied cells whose noisy count hit 0
  std::vector<double> pending;
  std::uint64_t aggregate_count = 0;
  double aggregate_mass = 0.0;

  std::uint64_t k_empty_positive = 0;  // total positive empty cells
  double epsilon = std::numeric_limits<double>::infinity();
  std::uint64_t q = 0;
  std::uint64_t n = 0;
  double normalizer = 0.0;  // total positive mass; frequencies are mass/normalizer
  bool degenerate_uniform = false;
  NoiseAccounting draws;

  json dump() const {
    json occ = json::array();
    for (const auto &[cell, mass] : occupied) {
      occ.push_back(json::array({cell, mass}));
    }
    json j;
    j["q"] = q;
    j["n"] = n;
    j["epsilon"] = std::isfinite(epsilon) ? json(epsilon) : json("inf");
    j["normalizer"] = normalizer;
    j["degenerate_uniform"] = degenerate_uniform;
    j["occupied"] = occ;
    j["clamped_cells"] = clamped.size();
    j["pending_masses"] = pending;
    j["aggregate"] = json{{"count", aggregate_count}, {"mass", aggregate_mass}};
    j["draws"] = json{{"laplace", draws.laplace},
                      {"binomial", draws.binomial},
                      {"exponential", draws.exponential},
                      {"gamma", draws.gamma}};
    return j;
  }
};

/// Applies the privacy noise to the counted histogram.
///
/// Occupied cells get independent Laplace(2/epsilon) noise; survivors are the
/// ones still positive. For the q - |occupied| untouched cells, pure Laplace
/// noise is positive with probability 1/2 and its positive part is
/// Exponential(mean 2/epsilon), so the number of positive empty cells is one
/// Binomial(q - |occupied|, 1/2) draw and their masses are iid exponentials.
/// Which empty cells they are is deferred to the sampler.
///
/// With epsilon = inf the observed counts pass through unchanged.
inline PerturbedHistogram perturb(const SparseCounts &counts, const BinGrid &grid,
                                  double epsilon, Rng &rng,
                                  const PerturbOptions &opts = {}) {
  if (!(epsilon > 0.0)) {
    throw ValidationError("epsilon must be positive (or inf for no privacy)");
  }
  PerturbedHistogram h;
  h.epsilon = epsilon;
  h.q = grid.q;
  h.n = counts.total;

  if (!std::isfinite(epsilon)) {
    h.occupied.reserve(counts.cells.size());
    double total = 0.0;
    for (const auto &[cell, c] : counts.cells) {
      h.occupied.emplace_back(cell, static_cast<double>(c));
      total += static_cast<double>(c);
    }
    h.normalizer = total;
    h.degenerate_uniform = h.occupied.empty();
    return h;
  }

  const double scale = 2.0 / epsilon;
  double total = 0.0;
  for (const auto &[cell, c] : counts.cells) {
    ++h.draws.laplace;
    const double noisy = static_cast<double>(c) + rng.laplace(scale);
    if (noisy > 0.0) {
      h.occupied.emplace_back(cell, noisy);
      total += noisy;
    } else {
      // Clamped to zero, but still an occupied cell: it must stay at zero
      // mass, not rejoin the pool of empty cells eligible for noise mass.
      h.clamped.push_back(cell);
    }
  }
  const std::uint64_t empty = grid.q - static_cast<std::uint64_t>(counts.cells.size());
  ++h.draws.binomial;
  const std::uint64_t k = rng.binomial_half(empty);
  h.k_empty_positive = k;
  if (k <= opts.eager_empty_limit) {
    h.pending.reserve(k);
    for (std::uint64_t i = 0; i < k; ++i) {
      h.pending.push_back(rng.exponential(scale));
      total += h.pending.back();
    }
    h.draws.exponential = k;
  } else {
    h.aggregate_count = k;
    ++h.draws.gamma;
    h.aggregate_mass = rng.gamma(static_cast<double>(k), scale);
    total += h.aggregate_mass;
  }
  h.normalizer = total;
  if (!(total > 0.0)) {
    // Every cell was wiped out: the perturbed histogram carries no signal and
    // the only faithful release is the uniform distribution over all cells.
    h.degenerate_uniform = true;
    h.normalizer = 0.0;
    h.occupied.clear();
    h.pending.clear();
  }
  return h;
}

/// Draws cells (and covariate rows) from a perturbed histogram.
///
/// Static entries (occupied cells and eagerly drawn empty masses) live in one
/// cumulative table searched by bisection. A pending mass is bound to a
/// concrete empty cell the first time it is hit, by uniform rejection against
/// the cells already in use. The aggregated region, when present, is
/// materialized one cell at a time by stick-breaking: conditional on landing
/// among k remaining exchangeable exponential masses with total mass T, the
/// hit cell's share of T is Beta(2, k-1), the hit cell's index is uniform over
/// the unused cells, and the remaining k-1 masses stay exchangeable with the
/// reduced total. This reproduces, draw for draw, the distribution of a dense
/// sampler that had enumerated every empty cell up front.
class HistogramSampler {
 public:
  HistogramSampler(const PerturbedHistogram &hist, const BinGrid &grid)
      : hist_(&hist), grid_(&grid) {
    const std::size_t n_static = hist.occupied.size() + hist.pending.size();
    cum_.reserve(n_static);
    entry_cell_.reserve(n_static);
    double run = 0.0;
    for (const auto &[cell, mass] : hist.occupied) {
      run += mass;
      cum_.push_back(run);
      entry_cell_.push_back(cell);
      used_.insert(cell);
    }
    used_.insert(hist.clamped.begin(), hist.clamped.end());
    for (const double mass : hist.pending) {
      run += mass;
      cum_.push_back(run);
      entry_cell_.push_back(kUnassigned);
    }
    static_total_ = run;
    agg_left_ = hist.aggregate_count;
    agg_mass_left_ = hist.aggregate_mass;
  }

  std::uint64_t sample_cell(Rng &rng) {
    if (hist_->degenerate_uniform) return rng.below(grid_->q);
    const double u = rng.uniform01() * hist_->normalizer;
    if (u < static_total_ || (agg_left_ == 0 && agg_cells_.empty())) {
      std::size_t idx = static_cast<std::size_t>(
          std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
      if (idx >= cum_.size()) idx = cum_.size() - 1;  // rounding spill
      if (entry_cell_[idx] == kUnassigned) entry_cell_[idx] = fresh_cell(rng);
      return entry_cell_[idx];
    }
    double v = u - static_total_;
    for (const auto &[cell, mass] : agg_cells_) {
      if (v < mass) return cell;
      v -= mass;
    }
    if (agg_left_ == 0) {
      return agg_cells_.back().first;  // rounding spill
    }
    double share;
    if (agg_left_ == 1) {
      share = agg_mass_left_;
    } else {
      share = agg_mass_left_ * rng.beta(2.0, static_cast<double>(agg_left_) - 1.0);
    }
    const std::uint64_t cell = fresh_cell(rng);
    agg_cells_.emplace_back(cell, share);
    --agg_left_;
    agg_mass_left_ = std::max(0.0, agg_mass_left_ - share);
    return cell;
  }

  std::size_t materialized_aggregate_cells() const { return agg_cells_.size(); }

 private:
  static constexpr std::uint64_t kUnassigned = ~0ull;

  std::uint64_t fresh_cell(Rng &rng) {
    // Rejection is safe: positive empty cells never outnumber empty cells,
    // so a free index always exists while one is still needed.
    for (;;) {
      const std::uint64_t c = rng.below(grid_->q);
      if (used_.insert(c).second) return c;
    }
  }

  const PerturbedHistogram *hist_;
  const BinGrid *grid_;
  std::vector<double> cum_;
  std::vector<std::uint64_t> entry_cell_;
  std::unordered_set<std::uint64_t> used_;
  double static_total_ = 0.0;
  std::uint64_t agg_left_ = 0;
  double agg_mass_left_ = 0.0;
  std::vector<std::pair<std::uint64_t, double>> agg_cells_;
};

/// Draws n_out covariate rows: a cell per row, then a value per axis within
/// the cell (uniform over the bin for continuous axes; for a collapsed
/// discrete bin, uniform over the levels it merged). Returns one column per
/// grid axis, aligned with grid.dims.
inline std::vector<ColumnValues> sample_covariates(const PerturbedHistogram &hist,
                                                   const BinGrid &grid,
                                                   std::size_t n_out, Rng &rng) {
  HistogramSampler sampler(hist, grid);
  std::vector<ColumnValues> cols;
  cols.reserve(grid.dims.size());
  for (const auto &dim : grid.dims) {
    if (dim.kind == Kind::continuous) {
      cols.emplace_back(std::vector<double>(n_out, 0.0));
    } else {
      cols.emplace_back(std::vector<std::int32_t>(n_out, 0));
    }
  }
  std::vector<std::uint32_t> digits(grid.dims.size());
  for (std::size_t r = 0; r < n_out; ++r) {
    const std::uint64_t cell = sampler.sample_cell(rng);
    grid.decode(cell, digits);
    for (std::size_t i = 0; i < grid.dims.size(); ++i) {
      const GridDim &dim = grid.dims[i];
      if (dim.kind == Kind::continuous) {
        const double v = dim.lo + (digits[i] + rng.uniform01()) * dim.width;
        std::get<std::vector<double>>(cols[i])[r] = v;
      } else {
        std::int32_t level;
        if (dim.collapsed() && digits[i] == dim.bins - 1) {
          const std::uint32_t merged = dim.n_levels - (dim.bins - 1);
          level = static_cast<std::int32_t>(dim.bins - 1 + rng.below(merged));
        } else {
          level = static_cast<std::int32_t>(digits[i]);
        }
        std::get<std::vector<std::int32_t>>(cols[i])[r] = level;
      }
    }
  }
  return cols;
}

}  // namespace rctsyn
