#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rctsyn/dataset.hpp"

namespace rctsyn {

inline constexpr std::uint64_t kDefaultCellLimit = 1ull << 48;

/// One axis of the covariate grid.
struct GridDim {
  std::size_t column = 0;  // schema column index
  Kind kind = Kind::continuous;
  std::uint32_t bins = 1;
  // continuous axes
  double lo = 0.0, hi = 0.0, width = 0.0;
  // discrete axes; when n_levels > bins the first bins-1 declared levels keep
  // their own bin and everything after shares the last one
  std::uint32_t n_levels = 0;

  bool collapsed() const { return kind == Kind::discrete && n_levels > bins; }
};

/// Equal-width product grid over the covariate columns, in schema order.
/// Cells are indexed by the mixed-radix number of their per-axis digits.
struct BinGrid {
  std::vector<GridDim> dims;
  std::vector<std::uint64_t> stride;  // last axis has stride 1
  std::uint64_t q = 1;
  double zeta = 0.0;

  std::uint64_t encode(std::span<const std::uint32_t> digits) const {
    std::uint64_t cell = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      cell += stride[i] * digits[i];
    }
    return cell;
  }

  void decode(std::uint64_t cell, std::span<std::uint32_t> digits) const {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      digits[i] = static_cast<std::uint32_t>((cell / stride[i]) % dims[i].bins);
    }
  }
};

struct GridOptions {
  std::uint64_t cell_limit = kDefaultCellLimit;
  /// When set, continuous covariates with non-finite declared bounds fall
  /// back to this frame's observed min/max. Only meaningful without a privacy
  /// budget; with one, observed ranges must never shape the released grid.
  const Dataset *observed_fallback = nullptr;
};

/// Number of bins per continuous axis for n rows: ceil(n^zeta), with a small
/// nudge so exact integer powers do not round up.
inline std::uint32_t bins_for(std::size_t n, double zeta) {
  const double raw = std::pow(static_cast<double>(n), zeta);
  const double b = std::ceil(raw - 1e-9);
  return static_cast<std::uint32_t>(std::max(1.0, b));
}

inline BinGrid build_grid(const Schema &schema, std::size_t n, double zeta,
                          const GridOptions &opts = {}) {
  if (n == 0) throw ValidationError("cannot build a grid for an empty frame");
  if (!(zeta > 0.0) || !(zeta < 1.0)) {
    throw ValidationError("zeta must lie strictly between 0 and 1");
  }
  const std::uint32_t B = bins_for(n, zeta);
  BinGrid g;
  g.zeta = zeta;
  for (std::size_t c : schema.covariate_indices()) {
    const ColumnSpec &spec = schema.columns[c];
    GridDim dim;
    dim.column = c;
    dim.kind = spec.kind;
    if (spec.kind == Kind::continuous) {
      double lo = spec.lower, hi = spec.upper;
      if (!std::isfinite(lo) || !std::isfinite(hi)) {
        if (opts.observed_fallback == nullptr) {
          throw ValidationError(
              "continuous covariate '" + spec.name +
              "' needs finite declared bounds to build a private grid");
        }
        const auto &vals = opts.observed_fallback->real(c);
        const auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
        if (!std::isfinite(lo)) lo = *mn;
        if (!std::isfinite(hi)) hi = *mx;
        if (!(lo < hi)) hi = lo + 1.0;  // constant column: give the bin width
      }
      dim.lo = lo;
      dim.hi = hi;
      dim.bins = B;
      dim.width = (hi - lo) / static_cast<double>(B);
    } else {
      dim.n_levels = static_cast<std::uint32_t>(spec.levels.size());
      dim.bins = std::min(dim.n_levels, B);
    }
    g.dims.push_back(dim);
  }
  // Cell count with overflow guard against the configured ceiling.
  g.q = 1;
  for (const auto &dim : g.dims) {
    if (g.q > opts.cell_limit / dim.bins) {
      throw ValidationError(
          "histogram would exceed the cell-count ceiling (" +
          std::to_string(opts.cell_limit) +
          " cells); lower zeta for a coarser grid or drop covariates");
    }
    g.q *= dim.bins;
  }
  if (g.q > opts.cell_limit) {
    throw ValidationError("histogram would exceed the cell-count ceiling");
  }
  g.stride.assign(g.dims.size(), 1);
  for (std::size_t i = g.dims.size(); i-- > 1;) {
    g.stride[i - 1] = g.stride[i] * g.dims[i].bins;
  }
  return g;
}

/// Observed cell counts, sparsely keyed by cell index (sorted so that every
/// later pass over the cells is order-deterministic).
struct SparseCounts {
  std::map<std::uint64_t, std::uint64_t> cells;
  std::uint64_t total = 0;
  std::uint64_t clamped = 0;  // values outside the declared support
};

/// Digit of a continuous value on one axis. The top boundary belongs to the
/// last bin; values outside the support are clamped to the edge bins and
/// counted so callers can surface a warning.
inline std::uint32_t continuous_digit(const GridDim &dim, double v, bool *clamped) {
  const double rel = (v - dim.lo) / dim.width;
  double f = std::floor(rel);
  if (f < 0.0) {
    if (clamped) *clamped = true;
    return 0;
  }
  if (f >= static_cast<double>(dim.bins)) {
    if (v > dim.hi && clamped) *clamped = true;
    return dim.bins - 1;
  }
  return static_cast<std::uint32_t>(f);
}

inline std::uint32_t discrete_digit(const GridDim &dim, std::int32_t level) {
  const auto l = static_cast<std::uint32_t>(level);
  if (!dim.collapsed() || l < dim.bins - 1) return std::min(l, dim.bins - 1);
  return dim.bins - 1;
}

inline SparseCounts count_cells(const Dataset &d, const BinGrid &g) {
  SparseCounts out;
  const std::size_t n = d.n_rows();
  std::vector<std::uint32_t> digits(g.dims.size());
  for (std::size_t r = 0; r < n; ++r) {
    bool clamped = false;
    for (std::size_t i = 0; i < g.dims.size(); ++i) {
      const GridDim &dim = g.dims[i];
      if (dim.kind == Kind::continuous) {
        digits[i] = continuous_digit(dim, d.real(dim.column)[r], &clamped);
      } else {
        digits[i] = discrete_digit(dim, d.levels(dim.column)[r]);
      }
    }
    ++out.cells[g.encode(digits)];
    ++out.total;
    if (clamped) ++out.clamped;
  }
  return out;
}

}  // namespace rctsyn
