#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rctsyn/dataset.hpp"
#include "rctsyn/regression.hpp"

namespace rctsyn {

/// One coefficient's released inference, reduced to what the utility metrics
/// consume.
struct CIRecord {
  std::string name;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline std::vector<CIRecord> ci_records(const FitResult &fit) {
  std::vector<CIRecord> out;
  out.reserve(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) {
    out.push_back({fit.names[i], fit.estimates[i], fit.ci_lower[i], fit.ci_upper[i]});
  }
  return out;
}

/// Metric 1: do the two intervals share at least one point? Endpoints count.
inline int ci_overlap_indicator(const CIRecord &a, const CIRecord &b) {
  return std::max(a.lower, b.lower) <= std::min(a.upper, b.upper) ? 1 : 0;
}

/// Metric 2: does the synthetic interval cover the original point estimate?
inline int estimate_coverage(double original_estimate, const CIRecord &synthetic) {
  return (synthetic.lower <= original_estimate && original_estimate <= synthetic.upper)
             ? 1
             : 0;
}

/// Metric 3: average of the overlap's share of each interval. Zero when the
/// intervals are disjoint; degenerate zero-width intervals are rejected
/// rather than divided by.
inline double ci_overlap_measure(const CIRecord &a, const CIRecord &b) {
  const double wa = a.upper - a.lower;
  const double wb = b.upper - b.lower;
  if (!(wa > 0.0) || !(wb > 0.0)) {
    throw NumericError("interval overlap undefined for zero-width intervals");
  }
  const double lo = std::max(a.lower, b.lower);
  const double hi = std::min(a.upper, b.upper);
  if (hi <= lo) return 0.0;
  const double w = hi - lo;
  return 0.5 * (w / wa + w / wb);
}

/// Metric 4: squared distance between the point estimates.
inline double squared_error(double original_estimate, double synthetic_estimate) {
  const double d = original_estimate - synthetic_estimate;
  return d * d;
}

/// Metrics 1-4 for one (original fit, synthetic fit) pair, per coefficient.
struct PairMetrics {
  std::vector<std::string> names;
  std::vector<int> overlap;
  std::vector<int> coverage;
  std::vector<double> overlap_measure;
  std::vector<double> sq_error;
};

inline PairMetrics compare_fits(const FitResult &original, const FitResult &synthetic) {
  if (original.names != synthetic.names) {
    throw ValidationError("fits being compared release different coefficients");
  }
  PairMetrics pm;
  pm.names = original.names;
  const auto a = ci_records(original);
  const auto b = ci_records(synthetic);
  for (std::size_t i = 0; i < a.size(); ++i) {
    pm.overlap.push_back(ci_overlap_indicator(a[i], b[i]));
    pm.coverage.push_back(estimate_coverage(a[i].estimate, b[i]));
    pm.overlap_measure.push_back(ci_overlap_measure(a[i], b[i]));
    pm.sq_error.push_back(squared_error(a[i].estimate, b[i].estimate));
  }
  return pm;
}

/// Per-coefficient aggregation over all pairs: indicator metrics as
/// proportions, the others as means.
struct CoefficientMetrics {
  std::string name;
  double metric1 = 0.0;
  double metric2 = 0.0;
  double metric3 = 0.0;
  double metric4 = 0.0;
};

struct MetricsReport {
  std::vector<CoefficientMetrics> rows;
  std::uint64_t n_pairs = 0;

  json to_json() const {
    json rows_j = json::array();
    for (const auto &r : rows) {
      rows_j.push_back(json{{"variable", r.name},
                            {"metric1_ci_overlap", r.metric1},
                            {"metric2_coverage", r.metric2},
                            {"metric3_ci_overlap_measure", r.metric3},
                            {"metric4_squared_error", r.metric4}});
    }
    return json{{"pairs", n_pairs}, {"coefficients", rows_j}};
  }
};

inline MetricsReport aggregate_metrics(std::span<const PairMetrics> pairs) {
  MetricsReport report;
  if (pairs.empty()) return report;
  const auto &names = pairs.front().names;
  report.n_pairs = pairs.size();
  report.rows.resize(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) report.rows[i].name = names[i];
  for (const auto &pm : pairs) {
    if (pm.names != names) {
      throw ValidationError("pair metrics disagree on released coefficients");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      report.rows[i].metric1 += pm.overlap[i];
      report.rows[i].metric2 += pm.coverage[i];
      report.rows[i].metric3 += pm.overlap_measure[i];
      report.rows[i].metric4 += pm.sq_error[i];
    }
  }
  const double denom = static_cast<double>(pairs.size());
  for (auto &r : report.rows) {
    r.metric1 /= denom;
    r.metric2 /= denom;
    r.metric3 /= denom;
    r.metric4 /= denom;
  }
  return report;
}

/// Metric 5 target: a named summary of one column, either its sample variance
/// (n-1 denominator) or its mean, written "variance:col" / "mean:col".
struct StatSpec {
  enum class Kind { variance, mean };
  Kind kind = Kind::variance;
  std::string column;

  static StatSpec parse(const std::string &text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon + 1 >= text.size()) {
      throw ValidationError("statistic must look like 'variance:col' or 'mean:col'");
    }
    const std::string kind = text.substr(0, colon);
    StatSpec s;
    s.column = text.substr(colon + 1);
    if (kind == "variance") s.kind = Kind::variance;
    else if (kind == "mean") s.kind = Kind::mean;
    else throw ValidationError("unknown statistic '" + kind + "'");
    return s;
  }

  std::string str() const {
    return (kind == Kind::variance ? std::string("variance:") : std::string("mean:")) +
           column;
  }
};

inline double eval_stat(const StatSpec &spec, const Dataset &d) {
  const std::size_t c = d.schema.require(spec.column);
  const std::size_t n = d.n_rows();
  if (n == 0) throw ValidationError("statistic of an empty frame");
  double mean = 0.0;
  for (std::size_t r = 0; r < n; ++r) mean += d.numeric_value(c, r);
  mean /= static_cast<double>(n);
  if (spec.kind == StatSpec::Kind::mean) return mean;
  if (n < 2) throw ValidationError("variance needs at least two rows");
  double ss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double dlt = d.numeric_value(c, r) - mean;
    ss += dlt * dlt;
  }
  return ss / static_cast<double>(n - 1);
}

/// Metric 5: mean squared error of the statistic across synthetic frames,
/// against its value on the original frame.
inline double sensitive_stat_mse(const StatSpec &spec, const Dataset &original,
                                 std::span<const Dataset> synthetics) {
  if (synthetics.empty()) {
    throw ValidationError("metric 5 needs at least one synthetic frame");
  }
  const double target = eval_stat(spec, original);
  double mse = 0.0;
  for (const auto &s : synthetics) {
    const double d = eval_stat(spec, s) - target;
    mse += d * d;
  }
  return mse / static_cast<double>(synthetics.size());
}

namespace detail {

inline std::string format_fixed5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5f", v);
  return buf;
}

inline std::string format_general(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

/// metrics.csv layout: one row per released coefficient, metrics 1-4.
/// An optional leading column tags each row with its privacy budget.
inline void write_metrics_csv(std::ostream &out,
                              const std::vector<std::pair<std::string, MetricsReport>> &blocks,
                              bool budget_column) {
  if (budget_column) out << "privacy_budget,";
  out << "variable,metric1_ci_overlap,metric2_coverage,"
         "metric3_ci_overlap_measure,metric4_squared_error\n";
  for (const auto &[budget, report] : blocks) {
    for (const auto &r : report.rows) {
      if (budget_column) out << budget << ',';
      out << r.name << ',' << detail::format_fixed5(r.metric1) << ','
          << detail::format_fixed5(r.metric2) << ','
          << detail::format_fixed5(r.metric3) << ','
          << detail::format_general(r.metric4) << '\n';
    }
  }
}

}  // namespace rctsyn
