#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "rctsyn/dataset.hpp"
#include "rctsyn/rng.hpp"

namespace rctsyn {

enum class Family { gaussian, logistic };

inline const char *family_name(Family f) {
  return f == Family::gaussian ? "gaussian" : "logistic";
}

inline Family family_from_string(const std::string &s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "logistic") return Family::logistic;
  throw ValidationError("unknown model family '" + s + "'");
}

/// Two-sided Student-t quantile/p-value helpers. df = inf selects the normal.
inline double t_quantile(double p, double df) {
  if (!std::isfinite(df)) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

inline double two_sided_p(double stat, double df) {
  if (std::isnan(stat)) return 1.0;
  const double a = std::abs(stat);
  if (!std::isfinite(a)) return 0.0;
  if (!std::isfinite(df)) {
    return 2.0 * boost::math::cdf(
                     boost::math::complement(boost::math::normal_distribution<double>(), a));
  }
  return 2.0 * boost::math::cdf(boost::math::complement(
                   boost::math::students_t_distribution<double>(df), a));
}

/// Regression request: response column, regressor columns in order (an
/// intercept is always prepended), and the error family.
struct ModelSpec {
  std::string response;
  std::vector<std::string> regressors;
  Family family = Family::gaussian;

  /// The canonical release model: every treatment dummy, then every block
  /// column (as a single numeric regressor each), then every covariate, in
  /// schema order.
  static ModelSpec canonical(const Schema &schema, Family family = Family::gaussian) {
    ModelSpec m;
    m.family = family;
    m.response = schema.columns[schema.response_index()].name;
    for (std::size_t i : schema.treatment_indices()) m.regressors.push_back(schema.columns[i].name);
    for (std::size_t i : schema.block_indices()) m.regressors.push_back(schema.columns[i].name);
    for (std::size_t i : schema.covariate_indices()) m.regressors.push_back(schema.columns[i].name);
    return m;
  }

  ModelSpec with_family(Family f) const {
    ModelSpec m = *this;
    m.family = f;
    return m;
  }

  void validate_against(const Schema &schema) const {
    const std::size_t r = schema.require(response);
    if (schema.columns[r].role != Role::response) {
      throw ValidationError("model response '" + response +
                            "' is not the schema response column");
    }
    for (const auto &name : regressors) {
      schema.require(name);
      if (name == response) {
        throw ValidationError("model regressor '" + name + "' is the response");
      }
    }
  }

  json to_json() const {
    return json{{"response", response},
                {"family", family_name(family)},
                {"regressors", regressors}};
  }

  static ModelSpec from_json(const json &j, const Schema &schema) {
    ModelSpec m;
    if (j.contains("family")) m.family = family_from_string(j["family"].get<std::string>());
    m.response = j.value("response", schema.columns[schema.response_index()].name);
    if (j.contains("regressors")) {
      for (const auto &r : j["regressors"]) m.regressors.push_back(r.get<std::string>());
    } else {
      m.regressors = canonical(schema, m.family).regressors;
    }
    m.validate_against(schema);
    return m;
  }
};

/// Fitted coefficients with their released inference: standard errors,
/// two-sided 95% confidence intervals, p-values.
struct FitResult {
  Family family = Family::gaussian;
  std::vector<std::string> names;  // "(Intercept)" first, then regressors
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  std::vector<double> p_values;
  double sigma2 = 0.0;  // residual variance estimate (gaussian only)
  double df = 0.0;      // residual degrees of freedom
  std::size_t n = 0;
  bool converged = true;
  bool separation = false;

  std::size_t size() const { return names.size(); }

  int index_of(const std::string &name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  json to_json() const {
    json coef = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
      coef.push_back(json{{"name", names[i]},
                          {"estimate", estimates[i]},
                          {"std_error", std_errors[i]},
                          {"ci_lower", ci_lower[i]},
                          {"ci_upper", ci_upper[i]},
                          {"p_value", p_values[i]}});
    }
    json j;
    j["family"] = family_name(family);
    j["n"] = n;
    j["df"] = df;
    if (family == Family::gaussian) j["sigma2"] = sigma2;
    j["converged"] = converged;
    if (family == Family::logistic) j["separation"] = separation;
    j["coefficients"] = coef;
    return j;
  }
};

/// n x (1 + #regressors) matrix: intercept column of ones, then each
/// regressor's numeric encoding.
inline Eigen::MatrixXd design_matrix(const Dataset &d, const ModelSpec &m) {
  const std::size_t n = d.n_rows();
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(1 + m.regressors.size()));
  M.col(0).setOnes();
  for (std::size_t j = 0; j < m.regressors.size(); ++j) {
    const std::size_t c = d.schema.require(m.regressors[j]);
    const ColumnSpec &spec = d.schema.columns[c];
    if (spec.kind == Kind::continuous) {
      const auto &v = d.real(c);
      for (std::size_t r = 0; r < n; ++r) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = v[r];
      }
    } else {
      const auto table = detail::numeric_levels(spec);
      const auto &v = d.levels(c);
      for (std::size_t r = 0; r < n; ++r) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) =
            table[static_cast<std::size_t>(v[r])];
      }
    }
  }
  return M;
}

inline Eigen::VectorXd response_vector(const Dataset &d, const ModelSpec &m) {
  const std::size_t c = d.schema.require(m.response);
  const std::size_t n = d.n_rows();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    y(static_cast<Eigen::Index>(r)) = d.numeric_value(c, r);
  }
  return y;
}

namespace detail {

inline std::vector<std::string> coefficient_names(const ModelSpec &m) {
  std::vector<std::string> names;
  names.reserve(1 + m.regressors.size());
  names.emplace_back("(Intercept)");
  names.insert(names.end(), m.regressors.begin(), m.regressors.end());
  return names;
}

inline void check_dimensions(std::size_t n, std::size_t k) {
  if (n <= k) {
    throw ValidationError("regression needs more rows (" + std::to_string(n) +
                          ") than coefficients (" + std::to_string(k) + ")");
  }
}

[[noreturn]] inline void throw_rank_deficient(
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> &qr,
    const std::vector<std::string> &names) {
  const auto perm = qr.colsPermutation().indices();
  const auto r = qr.rank();
  std::string offender = names[static_cast<std::size_t>(perm(r))];
  throw NumericError("design matrix is rank deficient: column '" + offender +
                     "' is collinear with the others");
}

inline double stable_sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double bernoulli_loglik(const Eigen::VectorXd &y, const Eigen::VectorXd &eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = eta(i);
    const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y(i) * e - softplus;
  }
  return ll;
}

}  // namespace detail

/// Ordinary least squares via column-pivoted Householder QR. Inference is the
/// textbook release: sigma2 = RSS/(n-k), SEs from sigma2 * diag((X'X)^-1),
/// Student-t intervals and p-values on n-k degrees of freedom.
inline FitResult fit_ols(const Dataset &d, const ModelSpec &m) {
  m.validate_against(d.schema);
  const Eigen::MatrixXd M = design_matrix(d, m);
  const Eigen::VectorXd y = response_vector(d, m);
  const auto n = static_cast<std::size_t>(M.rows());
  const auto k = static_cast<std::size_t>(M.cols());
  detail::check_dimensions(n, k);

  const auto names = detail::coefficient_names(m);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  if (static_cast<std::size_t>(qr.rank()) < k) detail::throw_rank_deficient(qr, names);
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - M * beta;
  const double rss = std::max(0.0, resid.squaredNorm());
  const double df = static_cast<double>(n - k);
  const double sigma2 = rss / df;

  const Eigen::MatrixXd xtx_inv = (M.transpose() * M).inverse();
  const double tq = t_quantile(0.975, df);

  FitResult fit;
  fit.family = Family::gaussian;
  fit.names = names;
  fit.sigma2 = sigma2;
  fit.df = df;
  fit.n = n;
  fit.estimates.resize(k);
  fit.std_errors.resize(k);
  fit.ci_lower.resize(k);
  fit.ci_upper.resize(k);
  fit.p_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double est = beta(jj);
    const double var = sigma2 * xtx_inv(jj, jj);
    const double se = var > 0.0 ? std::sqrt(var) : 0.0;
    fit.estimates[j] = est;
    fit.std_errors[j] = se;
    fit.ci_lower[j] = est - tq * se;
    fit.ci_upper[j] = est + tq * se;
    fit.p_values[j] = se > 0.0 ? two_sided_p(est / se, df) : (est == 0.0 ? 1.0 : 0.0);
  }
  if (!std::isfinite(rss)) throw NumericError("least squares produced non-finite results");
  return fit;
}

/// Logistic regression by iteratively reweighted least squares with step
/// halving, converged when the score's max norm drops to 1e-8 (or 100
/// iterations). Wald inference from the observed information at the optimum;
/// a coefficient walking past |30| is flagged as separation.
inline FitResult fit_logistic(const Dataset &d, const ModelSpec &m) {
  m.validate_against(d.schema);
  const Eigen::MatrixXd M = design_matrix(d, m);
  const Eigen::VectorXd y = response_vector(d, m);
  const auto n = static_cast<std::size_t>(M.rows());
  const auto k = static_cast<std::size_t>(M.cols());
  detail::check_dimensions(n, k);

  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) any0 = true;
    else if (y(i) == 1.0) any1 = true;
    else throw ValidationError("logistic regression needs a 0/1 response");
  }
  if (!any0 || !any1) {
    throw ValidationError("logistic response has no variation");
  }

  const auto names = detail::coefficient_names(m);
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (static_cast<std::size_t>(qr.rank()) < k) detail::throw_rank_deficient(qr, names);
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  double ll = detail::bernoulli_loglik(y, eta);
  bool converged = false;
  constexpr double kScoreTol = 1e-8;
  constexpr int kMaxIter = 100;

  Eigen::VectorXd mu(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
  for (int iter = 0; iter < kMaxIter; ++iter) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double p = detail::stable_sigmoid(eta(i));
      mu(i) = std::min(1.0 - 1e-10, std::max(1e-10, p));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::VectorXd score = M.transpose() * (y - mu);
    if (score.cwiseAbs().maxCoeff() <= kScoreTol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::VectorXd z = eta + (y - mu).cwiseQuotient(w);
    const Eigen::MatrixXd Mw = sw.asDiagonal() * M;
    const Eigen::VectorXd zw = sw.asDiagonal() * z;
    Eigen::VectorXd proposal = Mw.colPivHouseholderQr().solve(zw);

    // Step halving keeps the log likelihood from decreasing.
    double step = 1.0;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd cand = beta + step * (proposal - beta);
      const Eigen::VectorXd eta_cand = M * cand;
      const double ll_cand = detail::bernoulli_loglik(y, eta_cand);
      if (ll_cand >= ll - 1e-12 || step < 1e-9) {
        beta = cand;
        eta = eta_cand;
        ll = ll_cand;
        break;
      }
      step *= 0.5;
    }
  }

  // Wald inference from the observed information at the final iterate.
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double p = detail::stable_sigmoid(eta(i));
    mu(i) = std::min(1.0 - 1e-10, std::max(1e-10, p));
    w(i) = mu(i) * (1.0 - mu(i));
  }
  const Eigen::MatrixXd info = M.transpose() * w.asDiagonal() * M;
  const Eigen::MatrixXd cov = info.inverse();
  const double zq = t_quantile(0.975, std::numeric_limits<double>::infinity());

  FitResult fit;
  fit.family = Family::logistic;
  fit.names = names;
  fit.df = static_cast<double>(n - k);
  fit.n = n;
  fit.converged = converged;
  fit.estimates.resize(k);
  fit.std_errors.resize(k);
  fit.ci_lower.resize(k);
  fit.ci_upper.resize(k);
  fit.p_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double est = beta(jj);
    const double var = cov(jj, jj);
    const double se = var > 0.0 ? std::sqrt(var) : 0.0;
    if (std::abs(est) > 30.0) fit.separation = true;
    fit.estimates[j] = est;
    fit.std_errors[j] = se;
    fit.ci_lower[j] = est - zq * se;
    fit.ci_upper[j] = est + zq * se;
    fit.p_values[j] =
        se > 0.0 ? two_sided_p(est / se, std::numeric_limits<double>::infinity())
                 : (est == 0.0 ? 1.0 : 0.0);
  }
  return fit;
}

inline FitResult fit_model(const Dataset &d, const ModelSpec &m) {
  return m.family == Family::gaussian ? fit_ols(d, m) : fit_logistic(d, m);
}

/// Draws responses from a fitted model at new design points: linear predictor
/// plus N(0, sigma2) noise for the gaussian family (exact fitted values when
/// sigma2 = 0), Bernoulli(sigmoid) for the logistic family.
inline std::vector<double> impute_response(const Eigen::MatrixXd &M,
                                           const FitResult &fit, Rng &rng) {
  if (static_cast<std::size_t>(M.cols()) != fit.size()) {
    throw ValidationError("imputation design width does not match the fit");
  }
  Eigen::VectorXd beta(M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    beta(j) = fit.estimates[static_cast<std::size_t>(j)];
  }
  const Eigen::VectorXd eta = M * beta;
  std::vector<double> y(static_cast<std::size_t>(M.rows()));
  if (fit.family == Family::gaussian) {
    const double sd = fit.sigma2 > 0.0 ? std::sqrt(fit.sigma2) : 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = eta(static_cast<Eigen::Index>(i)) + sd * rng.normal();
    }
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double p = detail::stable_sigmoid(eta(static_cast<Eigen::Index>(i)));
      y[i] = rng.bernoulli(p) ? 1.0 : 0.0;
    }
  }
  return y;
}

}  // namespace rctsyn
