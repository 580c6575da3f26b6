#pragma once

// Shared test scaffolding: independent reference implementations (a dense
// perturbed-histogram sampler, normal-equation least squares), statistical
// test helpers, and process/filesystem utilities. Everything here is written
// against the public behaviour only, deliberately not reusing the library's
// internals, so tests compare two routes to the same answer.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "rctsyn/rctsyn.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dense perturbed-histogram reference: materializes every cell.

struct DenseHistogram {
  std::vector<double> mass;  // length q, zeros allowed
  double total = 0.0;
  bool degenerate = false;
  std::vector<double> cum;  // cumulative over all q cells

  void finish() {
    total = 0.0;
    cum.resize(mass.size());
    for (std::size_t i = 0; i < mass.size(); ++i) {
      total += mass[i];
      cum[i] = total;
    }
    degenerate = !(total > 0.0);
  }

  std::uint64_t sample(rctsyn::Rng &rng) const {
    if (degenerate) return rng.below(mass.size());
    const double u = rng.uniform01() * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return static_cast<std::uint64_t>(it - cum.begin());
  }
};

inline DenseHistogram dense_perturb(const rctsyn::SparseCounts &counts,
                                    std::uint64_t q, double epsilon,
                                    rctsyn::Rng &rng) {
  DenseHistogram h;
  h.mass.assign(q, 0.0);
  const double scale = 2.0 / epsilon;
  for (std::uint64_t c = 0; c < q; ++c) {
    auto it = counts.cells.find(c);
    const double base = it == counts.cells.end() ? 0.0 : static_cast<double>(it->second);
    const double noisy = base + rng.laplace(scale);
    h.mass[c] = noisy > 0.0 ? noisy : 0.0;
  }
  h.finish();
  return h;
}

// ---------------------------------------------------------------------------
// Chi-square helpers.

inline double chi2_sf(double stat, double df) {
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Two-sample homogeneity test over matched categories. Categories whose
/// combined count falls below `pool_below` are merged into a remainder bucket
/// so the chi-square approximation stays honest.
inline double chi2_homogeneity_p(const std::vector<double> &a,
                                 const std::vector<double> &b,
                                 double pool_below = 10.0) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v;
  for (double v : b) nb += v;
  std::vector<std::pair<double, double>> cells;
  double pool_a = 0.0, pool_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] + b[i] < pool_below) {
      pool_a += a[i];
      pool_b += b[i];
    } else {
      cells.emplace_back(a[i], b[i]);
    }
  }
  if (pool_a + pool_b > 0.0) cells.emplace_back(pool_a, pool_b);
  if (cells.size() < 2) return 1.0;
  double stat = 0.0;
  const double n = na + nb;
  for (const auto &[ca, cb] : cells) {
    const double col = ca + cb;
    const double ea = col * na / n;
    const double eb = col * nb / n;
    if (ea > 0.0) stat += (ca - ea) * (ca - ea) / ea;
    if (eb > 0.0) stat += (cb - eb) * (cb - eb) / eb;
  }
  return chi2_sf(stat, static_cast<double>(cells.size() - 1));
}

/// One-sample goodness of fit against given probabilities (with pooling).
inline double chi2_gof_p(const std::vector<double> &observed,
                         const std::vector<double> &probs,
                         double pool_below = 10.0) {
  double n = 0.0;
  for (double v : observed) n += v;
  std::vector<std::pair<double, double>> cells;  // (obs, expected)
  double pool_o = 0.0, pool_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probs[i];
    if (e < pool_below) {
      pool_o += observed[i];
      pool_e += e;
    } else {
      cells.emplace_back(observed[i], e);
    }
  }
  if (pool_e > 0.0) cells.emplace_back(pool_o, pool_e);
  if (cells.size() < 2) return 1.0;
  double stat = 0.0;
  for (const auto &[o, e] : cells) stat += (o - e) * (o - e) / e;
  return chi2_sf(stat, static_cast<double>(cells.size() - 1));
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov test against U(0,1), asymptotic p-value.

inline double ks_uniform_p(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, values[i] - lo, hi - values[i]});
  }
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * t * t);
  }
  return std::max(0.0, std::min(1.0, p));
}

// ---------------------------------------------------------------------------
// Normal-equation least squares, written from scratch: builds X'X and X'y in
// plain doubles and solves by Gauss-Jordan with partial pivoting. Returns
// coefficients, residual variance, and standard errors.

struct OlsOracle {
  std::vector<double> beta;
  std::vector<double> se;
  double sigma2 = 0.0;
};

inline OlsOracle ols_normal_equations(const std::vector<std::vector<double>> &X,
                                      const std::vector<double> &y) {
  const std::size_t n = X.size();
  const std::size_t k = X.front().size();
  // A = [X'X | X'y | I] for simultaneous solve and inverse.
  std::vector<std::vector<double>> A(k, std::vector<double>(2 * k + 1, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += X[r][i] * X[r][j];
      A[i][j] = s;
    }
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += X[r][i] * y[r];
    A[i][k] = s;
    A[i][k + 1 + i] = 1.0;
  }
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r) {
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    }
    std::swap(A[col], A[piv]);
    const double d = A[col][col];
    for (auto &v : A[col]) v /= d;
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = A[r][col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < 2 * k + 1; ++c) A[r][c] -= f * A[col][c];
    }
  }
  OlsOracle out;
  out.beta.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.beta[i] = A[i][k];
  double rss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fit = 0.0;
    for (std::size_t j = 0; j < k; ++j) fit += X[r][j] * out.beta[j];
    rss += (y[r] - fit) * (y[r] - fit);
  }
  out.sigma2 = rss / static_cast<double>(n - k);
  out.se.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.se[i] = std::sqrt(std::max(0.0, out.sigma2 * A[i][k + 1 + i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bernoulli log likelihood and its analytic/numeric gradients, for checking
// the logistic fitter against central finite differences.

inline double bernoulli_loglik(const std::vector<std::vector<double>> &X,
                               const std::vector<double> &y,
                               const std::vector<double> &beta) {
  double ll = 0.0;
  for (std::size_t r = 0; r < X.size(); ++r) {
    double eta = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) eta += X[r][j] * beta[j];
    const double softplus =
        eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += y[r] * eta - softplus;
  }
  return ll;
}

inline std::vector<double> numeric_gradient(const std::vector<std::vector<double>> &X,
                                            const std::vector<double> &y,
                                            std::vector<double> beta,
                                            double h = 1e-6) {
  std::vector<double> g(beta.size());
  for (std::size_t j = 0; j < beta.size(); ++j) {
    const double save = beta[j];
    beta[j] = save + h;
    const double up = bernoulli_loglik(X, y, beta);
    beta[j] = save - h;
    const double dn = bernoulli_loglik(X, y, beta);
    beta[j] = save;
    g[j] = (up - dn) / (2.0 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Filesystem and process helpers.

class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = fs::temp_directory_path() /
            ("rctsyn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter()++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path &path() const { return path_; }

 private:
  static int &counter() {
    static int c = 0;
    return c;
  }
  fs::path path_;
};

inline std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path &p, const std::string &content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string cli_binary() {
  const char *env = std::getenv("RCTSYN_CLI");
  return env ? env : "";
}

inline std::string config_dir() {
  const char *env = std::getenv("RCTSYN_CONFIG_DIR");
  return env ? env : "";
}

/// Runs the CLI with the given argument string through the shell, capturing
/// both streams and the exit code.
inline CliResult run_cli(const std::string &args) {
  const TempDir cap("cli_capture");
  const fs::path out = cap.path() / "out.txt";
  const fs::path err = cap.path() / "err.txt";
  const std::string cmd = "'" + cli_binary() + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

}  // namespace testsupport
