#pragma once

// Direct Monte-Carlo estimation of the first-passage density
//   p(t) = q_x(t) exp(-int_0^x a) E[exp(-t I(t))],
// its rate function lambda(t) = -(1/t) log E[exp(-t I(t))], theoretical
// bounds on lambda, and sampling diagnostics (covariance, 1/sqrt(N) scaling).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fptd/bridge.hpp"
#include "fptd/model.hpp"
#include "fptd/parallel.hpp"
#include "fptd/quadrature.hpp"

namespace fptd {

struct RunSettings {
  std::size_t paths = 10000;  // N
  std::size_t steps = 1000;   // M
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct DensityEstimate {
  std::vector<double> t_grid;
  std::vector<double> p_hat;
  std::vector<double> std_err;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::uint64_t base_seed = 0;
  double prefactor_log = 0.0;  // -int_0^x a
  double x = 0.0;
};

struct RateCurve {
  std::vector<double> t_grid;
  std::vector<double> lambda_hat;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double small_t_limit = 0.0;
};

/// Exponents s_ij = -t_j I_i(t_j) for every path i and grid time t_j, all
/// computed from one ensemble. Stored time-major: one contiguous column per
/// grid time.
struct ExponentSample {
  std::vector<double> t_grid;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::uint64_t base_seed = 0;
  std::vector<double> values;

  double operator()(std::size_t path, std::size_t time) const { return values[time * paths + path]; }
  std::span<const double> column(std::size_t time) const {
    return std::span<const double>(values).subspan(time * paths, paths);
  }
};

/// Log of the sample mean of exp(s) via the max shift, plus the sample
/// standard deviation of exp(s - shift).
struct LogMeanExp {
  double log_mean = 0.0;
  double shift = 0.0;
  double shifted_sd = 0.0;
};

inline LogMeanExp log_mean_exp(std::span<const double> s) {
  LogMeanExp out;
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  out.shift = *hi;
  if (!std::isfinite(out.shift) || *lo == *hi) {  // constant sample: exact, zero spread
    out.log_mean = out.shift;
    return out;
  }
  const double n = static_cast<double>(s.size());
  double sum = 0.0;
  for (double v : s) sum += std::exp(v - out.shift);
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : s) {
    const double d = std::exp(v - out.shift) - mean;
    ss += d * d;
  }
  out.log_mean = out.shift + std::log(mean);
  out.shifted_sd = s.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return out;
}

namespace detail {

inline void check_grid(std::span<const double> t_grid, const RunSettings& run) {
  if (t_grid.empty()) throw std::invalid_argument("empty t grid");
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    if (!(t_grid[j] > 0.0) || !std::isfinite(t_grid[j]))
      throw std::invalid_argument("t grid must be strictly positive");
    if (j > 0 && !(t_grid[j] > t_grid[j - 1]))
      throw std::invalid_argument("t grid must be strictly increasing");
  }
  if (run.paths < 2) throw std::invalid_argument("need at least 2 paths");
  if (run.steps < 2 || run.steps % 2 != 0)
    throw std::invalid_argument("bridge step count must be even and at least 2");
}

}  // namespace detail

inline ExponentSample sample_exponents(const DriftModel& model, std::span<const double> t_grid,
                                       const RunSettings& run) {
  detail::check_grid(t_grid, run);
  ExponentSample out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  out.paths = run.paths;
  out.steps = run.steps;
  out.base_seed = run.seed;
  const std::size_t nt = t_grid.size();
  out.values.assign(run.paths * nt, 0.0);
  if (model.is_zero_drift()) return out;  // gamma == 0: every exponent is exactly 0

  const BridgeEnsemble ensemble(run.paths, run.steps, run.seed);
  const double x = model.x();
  parallel_for(run.paths, run.threads, [&](std::size_t i) {
    const BridgePath path = ensemble.path(i);
    for (std::size_t j = 0; j < nt; ++j)
      out.values[j * run.paths + i] = -t_grid[j] * path_functional_I(path, x, t_grid[j], model);
  });
  return out;
}

inline DensityEstimate density_from(const DriftModel& model, const ExponentSample& s) {
  DensityEstimate d;
  d.t_grid = s.t_grid;
  d.paths = s.paths;
  d.steps = s.steps;
  d.base_seed = s.base_seed;
  d.prefactor_log = -model.integral_a();
  d.x = model.x();
  const double root_n = std::sqrt(static_cast<double>(s.paths));
  for (std::size_t j = 0; j < s.t_grid.size(); ++j) {
    const auto col = s.column(j);
    const LogMeanExp lme = log_mean_exp(col);
    const double q = bm_fpt_density(model.x(), s.t_grid[j]);
    d.p_hat.push_back(q * std::exp(d.prefactor_log + lme.log_mean));
    d.std_err.push_back(q * std::exp(d.prefactor_log + lme.shift) * lme.shifted_sd / root_n);
  }
  return d;
}

struct RateBounds {
  double lower = 0.0;
  double upper = 0.0;
  double kappa_star = 0.0;
};

/// inf gamma <= inf_t lambda(t) <= limsup lambda(t) <= inf_k {m(k + x) + pi^2/(2 k^2)},
/// with m(w) = max_{[0, w]} gamma. gamma is sampled on [0, probe_max] for the
/// lower bound and on a 1e-3 w grid for m(w).
inline RateBounds rate_bounds(const DriftModel& model, double kappa_lo = 1e-2, double kappa_hi = 1e2,
                              double probe_max = 10.0) {
  RateBounds b;
  b.lower = std::numeric_limits<double>::infinity();
  double sup_probe = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10000; ++k) {
    const double g = model.gamma(probe_max * k / 10000.0);
    b.lower = std::min(b.lower, g);
    sup_probe = std::max(sup_probe, g);
  }
  const auto running_max = [&](double w) {
    double m = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 1000; ++k) m = std::max(m, model.gamma(w * k / 1000.0));
    return m;
  };
  const double x = model.x();
  const auto objective = [&](double kappa) {
    return running_max(kappa + x) + std::numbers::pi * std::numbers::pi / (2.0 * kappa * kappa);
  };
  b.upper = golden_section_minimum(objective, kappa_lo, kappa_hi, 1e-9, &b.kappa_star);
  // kappa -> infinity gives sup gamma; sampled on the probe range.
  if (sup_probe < b.upper) {
    b.upper = sup_probe;
    b.kappa_star = std::numeric_limits<double>::infinity();
  }
  return b;
}

/// lim_{t -> 0} lambda(t) = (1/x) int_0^x gamma.
inline double small_t_limit(const DriftModel& model) {
  const double x = model.x();
  return simpson([&](double z) { return model.gamma(z); }, 0.0, x) / x;
}

inline RateCurve rate_from(const DriftModel& model, const ExponentSample& s) {
  RateCurve r;
  r.t_grid = s.t_grid;
  for (std::size_t j = 0; j < s.t_grid.size(); ++j) {
    const auto col = s.column(j);
    r.lambda_hat.push_back(-log_mean_exp(col).log_mean / s.t_grid[j]);
  }
  const RateBounds b = rate_bounds(model);
  r.lower_bound = b.lower;
  r.upper_bound = b.upper;
  r.small_t_limit = small_t_limit(model);
  return r;
}

inline DensityEstimate estimate_density(const DriftModel& model, std::span<const double> t_grid,
                                        const RunSettings& run) {
  return density_from(model, sample_exponents(model, t_grid, run));
}

inline RateCurve estimate_rate(const DriftModel& model, std::span<const double> t_grid,
                               const RunSettings& run) {
  return rate_from(model, sample_exponents(model, t_grid, run));
}

/// `count` uniform points on (0, t_max].
inline std::vector<double> uniform_grid(double t_max, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k)
    g[k] = t_max * static_cast<double>(k + 1) / static_cast<double>(count);
  return g;
}

/// `count` uniform points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k)
    g[k] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  return g;
}

/// Rate estimator specialised to a(z) = -z through per-path moments
/// A = int |beta|^2 du and B = int u beta^(1) du:
///   t I(t) = t^2 A/2 + t^{3/2} x B + t x^2/6 - t/2,
///   lambda(t) = x^2/6 - 1/2 - (1/t) log mean exp(-t^2 A/2 - t^{3/2} x B).
inline RateCurve ou_rate_estimator(const DriftModel& model, std::span<const double> t_grid,
                                   const BridgeEnsemble& ensemble, unsigned threads = 1) {
  if (!model.is_ornstein_uhlenbeck())
    throw std::invalid_argument("ou_rate_estimator requires the drift a(z) = -z");
  if (ensemble.steps() % 2 != 0) throw std::invalid_argument("Simpson rule needs an even step count");
  const std::size_t n = ensemble.size();
  std::vector<double> sq_moment(n), lin_moment(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const BridgePath path = ensemble.path(i);
    std::vector<double> sq(path.steps + 1), lin(path.steps + 1);
    for (std::size_t k = 0; k <= path.steps; ++k) {
      const auto& b = path.points[k];
      sq[k] = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
      lin[k] = path.u(k) * b[0];
    }
    sq_moment[i] = simpson_samples(sq, 1.0);
    lin_moment[i] = simpson_samples(lin, 1.0);
  });
  const double x = model.x();
  RateCurve r;
  r.t_grid.assign(t_grid.begin(), t_grid.end());
  std::vector<double> s(n);
  for (double t : t_grid) {
    if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
    for (std::size_t i = 0; i < n; ++i)
      s[i] = -t * t * sq_moment[i] / 2.0 - t * std::sqrt(t) * x * lin_moment[i];
    r.lambda_hat.push_back(x * x / 6.0 - 0.5 - log_mean_exp(s).log_mean / t);
  }
  const RateBounds b = rate_bounds(model);
  r.lower_bound = b.lower;
  r.upper_bound = b.upper;
  r.small_t_limit = small_t_limit(model);
  return r;
}

using Reference = std::function<double(double)>;

struct CovarianceDiagnostic {
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> empirical_gamma;  // per pair
  std::vector<double> t_points;         // distinct times, increasing
  // z_scores[r][j] = (p_hat - p_ref) / std_err at t_points[j] in replication r
  std::vector<std::vector<double>> z_scores;
};

namespace detail {

inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t r) {
  return splitmix64(seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(r) + 1)));
}

// Reference values at `times`: the closed form when given, else a run with
// 100 times as many paths on an independent seed.
inline std::vector<double> reference_values(const DriftModel& model, std::span<const double> times,
                                            const RunSettings& run, const Reference& reference) {
  std::vector<double> out;
  if (reference) {
    for (double t : times) out.push_back(reference(t));
    return out;
  }
  RunSettings big = run;
  big.paths = run.paths * 100;
  big.seed = splitmix64(run.seed ^ 0x5DEECE66DULL);
  return estimate_density(model, times, big).p_hat;
}

}  // namespace detail

/// Empirical covariance of sqrt(N)(p_hat - p_ref) over R independent runs.
inline CovarianceDiagnostic covariance_diagnostic(const DriftModel& model,
                                                  std::span<const std::pair<double, double>> pairs,
                                                  std::size_t replications, const RunSettings& run,
                                                  const Reference& reference = {}) {
  if (replications < 2) throw std::invalid_argument("need at least 2 replications");
  CovarianceDiagnostic out;
  out.pairs.assign(pairs.begin(), pairs.end());
  for (const auto& [s, t] : pairs) {
    out.t_points.push_back(s);
    out.t_points.push_back(t);
  }
  std::sort(out.t_points.begin(), out.t_points.end());
  out.t_points.erase(std::unique(out.t_points.begin(), out.t_points.end()), out.t_points.end());
  const auto p_ref = detail::reference_values(model, out.t_points, run, reference);

  const std::size_t nt = out.t_points.size();
  const double root_n = std::sqrt(static_cast<double>(run.paths));
  std::vector<std::vector<double>> eta(replications, std::vector<double>(nt));
  out.z_scores.assign(replications, std::vector<double>(nt));
  for (std::size_t r = 0; r < replications; ++r) {
    RunSettings rep = run;
    rep.seed = detail::replicate_seed(run.seed, r);
    const auto est = estimate_density(model, out.t_points, rep);
    for (std::size_t j = 0; j < nt; ++j) {
      const double diff = est.p_hat[j] - p_ref[j];
      eta[r][j] = root_n * diff;
      out.z_scores[r][j] = est.std_err[j] > 0.0 ? diff / est.std_err[j] : (diff == 0.0 ? 0.0 : INFINITY);
    }
  }
  const auto index_of = [&](double t) {
    return static_cast<std::size_t>(std::lower_bound(out.t_points.begin(), out.t_points.end(), t) -
                                    out.t_points.begin());
  };
  const double rr = static_cast<double>(replications);
  for (const auto& [s, t] : pairs) {
    const std::size_t a = index_of(s), b = index_of(t);
    double ma = 0.0, mb = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      ma += eta[r][a];
      mb += eta[r][b];
    }
    ma /= rr;
    mb /= rr;
    double c = 0.0;
    for (std::size_t r = 0; r < replications; ++r) c += (eta[r][a] - ma) * (eta[r][b] - mb);
    out.empirical_gamma.push_back(c / (rr - 1.0));
  }
  return out;
}

struct ScalingRow {
  std::size_t paths = 0;
  double rmse_max_error = 0.0;  // sqrt(mean_r max_t |p_hat - p|^2)
  double mean_std_err = 0.0;    // averaged over grid and replications
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  double slope = 0.0;  // least-squares slope of log rmse against log N
};

inline double log_log_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += std::log(xs[k]);
    my += std::log(ys[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = std::log(xs[k]) - mx;
    sxy += dx * (std::log(ys[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// RMSE of the sup-norm error over R seeds for each N in `path_counts`.
inline ScalingTable convergence_scaling(const DriftModel& model, std::span<const double> t_grid,
                                        std::span<const std::size_t> path_counts,
                                        std::size_t replications, const RunSettings& run,
                                        const Reference& reference) {
  if (!reference) throw std::invalid_argument("convergence_scaling needs a closed-form reference");
  std::vector<double> p_ref;
  for (double t : t_grid) p_ref.push_back(reference(t));
  ScalingTable table;
  std::vector<double> xs, ys;
  for (std::size_t n : path_counts) {
    ScalingRow row;
    row.paths = n;
    double sum_sq = 0.0, sum_se = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      RunSettings rep = run;
      rep.paths = n;
      rep.seed = detail::replicate_seed(run.seed ^ (0x9E37ULL * n), r);
      const auto est = estimate_density(model, t_grid, rep);
      double worst = 0.0;
      for (std::size_t j = 0; j < t_grid.size(); ++j) {
        worst = std::max(worst, std::abs(est.p_hat[j] - p_ref[j]));
        sum_se += est.std_err[j];
      }
      sum_sq += worst * worst;
    }
    row.rmse_max_error = std::sqrt(sum_sq / static_cast<double>(replications));
    row.mean_std_err = sum_se / static_cast<double>(replications * t_grid.size());
    table.rows.push_back(row);
    xs.push_back(static_cast<double>(n));
    ys.push_back(row.rmse_max_error);
  }
  table.slope = log_log_slope(xs, ys);
  return table;
}

}  // namespace fptd
