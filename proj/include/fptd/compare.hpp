#pragma once

// Head-to-head comparison of the direct bridge estimator with Euler + kernel
// smoothing at a matched wall-clock budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "fptd/baseline.hpp"
#include "fptd/estimator.hpp"

namespace fptd {

struct CompareSettings {
  double t_max = 10.0;
  std::size_t grid_points = 100;
  std::vector<double> h_values{0.05, 0.01};
  double budget_h = 0.01;  // the Euler run whose wall time the direct estimator gets
  std::size_t euler_paths = 10000;
  bool correction = true;
  std::size_t steps = 1000;  // bridge grid M
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct MethodResult {
  std::string method;
  double h = 0.0;  // 0 for the direct estimator
  std::size_t samples = 0;
  double wall_seconds = 0.0;
  double max_abs_error = 0.0;
  double mean_abs_error = 0.0;
};

struct ComparisonReport {
  std::vector<MethodResult> rows;

  const MethodResult& direct() const { return rows.back(); }
  const MethodResult& euler(double h) const {
    for (const auto& r : rows)
      if (r.method != "direct" && std::abs(r.h - h) < 1e-12) return r;
    throw std::out_of_range("no Euler row for that step size");
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void fill_errors(MethodResult& r, std::span<const double> estimate, std::span<const double> truth) {
  double worst = 0.0, sum = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double e = std::abs(estimate[j] - truth[j]);
    worst = std::max(worst, e);
    sum += e;
  }
  r.max_abs_error = worst;
  r.mean_abs_error = sum / static_cast<double>(truth.size());
}

}  // namespace detail

inline ComparisonReport compare_methods(const DriftModel& model, const Reference& reference,
                                        const CompareSettings& s) {
  const auto grid = uniform_grid(s.t_max, s.grid_points);
  std::vector<double> truth;
  for (double t : grid) truth.push_back(reference(t));

  ComparisonReport report;
  double budget = 0.0;
  for (double h : s.h_values) {
    const auto start = std::chrono::steady_clock::now();
    const auto run = euler_fpt_sample(model, h, s.t_max, s.euler_paths, s.correction, s.seed, s.threads);
    const auto kd = kernel_density(run, Silverman{}, grid);
    MethodResult r;
    r.method = s.correction ? "euler+bridge+kde" : "euler+kde";
    r.h = h;
    r.samples = s.euler_paths;
    r.wall_seconds = detail::seconds_since(start);
    detail::fill_errors(r, kd.density, truth);
    if (std::abs(h - s.budget_h) < 1e-12) budget = r.wall_seconds;
    report.rows.push_back(r);
  }
  if (budget == 0.0 && !report.rows.empty()) budget = report.rows.back().wall_seconds;

  // Pilot run to size N for the budget.
  RunSettings run{100, s.steps, s.seed ^ 0x2545F4914F6CDD1DULL, s.threads};
  const auto pilot_start = std::chrono::steady_clock::now();
  (void)estimate_density(model, grid, run);
  const double pilot = std::max(detail::seconds_since(pilot_start), 1e-6);
  run.paths = std::clamp<std::size_t>(static_cast<std::size_t>(100.0 * budget / pilot), 2, 1000000);
  run.seed = s.seed;

  const auto start = std::chrono::steady_clock::now();
  const auto est = estimate_density(model, grid, run);
  MethodResult direct;
  direct.method = "direct";
  direct.samples = run.paths;
  direct.wall_seconds = detail::seconds_since(start);
  detail::fill_errors(direct, est.p_hat, truth);
  report.rows.push_back(direct);
  return report;
}

}  // namespace fptd
