#pragma once

// Conventional estimator used for comparison: Euler scheme for the diffusion,
// stopped at the first grid crossing of 0 (optionally with the Brownian-bridge
// crossing correction inside each step), followed by Gaussian kernel
// smoothing of the crossing times.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fptd/model.hpp"
#include "fptd/parallel.hpp"
#include "fptd/rng.hpp"

namespace fptd {

struct EulerRun {
  double h = 0.0;
  double horizon = 0.0;
  bool bridge_correction = false;
  std::uint64_t seed = 0;
  std::vector<double> crossing_times;  // +infinity when censored at the horizon

  std::size_t uncensored() const {
    return static_cast<std::size_t>(std::count_if(crossing_times.begin(), crossing_times.end(),
                                                  [](double t) { return std::isfinite(t); }));
  }

  double empirical_cdf(double t) const {
    const auto hits = std::count_if(crossing_times.begin(), crossing_times.end(),
                                    [t](double s) { return s <= t; });
    return static_cast<double>(hits) / static_cast<double>(crossing_times.size());
  }
};

/// Gaussian increments and the correction uniforms come from separate
/// streams, so runs with and without correction share their Euler paths.
inline EulerRun euler_fpt_sample(const DriftModel& model, double h, double horizon, std::size_t paths,
                                 bool bridge_correction, std::uint64_t seed, unsigned threads = 1) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  const double steps_real = horizon / h;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (steps == 0 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw std::invalid_argument("horizon must be a positive multiple of the step size");

  EulerRun run;
  run.h = h;
  run.horizon = horizon;
  run.bridge_correction = bridge_correction;
  run.seed = seed;
  run.crossing_times.assign(paths, std::numeric_limits<double>::infinity());
  const double sqrt_h = std::sqrt(h);
  parallel_for(paths, threads, [&](std::size_t i) {
    const std::uint64_t s = path_seed(seed, i);
    Rng noise(s);
    Rng correction(splitmix64(s ^ 0xA0761D6478BD642FULL));
    double x = model.x();
    for (std::size_t k = 0; k < steps; ++k) {
      const double drift = model.a(x);
      if (!std::isfinite(drift)) throw ModelError("drift is not finite at " + std::to_string(x));
      const double next = x + drift * h + sqrt_h * noise.normal();
      const double t0 = static_cast<double>(k) * h;
      if (next <= 0.0) {
        run.crossing_times[i] = static_cast<double>(k + 1) * h;
        return;
      }
      if (bridge_correction) {
        const double u = correction.uniform();
        const double where = correction.uniform();
        if (u < std::exp(-2.0 * x * next / h)) {
          run.crossing_times[i] = t0 + where * h;
          return;
        }
      }
      x = next;
    }
  });
  return run;
}

struct Silverman {};
struct FixedBandwidth {
  double value;
};
using BandwidthRule = std::variant<Silverman, FixedBandwidth>;

struct KernelDensity {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

/// Gaussian kernel estimate on the uncensored crossing times, reflected at 0
/// and normalised to the uncensored mass fraction.
inline KernelDensity kernel_density(const EulerRun& run, BandwidthRule rule, std::span<const double> grid) {
  std::vector<double> samples;
  for (double t : run.crossing_times)
    if (std::isfinite(t)) samples.push_back(t);
  if (samples.size() < 100) throw std::invalid_argument("kernel density needs at least 100 crossings");

  KernelDensity kd;
  if (const auto* fixed = std::get_if<FixedBandwidth>(&rule)) {
    kd.bandwidth = fixed->value;
  } else {
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    kd.bandwidth = 1.06 * std::sqrt(ss / (n - 1.0)) * std::pow(n, -0.2);
  }
  if (!(kd.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");

  const double norm = 1.0 / (static_cast<double>(run.crossing_times.size()) * kd.bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  const double inv_b = 1.0 / kd.bandwidth;
  kd.grid.assign(grid.begin(), grid.end());
  for (double t : grid) {
    double sum = 0.0;
    if (t >= 0.0) {
      for (double s : samples) {
        const double d1 = (t - s) * inv_b;
        const double d2 = (t + s) * inv_b;
        sum += std::exp(-0.5 * d1 * d1) + std::exp(-0.5 * d2 * d2);
      }
    }
    kd.density.push_back(norm * sum);
  }
  return kd;
}

}  // namespace fptd
