#include <gtest/gtest.h>

#include <cmath>

#include "fptd/baseline.hpp"
#include "fptd/estimator.hpp"

using namespace fptd;

TEST(Euler, BridgeCorrectionRecoversBrownianHittingProbability) {
  // P[tau <= 1] = erfc(1 / sqrt 2) for Brownian motion from 1.
  const auto run = euler_fpt_sample(build_model("0", 1.0), 1e-3, 1.0, 50000, true, 1, 2);
  const double p = std::erfc(1.0 / std::sqrt(2.0));
  const double se = std::sqrt(p * (1 - p) / 50000.0);
  EXPECT_NEAR(run.empirical_cdf(1.0), p, 3.0 * se);
}

TEST(Euler, UncorrectedSchemeMissesCrossings) {
  const auto model = build_model("0", 1.0);
  const auto plain = euler_fpt_sample(model, 0.05, 1.0, 20000, false, 3);
  const double p = std::erfc(1.0 / std::sqrt(2.0));
  const double se = std::sqrt(p * (1 - p) / 20000.0);
  EXPECT_LT(plain.empirical_cdf(1.0), p - 3.0 * se);
}

TEST(Euler, CorrectionOnlyMovesCrossingsEarlier) {
  const auto model = build_model("-z", 1.0);
  const auto plain = euler_fpt_sample(model, 0.05, 5.0, 2000, false, 8);
  const auto corrected = euler_fpt_sample(model, 0.05, 5.0, 2000, true, 8);
  for (std::size_t i = 0; i < plain.crossing_times.size(); ++i)
    EXPECT_LE(corrected.crossing_times[i], plain.crossing_times[i]);
  for (double t : plain.crossing_times) {
    if (!std::isfinite(t)) continue;
    EXPECT_NEAR(std::round(t / 0.05) * 0.05, t, 1e-12);
  }
}

TEST(Euler, DeterministicAcrossThreads) {
  const auto model = build_model("-z", 1.0);
  const auto a = euler_fpt_sample(model, 0.01, 2.0, 500, true, 4, 1);
  const auto b = euler_fpt_sample(model, 0.01, 2.0, 500, true, 4, 3);
  EXPECT_EQ(a.crossing_times, b.crossing_times);
}

TEST(Euler, Errors) {
  const auto model = build_model("-z", 1.0);
  EXPECT_THROW(euler_fpt_sample(model, 0.0, 1.0, 10, true, 0), std::invalid_argument);
  EXPECT_THROW(euler_fpt_sample(model, 0.3, 1.0, 10, true, 0), std::invalid_argument);
}

TEST(Kde, MassAndShape) {
  const auto model = build_model("-z", 1.0);
  const auto run = euler_fpt_sample(model, 0.01, 10.0, 20000, true, 5);
  const auto grid = linspace(0.0, 14.0, 1401);
  const auto kd = kernel_density(run, Silverman{}, grid);
  double mass = 0.0;
  for (std::size_t j = 1; j < grid.size(); ++j)
    mass += 0.5 * (kd.density[j] + kd.density[j - 1]) * (grid[j] - grid[j - 1]);
  const double fraction = static_cast<double>(run.uncensored()) / 20000.0;
  EXPECT_LE(mass, 1.0 + 1e-3);
  EXPECT_NEAR(mass, fraction, 5e-3);
  EXPECT_GT(kd.bandwidth, 0.0);
  // Smoothed density tracks the closed form away from the origin.
  for (double t : {1.0, 2.0, 3.0}) {
    const std::size_t j = static_cast<std::size_t>(std::lround(t * 100));
    EXPECT_NEAR(kd.density[j], ou_fpt_density(t), 0.03) << t;
  }
}

TEST(Kde, FixedBandwidthBumpHasUnitPeak) {
  EulerRun run;
  run.crossing_times.assign(200, 5.0);
  const std::vector<double> grid{5.0, 6.0};
  const auto kd = kernel_density(run, FixedBandwidth{1.0}, grid);
  const double peak = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  EXPECT_NEAR(kd.density[0], peak, 1e-12);
  EXPECT_NEAR(kd.density[1], peak * std::exp(-0.5), 1e-12);
  run.crossing_times.assign(50, 1.0);
  EXPECT_THROW(kernel_density(run, Silverman{}, grid), std::invalid_argument);
  run.crossing_times.assign(200, 1.0);
  EXPECT_THROW(kernel_density(run, Silverman{}, grid), std::invalid_argument);  // zero spread
}
