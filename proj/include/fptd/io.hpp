#pragma once

// CSV emission. Numbers use the shortest round-trip form limited to 17
// significant digits (std::to_chars), so output bytes are platform-stable.

#include <charconv>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fptd/baseline.hpp"
#include "fptd/estimator.hpp"
#include "fptd/tail.hpp"

namespace fptd {

inline std::string format_number(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void write_row(std::ostream& os, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) os << ',';
    os << format_number(v);
    first = false;
  }
  os << '\n';
}

}  // namespace detail

inline void write_density_csv(std::ostream& os, const DensityEstimate& d, const RateCurve& r) {
  if (d.t_grid.size() != r.t_grid.size()) throw std::invalid_argument("grid mismatch");
  os << "t,p_hat,std_err,lambda_hat\n";
  for (std::size_t j = 0; j < d.t_grid.size(); ++j)
    detail::write_row(os, {d.t_grid[j], d.p_hat[j], d.std_err[j], r.lambda_hat[j]});
}

inline void write_rate_csv(std::ostream& os, const RateCurve& r) {
  os << "t,lambda_hat,lower_bound,upper_bound,small_t_limit\n";
  for (std::size_t j = 0; j < r.t_grid.size(); ++j)
    detail::write_row(os, {r.t_grid[j], r.lambda_hat[j], r.lower_bound, r.upper_bound, r.small_t_limit});
}

inline void write_mixture_csv(std::ostream& os, const TailModel& tm, std::span<const double> times) {
  os << "t,p_mixture\n";
  for (double t : times) detail::write_row(os, {t, evaluate_mixture(tm, t)});
}

inline void write_cdf_csv(std::ostream& os, const EulerRun& run, std::span<const double> times) {
  os << "t,cdf_hat\n";
  for (double t : times) detail::write_row(os, {t, run.empirical_cdf(t)});
}

inline void write_kde_csv(std::ostream& os, const KernelDensity& kd) {
  os << "t,kde_hat\n";
  for (std::size_t j = 0; j < kd.grid.size(); ++j) detail::write_row(os, {kd.grid[j], kd.density[j]});
}

}  // namespace fptd
