#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

namespace fptd {

class QuadratureError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Composite Simpson rule on [a, b], doubling the number of panels until two
/// successive estimates agree to `rel_tol` (relative, with exact zero
/// accepted). Previously evaluated points are reused at every level.
template <typename F>
double simpson(F&& f, double a, double b, double rel_tol = 1e-10, int max_level = 24) {
  if (a == b) return 0.0;
  std::size_t n = 16;  // panels, always even
  const double endpoints = f(a) + f(b);
  double even = 0.0;  // interior points with even index
  double odd = 0.0;
  double h = (b - a) / static_cast<double>(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double v = f(a + static_cast<double>(i) * h);
    if (i % 2 == 0) even += v;
    else odd += v;
  }
  double previous = h / 3.0 * (endpoints + 4.0 * odd + 2.0 * even);
  if (!std::isfinite(previous)) throw QuadratureError("non-finite integrand");
  for (int level = 0; level < max_level; ++level) {
    n *= 2;
    h = (b - a) / static_cast<double>(n);
    even += odd;
    odd = 0.0;
    for (std::size_t i = 1; i < n; i += 2) odd += f(a + static_cast<double>(i) * h);
    const double current = h / 3.0 * (endpoints + 4.0 * odd + 2.0 * even);
    if (!std::isfinite(current)) throw QuadratureError("non-finite integrand");
    if (std::abs(current - previous) <= rel_tol * std::abs(current)) return current;
    previous = current;
  }
  throw QuadratureError("Simpson rule did not reach the requested tolerance");
}

/// Simpson rule over equally spaced samples on [0, length]; samples.size()-1
/// must be even.
inline double simpson_samples(std::span<const double> samples, double length) {
  const std::size_t m = samples.size() - 1;
  double odd = 0.0;
  double even = 0.0;
  for (std::size_t k = 1; k < m; k += 2) odd += samples[k];
  for (std::size_t k = 2; k < m; k += 2) even += samples[k];
  return length / (3.0 * static_cast<double>(m)) * (samples[0] + samples[m] + 4.0 * odd + 2.0 * even);
}

/// Golden-section minimisation of a unimodal function on [lo, hi].
template <typename F>
double golden_section_minimum(F&& f, double lo, double hi, double tol, double* argmin = nullptr) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  const double x = 0.5 * (lo + hi);
  if (argmin) *argmin = x;
  return f(x);
}

}  // namespace fptd
