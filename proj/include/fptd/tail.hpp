#pragma once

// Principal Dirichlet eigenvalue of the killed generator on (0, n) and the
// mixture density that splices the Monte-Carlo estimate with an exponential
// tail c q_x(t) exp(-lambda t) beyond a threshold T.
//
// The Sturm-Liouville problem -(p phi')' = 2 mu p phi with p = exp(2 int_0^z a)
// becomes, under psi = sqrt(p) phi, the Schrodinger problem
//   -psi''/2 + V psi = mu psi,  V = (sqrt(p))'' / (2 sqrt(p)),
// on (0, n) with Dirichlet ends. V is the model's gamma.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fptd/estimator.hpp"
#include "fptd/model.hpp"

namespace fptd {

class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct EigenResult {
  double mu1 = 0.0;         // Richardson value from mesh and 2*mesh
  double mu1_coarse = 0.0;  // mesh
  double mu1_fine = 0.0;    // 2*mesh
  double n = 0.0;
  std::size_t mesh = 0;
  std::vector<double> eigenfunction_samples;  // psi on the mesh, max 1, zero at both ends
};

/// V(z) from the weight p = exp(2A), A' = a: with p'/p = 2a and
/// p''/p = 2a' + 4a^2, (sqrt p)''/sqrt p = p''/(2p) - (p'/p)^2/4.
inline double liouville_potential(const DriftModel& model, double z) {
  const double a = model.a(z);
  const double dp = 2.0 * a;
  const double ddp = 2.0 * model.a_prime(z) + 4.0 * a * a;
  return 0.5 * (0.5 * ddp - 0.25 * dp * dp);
}

/// Symmetric tridiagonal matrix: diag[0..m), off[0..m-1).
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  /// Number of eigenvalues strictly below `lambda` (Sturm sequence).
  std::size_t count_below(double lambda) const {
    std::size_t count = 0;
    double d = 1.0;
    for (std::size_t j = 0; j < diag.size(); ++j) {
      const double coupling = j == 0 ? 0.0 : off[j - 1] * off[j - 1] / d;
      d = diag[j] - lambda - coupling;
      if (d == 0.0) d = -std::numeric_limits<double>::epsilon() * (std::abs(diag[j]) + std::abs(lambda));
      if (d < 0.0) ++count;
    }
    return count;
  }

  /// Bracket [lo, hi] of the smallest eigenvalue with hi - lo <= tol.
  std::pair<double, double> smallest_eigenvalue(double tol) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < diag.size(); ++j) {
      const double radius = (j > 0 ? std::abs(off[j - 1]) : 0.0) + (j < off.size() ? std::abs(off[j]) : 0.0);
      lo = std::min(lo, diag[j] - radius);
      hi = std::max(hi, diag[j] + radius);
    }
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(mid) >= 1) hi = mid;
      else lo = mid;
    }
    return {lo, hi};
  }

  /// Solves (T - shift I) y = rhs by the Thomas algorithm; T - shift I must
  /// be positive definite.
  std::vector<double> solve_shifted(double shift, std::span<const double> rhs) const {
    const std::size_t m = diag.size();
    std::vector<double> c(m), y(rhs.begin(), rhs.end());
    double denom = diag[0] - shift;
    c[0] = m > 1 ? off[0] / denom : 0.0;
    y[0] /= denom;
    for (std::size_t j = 1; j < m; ++j) {
      denom = diag[j] - shift - off[j - 1] * c[j - 1];
      if (j + 1 < m) c[j] = off[j] / denom;
      y[j] = (y[j] - off[j - 1] * y[j - 1]) / denom;
    }
    for (std::size_t j = m - 1; j-- > 0;) y[j] -= c[j] * y[j + 1];
    return y;
  }
};

namespace detail {

// Central differences on z_j = j h, j = 1..mesh-1.
inline Tridiagonal schrodinger_matrix(const DriftModel& model, double n, std::size_t mesh) {
  const double h = n / static_cast<double>(mesh);
  Tridiagonal t;
  t.diag.resize(mesh - 1);
  t.off.assign(mesh - 2, -0.5 / (h * h));
  for (std::size_t j = 1; j < mesh; ++j) {
    const double z = h * static_cast<double>(j);
    const double v = model.gamma(z);
    const double from_weights = liouville_potential(model, z);
    if (!(std::abs(from_weights - v) <= 1e-10 * std::max(1.0, std::abs(v))))
      throw std::logic_error("Liouville potential differs from gamma at z = " + std::to_string(z));
    t.diag[j - 1] = 1.0 / (h * h) + v;
  }
  return t;
}

}  // namespace detail

/// Smallest eigenvalue of -psi''/2 + gamma psi on (0, n), Dirichlet ends.
/// Throws MeshError if mesh and 2*mesh disagree by more than 1e-3.
inline EigenResult principal_eigenvalue(const DriftModel& model, double n, std::size_t mesh = 4000) {
  if (!(n > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (mesh < 100) throw std::invalid_argument("mesh must be at least 100");
  constexpr double tol = 1e-10;
  const Tridiagonal coarse = detail::schrodinger_matrix(model, n, mesh);
  const Tridiagonal fine = detail::schrodinger_matrix(model, n, 2 * mesh);
  const auto [coarse_lo, coarse_hi] = coarse.smallest_eigenvalue(tol);
  const auto [fine_lo, fine_hi] = fine.smallest_eigenvalue(tol);

  EigenResult r;
  r.n = n;
  r.mesh = mesh;
  r.mu1_coarse = 0.5 * (coarse_lo + coarse_hi);
  r.mu1_fine = 0.5 * (fine_lo + fine_hi);
  if (std::abs(r.mu1_coarse - r.mu1_fine) > 1e-3)
    throw MeshError("eigenvalue moved by " + std::to_string(std::abs(r.mu1_coarse - r.mu1_fine)) +
                    " between mesh " + std::to_string(mesh) + " and " + std::to_string(2 * mesh) +
                    "; use a larger mesh");
  r.mu1 = (4.0 * r.mu1_fine - r.mu1_coarse) / 3.0;

  // Inverse iteration just below the bracket keeps the shifted matrix
  // positive definite.
  const double shift = coarse_lo - 1e-6 * std::max(1.0, std::abs(coarse_lo));
  std::vector<double> v(mesh - 1, 1.0);
  for (int it = 0; it < 4; ++it) {
    v = coarse.solve_shifted(shift, v);
    const double norm = *std::max_element(v.begin(), v.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
    for (double& e : v) e /= norm;
  }
  r.eigenfunction_samples.assign(mesh + 1, 0.0);
  std::copy(v.begin(), v.end(), r.eigenfunction_samples.begin() + 1);
  return r;
}

struct TailModel {
  double T = 0.0;
  double lambda = 0.0;
  double c_star = 0.0;
  double n = 0.0;
  std::size_t mesh = 0;
  DensityEstimate source;
};

/// First grid time where std_err / p_hat exceeds `threshold`; the last grid
/// time if it never does.
inline double default_splice_time(const DensityEstimate& d, double threshold = 0.15) {
  for (std::size_t j = 0; j < d.t_grid.size(); ++j) {
    if (d.p_hat[j] > 0.0 && d.std_err[j] / d.p_hat[j] > threshold) return d.t_grid[j];
  }
  return d.t_grid.back();
}

inline std::size_t grid_index(std::span<const double> grid, double t) {
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (std::abs(grid[j] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return j;
  }
  throw std::invalid_argument("splice time " + std::to_string(t) + " is not on the estimate grid");
}

inline TailModel build_tail(const EigenResult& eigen, const DensityEstimate& estimate, double T) {
  const std::size_t j = grid_index(estimate.t_grid, T);
  const double p = estimate.p_hat[j];
  if (!(p > 0.0)) throw std::domain_error("density estimate is not positive at the splice time");
  TailModel tm;
  tm.T = estimate.t_grid[j];
  tm.lambda = eigen.mu1;
  tm.n = eigen.n;
  tm.mesh = eigen.mesh;
  tm.c_star = p / (bm_fpt_density(estimate.x, tm.T) * std::exp(-tm.lambda * tm.T));
  tm.source = estimate;
  return tm;
}

inline TailModel build_tail(const DriftModel& model, const DensityEstimate& estimate, double T,
                            double n, std::size_t mesh = 4000) {
  return build_tail(principal_eigenvalue(model, n, mesh), estimate, T);
}

/// p_hat interpolated linearly on the grid (through p(0) = 0) before T;
/// c_star q_x(t) exp(-lambda t) from T on.
inline double evaluate_mixture(const TailModel& tm, double t) {
  if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
  if (t >= tm.T) return tm.c_star * bm_fpt_density(tm.source.x, t) * std::exp(-tm.lambda * t);
  const auto& g = tm.source.t_grid;
  const auto& p = tm.source.p_hat;
  const auto it = std::upper_bound(g.begin(), g.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - g.begin());
  const double t0 = k == 0 ? 0.0 : g[k - 1];
  const double p0 = k == 0 ? 0.0 : p[k - 1];
  const double w = (t - t0) / (g[k] - t0);
  return p0 + w * (p[k] - p0);
}

}  // namespace fptd
