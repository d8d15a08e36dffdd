#pragma once

// Exact grid simulation of the standard three-dimensional Brownian bridge on
// [0, 1], the path functional I(t) = int_0^1 gamma(|u x e1 + sqrt(t) beta_u|) du,
// and the law of the maximal radius of the bridge.

#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fptd/parallel.hpp"
#include "fptd/quadrature.hpp"
#include "fptd/rng.hpp"

namespace fptd {

using Vec3 = std::array<double, 3>;

struct BridgePath {
  std::size_t steps = 0;  // M; grid u_k = k/M, k = 0..M
  std::uint64_t seed = 0;
  std::vector<Vec3> points;

  double u(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(steps); }
};

/// Sequential conditional-Gaussian construction: given beta(u_k) = b,
///   beta(u_{k+1}) ~ N(b (1-u_{k+1})/(1-u_k), (u_{k+1}-u_k)(1-u_{k+1})/(1-u_k) I_3).
/// Exact in law at the grid times; both endpoints are exactly zero.
inline BridgePath sample_bridge(std::size_t steps, std::uint64_t seed) {
  if (steps < 2) throw std::invalid_argument("bridge needs at least 2 steps");
  BridgePath path;
  path.steps = steps;
  path.seed = seed;
  path.points.assign(steps + 1, Vec3{0.0, 0.0, 0.0});
  Rng rng(seed);
  const double m = static_cast<double>(steps);
  for (std::size_t k = 0; k + 1 < steps; ++k) {
    const double remaining = m - static_cast<double>(k);  // (1-u_k) M
    const double shrink = (remaining - 1.0) / remaining;
    const double sd = std::sqrt(shrink / m);
    for (int c = 0; c < 3; ++c) path.points[k + 1][c] = path.points[k][c] * shrink + sd * rng.normal();
  }
  return path;
}

/// N bridges generated on demand; path i uses path_seed(base_seed, i).
class BridgeEnsemble {
public:
  BridgeEnsemble(std::size_t count, std::size_t steps, std::uint64_t base_seed)
      : count_(count), steps_(steps), base_seed_(base_seed) {
    if (steps < 2) throw std::invalid_argument("bridge needs at least 2 steps");
  }

  std::size_t size() const { return count_; }
  std::size_t steps() const { return steps_; }
  std::uint64_t base_seed() const { return base_seed_; }

  BridgePath path(std::size_t i) const { return sample_bridge(steps_, path_seed(base_seed_, i)); }

  std::vector<BridgePath> materialize(unsigned threads = 1) const {
    std::vector<BridgePath> out(count_);
    parallel_for(count_, threads, [&](std::size_t i) { out[i] = path(i); });
    return out;
  }

private:
  std::size_t count_;
  std::size_t steps_;
  std::uint64_t base_seed_;
};

template <typename G>
concept BatchPotential = requires(const G& g, std::span<const double> in, std::span<double> out) {
  g.gamma(in, out);
};

class PathFunctionalError : public std::runtime_error {
public:
  PathFunctionalError(const std::string& what, double radius)
      : std::runtime_error(what + " at radius " + std::to_string(radius)), radius_(radius) {}
  double radius() const { return radius_; }

private:
  double radius_;
};

namespace detail {

inline void radii(const BridgePath& path, double x, double t, std::span<double> out) {
  const double st = std::sqrt(t);
  const std::size_t m = path.steps;
  for (std::size_t k = 0; k <= m; ++k) {
    const auto& b = path.points[k];
    const double c1 = path.u(k) * x + st * b[0];
    const double c2 = st * b[1];
    const double c3 = st * b[2];
    out[k] = std::sqrt(c1 * c1 + c2 * c2 + c3 * c3);
  }
}

inline void check_finite(std::span<const double> values, std::span<const double> r) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw PathFunctionalError("gamma is not finite", r[k]);
  }
}

}  // namespace detail

/// I(t) by composite Simpson over the M+1 grid values (M must be even).
/// `gamma` is either a model exposing gamma(span, span) or a callable
/// double -> double.
template <typename G>
double path_functional_I(const BridgePath& path, double x, double t, const G& gamma) {
  if (path.steps % 2 != 0) throw std::invalid_argument("Simpson rule needs an even step count");
  if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
  thread_local std::vector<double> r, g;
  r.resize(path.steps + 1);
  g.resize(path.steps + 1);
  detail::radii(path, x, t, r);
  if constexpr (BatchPotential<G>) {
    gamma.gamma(std::span<const double>(r), std::span<double>(g));
  } else {
    for (std::size_t k = 0; k < r.size(); ++k) g[k] = gamma(r[k]);
  }
  detail::check_finite(g, r);
  return simpson_samples(g, 1.0);
}

/// P[max_{0<=u<=1} |beta_u| <= y] for the standard 3-d Brownian bridge:
///   (2/y^3) sqrt(2/pi) sum_n (n^2 pi^3 / 2) exp(-pi^2 n^2 / (2 y^2)),
/// using J_{3/2}(n pi)^2 = 2/(n pi^2).
inline double bessel_max_cdf(double y, int terms = 1000000) {
  if (!(y > 0.0)) throw std::invalid_argument("bessel_max_cdf requires y > 0");
  if (terms < 1) throw std::invalid_argument("terms must be positive");
  using std::numbers::pi;
  const double prefactor = 2.0 / (y * y * y) * std::sqrt(2.0 / pi);
  const double peak = y * std::numbers::sqrt2 / pi;  // where n^2 exp(-c n^2) peaks
  double sum = 0.0;
  for (int n = 1; n <= terms; ++n) {
    const double dn = n;
    const double term = prefactor * dn * dn * pi * pi * pi / 2.0 *
                        std::exp(-pi * pi * dn * dn / (2.0 * y * y));
    sum += term;
    if (dn > peak && term < 1e-15) break;
  }
  return std::min(sum, 1.0);
}

/// Maximal radius over the grid points of a path. Sits below the maximum of
/// the continuous path by about 0.58 / sqrt(M).
inline double max_radius(const BridgePath& path) {
  double best = 0.0;
  for (const auto& p : path.points) best = std::max(best, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  return best;
}

/// Maximal radius of the continuous path given its grid values. On each
/// step the radius is treated as a one-dimensional Brownian bridge from r_k
/// to r_{k+1} over 1/M, whose maximum is sampled exactly:
///   (r_k + r_{k+1} + sqrt((r_{k+1} - r_k)^2 - 2 log(U) / M)) / 2.
/// The uniforms come from a stream derived from the path seed.
inline double continuous_max_radius(const BridgePath& path) {
  Rng rng(splitmix64(path.seed ^ 0x8BB84B93962EACC9ULL));
  const double dt = 1.0 / static_cast<double>(path.steps);
  const auto radius = [](const Vec3& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); };
  double best = 0.0;
  double r0 = radius(path.points[0]);
  for (std::size_t k = 0; k < path.steps; ++k) {
    const double r1 = radius(path.points[k + 1]);
    const double d = r1 - r0;
    best = std::max(best, 0.5 * (r0 + r1 + std::sqrt(d * d - 2.0 * dt * std::log(rng.uniform_open()))));
    r0 = r1;
  }
  return best;
}

// Binary ensemble dump: 8-byte magic "FPTDBRG\0", u32 version, u64 N, u64 M,
// u64 base seed, then N*(M+1)*3 float64 coordinates. All little-endian.
inline constexpr char kEnsembleMagic[8] = {'F', 'P', 'T', 'D', 'B', 'R', 'G', '\0'};
inline constexpr std::uint32_t kEnsembleVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  os.write(bytes, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char bytes[sizeof(T)];
  if (!is.read(bytes, sizeof(T))) throw std::runtime_error("truncated ensemble file");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_ensemble(std::ostream& os, const BridgeEnsemble& ensemble, unsigned threads = 1) {
  os.write(kEnsembleMagic, sizeof(kEnsembleMagic));
  detail::write_le<std::uint32_t>(os, kEnsembleVersion);
  detail::write_le<std::uint64_t>(os, ensemble.size());
  detail::write_le<std::uint64_t>(os, ensemble.steps());
  detail::write_le<std::uint64_t>(os, ensemble.base_seed());
  for (const auto& path : ensemble.materialize(threads))
    for (const auto& p : path.points)
      for (double c : p) detail::write_le<double>(os, c);
}

struct EnsembleDump {
  std::uint64_t base_seed = 0;
  std::vector<BridgePath> paths;
};

inline EnsembleDump read_ensemble(std::istream& is) {
  char magic[sizeof(kEnsembleMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kEnsembleMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not an ensemble file");
  if (detail::read_le<std::uint32_t>(is) != kEnsembleVersion)
    throw std::runtime_error("unsupported ensemble version");
  const auto count = detail::read_le<std::uint64_t>(is);
  const auto steps = detail::read_le<std::uint64_t>(is);
  EnsembleDump dump;
  dump.base_seed = detail::read_le<std::uint64_t>(is);
  dump.paths.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto& path = dump.paths[i];
    path.steps = steps;
    path.seed = path_seed(dump.base_seed, i);
    path.points.resize(steps + 1);
    for (auto& p : path.points)
      for (double& c : p) c = detail::read_le<double>(is);
  }
  return dump;
}

}  // namespace fptd
