#pragma once

// The diffusion dX = a(X) dt + dW started at x > 0, the potential
// gamma = (a^2 + a')/2, assumption checks, the reduction of a general
// diffusion dY = b(Y) dt + sigma(Y) dW to unit diffusion coefficient, and the
// closed-form first-passage densities used as references.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fptd/expr.hpp"
#include "fptd/quadrature.hpp"

namespace fptd {

class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GeneralDiffusionSpec {
  std::string b;
  std::string sigma;
  double level = 0.0;
  double start = 1.0;
};

/// Monotone map F(v) = int_level^v 1/sigma(s) ds and its inverse.
///
/// F is tabulated on [level, v_max] and interpolated with cubic Hermite
/// polynomials (the derivative 1/sigma is known exactly); the inverse is found
/// by bisection. Arguments beyond the table are handled by direct quadrature.
class LampertiMap {
public:
  static constexpr double kStep = 1.0 / 64.0;  // table spacing in z
  static constexpr int kSubsteps = 4;          // RK4 steps per table cell

  /// Tabulates v(z) on [0, z_max] by solving dv/dz = sigma(v), v(0) = level.
  /// The table stops early if v overflows; the map is +inf beyond that.
  LampertiMap(DriftExpr sigma, double level, double z_max) : sigma_(std::move(sigma)), level_(level) {
    const auto cells = static_cast<std::size_t>(std::ceil(z_max / kStep));
    v_.reserve(cells + 1);
    dv_.reserve(cells + 1);
    v_.push_back(level_);
    dv_.push_back(checked_sigma(level_));
    for (std::size_t k = 0; k < cells; ++k) {
      const double next = advance(v_.back(), kStep);
      if (!std::isfinite(next) || next > 1e300) {
        overflowed_ = true;
        break;
      }
      v_.push_back(next);
      dv_.push_back(checked_sigma(next));
    }
  }

  double level() const { return level_; }
  double z_max() const { return kStep * static_cast<double>(v_.size() - 1); }

  /// v with F(v) = z.
  double inverse(double z) const {
    if (z <= 0.0) return level_;
    const double pos = z / kStep;
    if (pos >= static_cast<double>(v_.size() - 1)) {
      if (overflowed_) return std::numeric_limits<double>::infinity();
      return advance(v_.back(), z - z_max());  // rare: past the table
    }
    const auto k = static_cast<std::size_t>(pos);
    const double s = pos - static_cast<double>(k);
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * v_[k] + (s3 - 2 * s2 + s) * kStep * dv_[k] +
           (-2 * s3 + 3 * s2) * v_[k + 1] + (s3 - s2) * kStep * dv_[k + 1];
  }

private:
  double checked_sigma(double v) const {
    const double s = sigma_(v);
    if (!(s > 0.0) || !std::isfinite(s))
      throw ModelError("sigma must be positive and finite; sigma(" + std::to_string(v) + ") = " +
                       std::to_string(s));
    return s;
  }

  double advance(double v, double dz) const {
    const int steps = std::max(1, static_cast<int>(std::ceil(dz * kSubsteps / kStep)));
    const double h = dz / steps;
    for (int i = 0; i < steps; ++i) {
      const double k1 = sigma_(v);
      const double k2 = sigma_(v + 0.5 * h * k1);
      const double k3 = sigma_(v + 0.5 * h * k2);
      const double k4 = sigma_(v + h * k3);
      v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return v;
  }

  DriftExpr sigma_;
  double level_;
  std::vector<double> v_, dv_;
  bool overflowed_ = false;
};

/// Drift a, its derivative a', the potential gamma and the start level x.
///
/// For a model obtained by the Lamperti transform the stored expressions are
/// functions of the original coordinate v and are composed with the inverse
/// map; otherwise they are functions of z directly.
class DriftModel {
public:
  double x() const { return x_; }
  double integral_a() const { return integral_a_; }
  const std::string& drift_text() const { return drift_text_; }
  bool transformed() const { return map_ != nullptr; }
  const std::optional<GeneralDiffusionSpec>& general() const { return general_; }

  const DriftExpr& a_expr() const { return a_; }
  const DriftExpr& a_prime_expr() const { return a_prime_; }
  const DriftExpr& gamma_expr() const { return gamma_; }

  double a(double z) const { return a_(coordinate(z)); }
  double a_prime(double z) const { return a_prime_(coordinate(z)); }
  double gamma(double z) const { return gamma_(coordinate(z)); }

  void gamma(std::span<const double> z, std::span<double> out) const {
    if (!map_) {
      gamma_.evaluate(z, out);
      return;
    }
    thread_local std::vector<double> v;
    v.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) v[i] = map_->inverse(z[i]);
    gamma_.evaluate(v, out);
  }

  /// int_lo^hi a(z) dz.
  double integrate_a(double lo, double hi) const {
    if (!map_) return simpson([this](double z) { return a_(z); }, lo, hi);
    const double vlo = map_->inverse(lo);
    const double vhi = map_->inverse(hi);
    return simpson([this](double v) { return a_(v) / sigma_(v); }, vlo, vhi);
  }

  /// The drift is a(z) = -z (the Ornstein-Uhlenbeck case with closed forms).
  bool is_ornstein_uhlenbeck() const {
    for (double z : {0.0, 0.37, 1.0, 2.5, 7.0}) {
      if (std::abs(a(z) + z) > 1e-12 * std::max(1.0, z)) return false;
    }
    return true;
  }

  bool is_zero_drift() const { return !map_ && a_.is_constant() && a_(0.0) == 0.0; }

  friend DriftModel build_model(std::string_view a_text, double x, double probe_max);
  friend struct LampertiResult lamperti_transform(const GeneralDiffusionSpec& g, double z_target);

private:
  double coordinate(double z) const { return map_ ? map_->inverse(z) : z; }

  DriftExpr a_, a_prime_, gamma_;
  DriftExpr sigma_;  // only for transformed models
  std::shared_ptr<const LampertiMap> map_;
  std::optional<GeneralDiffusionSpec> general_;
  std::string drift_text_;
  double x_ = 1.0;
  double integral_a_ = 0.0;
};

inline DriftExpr gamma_of(const DriftExpr& a, const DriftExpr& a_prime) {
  return (a.pow(2) + a_prime) / DriftExpr::constant(2.0);
}

/// Parses the drift, differentiates it symbolically and integrates it on
/// [0, x]. Throws ParseError or ModelError.
inline DriftModel build_model(std::string_view a_text, double x, double probe_max = 10.0) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ModelError("start level x must be positive");
  DriftModel m;
  m.a_ = parse_drift(a_text);
  m.a_prime_ = m.a_.derivative();
  m.gamma_ = gamma_of(m.a_, m.a_prime_);
  m.drift_text_ = std::string(a_text);
  m.x_ = x;
  const double hi = std::max(probe_max, x);
  for (int k = 0; k <= 1000; ++k) {
    const double z = hi * k / 1000.0;
    if (!std::isfinite(m.a_(z)) || !std::isfinite(m.a_prime_(z)))
      throw ModelError("drift or its derivative is not finite at z = " + std::to_string(z));
  }
  m.integral_a_ = m.integrate_a(0.0, x);
  return m;
}

struct LampertiResult {
  DriftModel model;
  double x;
};

/// Reduces dY = b dt + sigma dW, started at y above the level, to unit
/// diffusion coefficient. With F(v) = int_level^v 1/sigma the new drift is
/// a(F(v)) = b(v)/sigma(v) - sigma'(v)/2 and a'(F(v)) = h'(v) sigma(v).
inline LampertiResult lamperti_transform(const GeneralDiffusionSpec& g, double z_target = 50.0) {
  if (!(g.start > g.level)) throw ModelError("start must lie above the level");
  const DriftExpr b = parse_drift(g.b);
  const DriftExpr sigma = parse_drift(g.sigma);
  for (int k = 0; k <= 1000; ++k) {
    const double v = g.level + (g.start - g.level) * k / 1000.0;
    const double s = sigma(v);
    if (!(s > 0.0) || !std::isfinite(s))
      throw ModelError("sigma must be positive on [level, start]; sigma(" + std::to_string(v) +
                       ") = " + std::to_string(s));
  }
  const double x =
      simpson([&](double v) { return 1.0 / sigma(v); }, g.level, g.start, 1e-10);

  DriftModel m;
  m.a_ = b / sigma - sigma.derivative() / DriftExpr::constant(2.0);
  m.a_prime_ = m.a_.derivative() * sigma;
  m.gamma_ = gamma_of(m.a_, m.a_prime_);
  m.sigma_ = sigma;
  m.map_ = std::make_shared<const LampertiMap>(sigma, g.level, std::max(z_target, 2.0 * x));
  m.general_ = g;
  m.drift_text_ = m.a_.to_string();
  m.x_ = x;
  m.integral_a_ = simpson([&](double v) { return m.a_(v) / sigma(v); }, g.level, g.start);
  return {std::move(m), x};
}

enum class Verdict { diverges, converges, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::diverges: return "diverges";
    case Verdict::converges: return "converges";
    default: return "inconclusive";
  }
}

struct AssumptionReport {
  bool a_c1_on_domain = true;
  Verdict divergence_heuristic = Verdict::inconclusive;
  std::vector<double> cutoffs;
  std::vector<double> partial_integrals;
  double gamma_lower_bound_estimate = 0.0;
  std::string warning;
};

/// Heuristic check of int_0^inf exp(-2 int_0^w a) dw = inf plus a sampled
/// lower bound of gamma on [0, probe_max].
inline AssumptionReport check_assumptions(const DriftModel& m, double probe_max = 10.0) {
  if (!(probe_max > 0.0)) throw ModelError("probe_max must be positive");
  AssumptionReport report;
  report.gamma_lower_bound_estimate = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10000; ++k) {
    const double z = probe_max * k / 10000.0;
    const double a = m.a(z);
    const double ap = m.a_prime(z);
    if (!std::isfinite(a) || !std::isfinite(ap)) {
      report.a_c1_on_domain = false;
      continue;
    }
    report.gamma_lower_bound_estimate = std::min(report.gamma_lower_bound_estimate, m.gamma(z));
  }

  constexpr double kDivergent = 1e6;
  constexpr int kSteps = 20000;
  double w = 0.0;
  double drift_integral = 0.0;  // int_0^w a
  double partial = 0.0;
  double integrand = 1.0;
  bool exploded = false, stopped = false, scan_failed = false;
  for (double cutoff : {1e1, 1e2, 1e3, 1e4}) {
    report.cutoffs.push_back(cutoff);
    if (!exploded && !stopped) {
      const double h = (cutoff - w) / kSteps;
      for (int k = 0; k < kSteps; ++k) {
        const double a0 = m.a(w);
        const double am = m.a(w + 0.5 * h);
        const double a1 = m.a(w + h);
        const double sum = a0 + am + a1;
        if (!std::isfinite(sum)) {
          // +inf drift kills the integrand from here on; -inf blows it up.
          if (sum < 0.0) {
            exploded = true;
            partial = std::numeric_limits<double>::infinity();
          } else if (std::isnan(sum)) {
            scan_failed = true;
          }
          stopped = true;
          break;
        }
        drift_integral += h / 6.0 * (a0 + 4.0 * am + a1);
        w += h;
        const double next = std::exp(-2.0 * drift_integral);
        partial += 0.5 * h * (integrand + next);
        integrand = next;
        if (!(partial <= kDivergent)) {
          exploded = true;
          partial = std::numeric_limits<double>::infinity();
          break;
        }
      }
      if (!stopped) w = cutoff;
    }
    report.partial_integrals.push_back(partial);
  }

  const auto& p = report.partial_integrals;
  const std::size_t n = p.size();
  if (exploded) {
    report.divergence_heuristic = Verdict::diverges;
  } else if (scan_failed) {
    report.divergence_heuristic = Verdict::inconclusive;
  } else if (std::abs(p[n - 1] - p[n - 2]) <= 1e-8 * std::abs(p[n - 1])) {
    report.divergence_heuristic = Verdict::converges;
  } else {
    bool decelerating = false;
    for (std::size_t k = 2; k < n; ++k) {
      if (p[k] - p[k - 1] < p[k - 1] - p[k - 2]) decelerating = true;
    }
    report.divergence_heuristic = decelerating ? Verdict::inconclusive : Verdict::diverges;
  }
  if (report.divergence_heuristic == Verdict::converges)
    report.warning = "scale integral appears finite: the process may escape to infinity";
  else if (report.divergence_heuristic == Verdict::inconclusive)
    report.warning = "could not confirm that the scale integral diverges";
  if (!report.a_c1_on_domain) report.warning += (report.warning.empty() ? "" : "; ") +
                                                std::string("drift not C1 on the probe grid");
  return report;
}

/// First-passage density of standard Brownian motion from x to 0.
inline double bm_fpt_density(double x, double t) {
  if (t <= 0.0) return 0.0;
  return x / std::sqrt(2.0 * std::numbers::pi * t * t * t) * std::exp(-x * x / (2.0 * t));
}

inline double log_sinh(double t) {
  if (t < 20.0) return std::log(std::sinh(t));
  return t + std::log1p(-std::exp(-2.0 * t)) - std::numbers::ln2;
}

/// First-passage density to 0 of the OU process dX = -X dt + dW from x = 1.
inline double ou_fpt_density(double t) {
  if (!(t > 0.0)) throw ModelError("ou_fpt_density requires t > 0");
  const double coth = 1.0 / std::tanh(t);
  const double log_p = -0.5 * std::log(2.0 * std::numbers::pi) - 1.5 * log_sinh(t) +
                       0.5 * (1.0 + t - coth);
  return std::exp(log_p);
}

}  // namespace fptd
