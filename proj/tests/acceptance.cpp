// Acceptance suite. `fptd_acceptance <k>` runs criterion k; without an
// argument all criteria run. One PASS/FAIL line per criterion; exit status 0
// iff every selected criterion passed.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fptd/compare.hpp"
#include "fptd/fptd.hpp"

namespace fs = std::filesystem;
using namespace fptd;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const DriftModel& ou() {
  static const DriftModel m = build_model("-z", 1.0);
  return m;
}

// Closed-form OU rate -(1/t) log(p_1 / (q_1 e^{1/2})).
double ou_true_rate(double t) {
  return -std::log(ou_fpt_density(t) / (bm_fpt_density(1.0, t) * std::exp(0.5))) / t;
}

Outcome zero_drift_exactness() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t checked = 0, exact = 0;
  for (double x : {0.5, 1.0, 2.0}) {
    const auto model = build_model("0", x);
    for (std::size_t n : {2u, 100u, 10000u})
      for (std::size_t m : {2u, 1000u})
        for (std::uint64_t seed : {0u, 7u, 123456789u}) {
          const auto grid = uniform_grid(10.0, 200);
          const auto d = estimate_density(model, grid, {n, m, seed, 1});
          for (std::size_t j = 0; j < grid.size(); ++j) {
            ++checked;
            exact += d.p_hat[j] == bm_fpt_density(x, grid[j]) && d.std_err[j] == 0.0;
          }
        }
  }
  const double secs = seconds_since(start);
  return {exact == checked && secs < 1.0,
          fmt("%zu/%zu grid values exact with zero std_err; %.3f s (limit 1 s)", exact, checked, secs)};
}

Outcome ou_density_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const auto grid = linspace(0.1, 7.0, 140);
  const auto d = estimate_density(ou(), grid, {10000, 1000, 0, 1});
  std::size_t inside = 0;
  double worst_z = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double err = std::abs(d.p_hat[j] - ou_fpt_density(grid[j]));
    inside += err <= 4.0 * d.std_err[j];
    worst_z = std::max(worst_z, err / d.std_err[j]);
  }
  const double frac = static_cast<double>(inside) / static_cast<double>(grid.size());
  const double secs = seconds_since(start);
  return {frac >= 0.95 && secs < 60.0,
          fmt("%zu/140 points within 4 std_err (need 95%%), max |z| %.2f; %.1f s single-threaded (target 60 s)",
              inside, worst_z, secs)};
}

Outcome small_sample_accuracy() {
  const auto grid = uniform_grid(10.0, 200);
  double peak = 0.0;
  for (double t : grid) peak = std::max(peak, ou_fpt_density(t));
  std::size_t good = 0;
  std::string errs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = estimate_density(ou(), grid, {100, 1000, seed, 1});
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max(worst, std::abs(d.p_hat[j] - ou_fpt_density(grid[j])));
    const double rel = worst / peak;
    good += rel <= 0.08;
    errs += fmt("%s%.3f", errs.empty() ? "" : " ", rel);
  }
  return {good >= 9, fmt("%zu/10 seeds with max error / max p <= 0.08 (need 9); per seed: %s", good, errs.c_str())};
}

Outcome small_t_rate() {
  const std::vector<double> grid{0.05};
  const auto r = estimate_rate(ou(), grid, {10000, 1000, 0, 1});
  const double l = r.lambda_hat[0];
  return {l >= -0.38 && l <= -0.28, fmt("lambda_hat(0.05) = %.4f (band [-0.38, -0.28], limit %.4f)", l,
                                        r.small_t_limit)};
}

Outcome rate_blow_up() {
  const std::vector<double> grid{10.0, 20.0};
  const auto r = estimate_rate(ou(), grid, {100, 1000, 7, 1});
  const double est_change = r.lambda_hat[1] - r.lambda_hat[0];
  const double true_change = ou_true_rate(20.0) - ou_true_rate(10.0);
  return {est_change > 0.5 && std::abs(true_change) < 0.1,
          fmt("estimated rate change %.3f on [10,20] (need > 0.5); closed-form rate change %.3f "
              "(%.3f -> %.3f, need < 0.1)",
              est_change, true_change, ou_true_rate(10.0), ou_true_rate(20.0))};
}

Outcome convergence_rate() {
  const auto grid = linspace(0.1, 5.0, 25);
  const std::size_t counts[] = {100, 1000, 10000};
  const auto table = convergence_scaling(ou(), grid, counts, 30, {0, 200, 0, 1}, ou_fpt_density);
  std::string rows;
  for (const auto& row : table.rows) rows += fmt(" N=%zu rmse=%.5f", row.paths, row.rmse_max_error);
  return {table.slope >= -0.62 && table.slope <= -0.38,
          fmt("slope %.3f (band [-0.62, -0.38]);%s", table.slope, rows.c_str())};
}

Outcome bridge_law() {
  const BridgeEnsemble ens(10000, 2000, 0);
  std::vector<double> maxima(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) maxima[i] = continuous_max_radius(ens.path(i));
  double worst = 0.0;
  std::string cells;
  for (double y : {0.8, 1.0, 1.2, 1.5}) {
    double below = 0;
    for (double m : maxima) below += m <= y;
    const double emp = below / static_cast<double>(maxima.size());
    worst = std::max(worst, std::abs(emp - bessel_max_cdf(y)));
    cells += fmt(" y=%.1f emp=%.4f series=%.4f", y, emp, bessel_max_cdf(y));
  }
  const double at_one = bessel_max_cdf(1.0);
  return {worst <= 0.015 && std::abs(at_one - 0.17792) <= 1e-4,
          fmt("max gap %.4f (tol 0.015); series(1) = %.6f;%s", worst, at_one, cells.c_str())};
}

Outcome eigenvalues() {
  const double zero = principal_eigenvalue(build_model("0", 1.0), 1.0).mu1;
  const double target = std::numbers::pi * std::numbers::pi / 2.0;
  const double mu4 = principal_eigenvalue(ou(), 4.0).mu1;
  const double mu8 = principal_eigenvalue(ou(), 8.0).mu1;
  const double mu16 = principal_eigenvalue(ou(), 16.0).mu1;
  double worst = 0.0;
  for (int k = 0; k <= 16000; ++k) {
    const double z = k / 1000.0;
    worst = std::max(worst, std::abs(liouville_potential(ou(), z) - ou().gamma(z)));
  }
  const bool zero_ok = std::abs(zero - target) <= 1e-6;
  const bool ladder_ok = mu4 > mu8 && mu8 > mu16;
  const bool limit_ok = std::abs(mu16 - 1.0) <= 1e-3;
  const bool liouville_ok = worst <= 1e-10;
  return {zero_ok && ladder_ok && limit_ok && liouville_ok,
          fmt("zero drift n=1: %.9f vs pi^2/2 (%s); ladder %.13f > %.13f > %.13f (%s); mu(16) within 1e-3 "
              "of 1 (%s); Liouville gap %.1e (%s)",
              zero, zero_ok ? "ok" : "FAIL", mu4, mu8, mu16, ladder_ok ? "ok" : "FAIL", limit_ok ? "ok" : "FAIL",
              worst, liouville_ok ? "ok" : "FAIL")};
}

Outcome mixture_tail() {
  const auto grid = uniform_grid(10.0, 200);
  const auto est = estimate_density(ou(), grid, {10000, 1000, 0, 1});
  const auto tm = build_tail(ou(), est, 6.0, 8.0);
  const double at12 = evaluate_mixture(tm, 12.0);
  const double ratio = at12 / ou_fpt_density(12.0);
  const auto log_ratio = [&](double t) { return std::log(evaluate_mixture(tm, t) / bm_fpt_density(1.0, t)); };
  const double implied = -(log_ratio(20.0) - log_ratio(8.0)) / 12.0;
  const auto raw = estimate_rate(ou(), std::vector<double>{10.0, 20.0}, {100, 1000, 7, 1});
  const double raw_change = raw.lambda_hat[1] - raw.lambda_hat[0];
  const bool value_ok = ratio >= 0.5 && ratio <= 2.0;
  const bool rate_ok = std::abs(implied - 1.0) <= 0.05;
  const bool raw_fails = raw_change >= 0.1;
  return {value_ok && rate_ok && raw_fails,
          fmt("mixture(12)/p_1(12) = %.3f, need [0.5, 2] (%s); implied rate on [8,20] = %.4f, need 1 +- 0.05 "
              "(%s); raw N=100 rate change on [10,20] = %.3f, outside the 0.1 band (%s)",
              ratio, value_ok ? "ok" : "FAIL", implied, rate_ok ? "ok" : "FAIL", raw_change,
              raw_fails ? "ok" : "FAIL")};
}

Outcome baseline_contrast() {
  CompareSettings s;
  s.t_max = 10.0;
  s.grid_points = 100;
  s.h_values = {0.05, 0.01};
  s.budget_h = 0.01;
  s.euler_paths = 10000;
  const auto report = compare_methods(ou(), ou_fpt_density, s);
  const auto& d = report.direct();
  const auto& e = report.euler(0.01);
  const auto& coarse = report.euler(0.05);
  return {d.max_abs_error < e.max_abs_error,
          fmt("direct N=%zu: max err %.5f, mean %.5f, %.2f s; Euler h=0.01: max err %.5f, mean %.5f, %.2f s; "
              "Euler h=0.05: max err %.5f",
              d.samples, d.max_abs_error, d.mean_abs_error, d.wall_seconds, e.max_abs_error, e.mean_abs_error,
              e.wall_seconds, coarse.max_abs_error)};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "fptd_acceptance_determinism";
  fs::remove_all(dir);
  const std::string base = std::string(FPTD_CLI_PATH) +
                           " estimate --drift -z --x 1 --t-max 10 --n 2000 --m 1000 --seed 7 --out-dir ";
  const int a = std::system((base + (dir / "t1").string() + " --threads 1 > /dev/null").c_str());
  const int b = std::system((base + (dir / "t4").string() + " --threads 4 > /dev/null").c_str());
  bool same = a == 0 && b == 0;
  std::string detail = fmt("exit codes %d, %d;", a, b);
  for (const char* file : {"density.csv", "rate.csv"}) {
    const auto x = slurp(dir / "t1" / file), y = slurp(dir / "t4" / file);
    const bool eq = !x.empty() && x == y;
    same = same && eq;
    detail += fmt(" %s %s (%zu bytes)", file, eq ? "identical" : "DIFFERS", x.size());
  }
  fs::remove_all(dir);
  return {same, detail};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"zero-drift exactness", zero_drift_exactness},
      {"OU density oracle", ou_density_oracle},
      {"N=100 reproduction over 10 seeds", small_sample_accuracy},
      {"rate small-t limit", small_t_rate},
      {"rate blow-up at N=100", rate_blow_up},
      {"1/sqrt(N) convergence", convergence_rate},
      {"bridge maximum law", bridge_law},
      {"eigenvalues", eigenvalues},
      {"mixture tail", mixture_tail},
      {"baseline contrast", baseline_contrast},
      {"determinism across thread counts", determinism},
  };
  std::vector<std::size_t> selected;
  if (argc > 1) {
    for (int k = 1; k < argc; ++k) {
      const long idx = std::strtol(argv[k], nullptr, 10);
      if (idx < 1 || idx > static_cast<long>(criteria.size())) {
        std::fprintf(stderr, "criterion must be 1..%zu\n", criteria.size());
        return 2;
      }
      selected.push_back(static_cast<std::size_t>(idx));
    }
  } else {
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);
  }
  bool all = true;
  for (std::size_t k : selected) {
    Outcome o;
    try {
      o = criteria[k - 1].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu (%s): %s: %s\n", k, criteria[k - 1].name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
