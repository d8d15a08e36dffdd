// Command-line front end: estimate, validate, tail, compare, lamperti.
//
// Exit codes: 0 success, 1 configuration error, 2 numeric failure,
// 3 a validation check failed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fptd/compare.hpp"
#include "fptd/config.hpp"
#include "fptd/fptd.hpp"

namespace fs = std::filesystem;
using namespace fptd;

namespace {

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_file;
  std::string drift, b, sigma, reference, dump_ensemble;
  double x = 0, level = 0, start = 0, t_max = 0, tail_T = 0, tail_n = 0, baseline_h = 0;
  std::size_t grid_points = 0, n = 0, m = 0, tail_mesh = 0, baseline_ne = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool correction = true, no_tail = false;
  std::string out_dir = ".";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw NumericFailure("cannot write " + path.string());
  os << text;
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::vector<double> estimation_grid(const RunConfig& c) { return uniform_grid(c.T, c.grid_points); }

void print_assumptions(const DriftModel& model) {
  const auto report = check_assumptions(model, std::max(10.0, 2.0 * model.x()));
  if (!report.warning.empty()) std::cerr << "warning: " << report.warning << "\n";
}

// --- estimate -------------------------------------------------------------

int cmd_estimate(const RunConfig& c, const Flags& f) {
  const auto model = model_from(c);
  print_assumptions(model);
  const auto grid = estimation_grid(c);
  const RunSettings run{c.N, c.M, c.seed, f.threads};
  const auto sample = sample_exponents(model, grid, run);
  const auto density = density_from(model, sample);
  const auto rate = rate_from(model, sample);

  const fs::path out(f.out_dir);
  fs::create_directories(out);
  std::ostringstream d, r;
  write_density_csv(d, density, rate);
  write_rate_csv(r, rate);
  write_text(out / "density.csv", d.str());
  write_text(out / "rate.csv", r.str());
  auto meta = to_json(c);
  meta["model"] = {{"drift", model.drift_text()},
                   {"x", model.x()},
                   {"prefactor_log", density.prefactor_log}};
  write_text(out / "meta.json", dump_json(meta));
  if (!f.dump_ensemble.empty()) {
    std::ofstream os(f.dump_ensemble, std::ios::binary);
    write_ensemble(os, BridgeEnsemble(c.N, c.M, c.seed), f.threads);
  }
  return 0;
}

// --- validate -------------------------------------------------------------

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

Check check_oracle(const DriftModel& model, const Reference& ref, const RunConfig& c, unsigned threads,
                   double lo, double hi) {
  const auto grid = linspace(lo, hi, 140);
  const auto est = estimate_density(model, grid, {c.N, c.M, c.seed, threads});
  std::size_t inside = 0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (std::abs(est.p_hat[j] - ref(grid[j])) <= 4.0 * est.std_err[j]) ++inside;
  const double frac = static_cast<double>(inside) / static_cast<double>(grid.size());
  return {"oracle |p_hat - p| <= 4 se", frac >= 0.95, fmt("%.3f of grid points inside (need 0.95)", frac)};
}

Reference reference_from_csv(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read reference " + file);
  std::string line;
  std::getline(is, line);
  std::vector<double> ts, ps;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    double t, p;
    char comma;
    if (ss >> t >> comma >> p) {
      ts.push_back(t);
      ps.push_back(p);
    }
  }
  if (ts.size() < 2) throw ConfigError("reference needs at least two rows of t,p");
  return [ts, ps](double t) {
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return ps.front();
    if (it == ts.end()) return ps.back();
    const std::size_t k = static_cast<std::size_t>(it - ts.begin());
    const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    return ps[k - 1] + w * (ps[k] - ps[k - 1]);
  };
}

int cmd_validate(const RunConfig& c, const Flags& f) {
  const auto model = model_from(c);
  std::vector<Check> checks;

  if (model.is_zero_drift()) {
    const auto grid = estimation_grid(c);
    const auto est = estimate_density(model, grid, {c.N, c.M, c.seed, f.threads});
    bool exact = true;
    for (std::size_t j = 0; j < grid.size(); ++j)
      exact = exact && est.p_hat[j] == bm_fpt_density(model.x(), grid[j]) && est.std_err[j] == 0.0;
    checks.push_back({"zero drift: p_hat == q_x exactly", exact, exact ? "exact" : "mismatch"});
  } else if (model.is_ornstein_uhlenbeck() && model.x() == 1.0) {
    const Reference ref = ou_fpt_density;
    checks.push_back(check_oracle(model, ref, c, f.threads, 0.1, 7.0));

    const std::pair<double, double> at_one{1.0, 1.0};
    const auto cov = covariance_diagnostic(model, std::span(&at_one, 1), 100,
                                           {1000, c.M, c.seed, f.threads}, ref);
    std::vector<double> z;
    for (const auto& row : cov.z_scores) z.push_back(std::abs(row[0]));
    std::sort(z.begin(), z.end());
    const double p95 = z[static_cast<std::size_t>(std::ceil(0.95 * z.size())) - 1];
    checks.push_back({"CI coverage at t=1: 95th pct |z| <= 2.3", p95 <= 2.3, fmt("%.3f", p95)});

    const auto grid = linspace(0.1, 5.0, 25);
    const std::size_t ns[] = {100, 1000, 10000};
    const auto table = convergence_scaling(model, grid, ns, 30, {0, 200, c.seed, f.threads}, ref);
    checks.push_back({"1/sqrt(N) scaling slope in [-0.62, -0.38]",
                      table.slope >= -0.62 && table.slope <= -0.38, fmt("%.3f", table.slope)});
  } else if (!f.reference.empty()) {
    checks.push_back(check_oracle(model, reference_from_csv(f.reference), c, f.threads,
                                  0.1 * c.T, c.T));
  } else {
    throw ConfigError("validate needs zero or OU drift (x = 1), or --reference t,p CSV");
  }

  {
    const std::size_t paths = 10000, steps = 2000;
    const BridgeEnsemble ens(paths, steps, c.seed);
    std::vector<double> maxima(paths);
    parallel_for(paths, f.threads, [&](std::size_t i) { maxima[i] = continuous_max_radius(ens.path(i)); });
    double worst = 0.0;
    for (double y : {0.8, 1.0, 1.2, 1.5}) {
      const double emp = static_cast<double>(std::count_if(maxima.begin(), maxima.end(),
                                                           [y](double m) { return m <= y; })) /
                         static_cast<double>(paths);
      worst = std::max(worst, std::abs(emp - bessel_max_cdf(y)));
    }
    checks.push_back({"bridge max law vs series (tol 0.015)", worst <= 0.015, fmt("max gap %.4f", worst)});
  }

  bool all = true;
  std::printf("%-45s %-6s %s\n", "check", "result", "detail");
  for (const auto& ch : checks) {
    std::printf("%-45s %-6s %s\n", ch.name.c_str(), ch.pass ? "PASS" : "FAIL", ch.detail.c_str());
    all = all && ch.pass;
  }
  return all ? 0 : 3;
}

// --- tail -----------------------------------------------------------------

int cmd_tail(const RunConfig& c, const Flags& f) {
  if (!c.tail.enabled) throw ConfigError("tail is disabled in the configuration");
  const auto model = model_from(c);
  const auto grid = estimation_grid(c);
  const auto est = estimate_density(model, grid, {c.N, c.M, c.seed, f.threads});
  double T = c.tail.T ? *c.tail.T : default_splice_time(est);
  // Snap a user-given T to the nearest grid time.
  T = *std::min_element(grid.begin(), grid.end(),
                        [T](double a, double b) { return std::abs(a - T) < std::abs(b - T); });
  const double n = c.tail.n ? *c.tail.n : std::max(8.0, 4.0 * model.x());

  nlohmann::json ladder = nlohmann::json::array();
  EigenResult first;
  for (double scale : {1.0, 2.0, 4.0}) {
    const auto e = principal_eigenvalue(model, n * scale, c.tail.mesh);
    if (scale == 1.0) first = e;
    ladder.push_back({{"n", n * scale}, {"mu1", e.mu1}, {"mu1_mesh", e.mu1_coarse},
                      {"mu1_2mesh", e.mu1_fine}});
  }
  const auto tm = build_tail(first, est, T);

  const fs::path out(f.out_dir);
  fs::create_directories(out);
  nlohmann::json meta = {{"T", tm.T}, {"lambda", tm.lambda}, {"c_star", tm.c_star},
                         {"n", tm.n}, {"mesh", tm.mesh}, {"ladder", ladder}};
  write_text(out / "eigen.json", dump_json(meta));

  std::vector<double> times;
  for (double t : grid)
    if (t <= tm.T) times.push_back(t);
  const double step = grid.size() > 1 ? grid[1] - grid[0] : grid[0];
  for (std::size_t k = 1; tm.T + step * static_cast<double>(k) <= 2.0 * c.T + 1e-9; ++k)
    times.push_back(tm.T + step * static_cast<double>(k));
  std::ostringstream os;
  write_mixture_csv(os, tm, times);
  write_text(out / "density_mixture.csv", os.str());
  return 0;
}

// --- compare --------------------------------------------------------------

int cmd_compare(const RunConfig& c, const Flags& f) {
  if (!c.baseline.enabled) throw ConfigError("baseline is disabled in the configuration");
  const auto model = model_from(c);
  Reference ref;
  if (model.is_zero_drift()) {
    const double x = model.x();
    ref = [x](double t) { return bm_fpt_density(x, t); };
  } else if (model.is_ornstein_uhlenbeck() && model.x() == 1.0) {
    ref = ou_fpt_density;
  } else if (!f.reference.empty()) {
    ref = reference_from_csv(f.reference);
  } else {
    throw ConfigError("compare needs a closed-form reference (zero or OU drift) or --reference");
  }
  CompareSettings s;
  s.t_max = c.T;
  s.grid_points = std::min<std::size_t>(c.grid_points, 100);
  s.h_values = {0.05, c.baseline.h};
  if (std::abs(c.baseline.h - 0.05) < 1e-12) s.h_values = {0.05};
  s.budget_h = c.baseline.h;
  s.euler_paths = c.baseline.N_e;
  s.correction = c.baseline.correction;
  s.steps = c.M;
  s.seed = c.seed;
  s.threads = f.threads;
  const auto report = compare_methods(model, ref, s);

  std::ostringstream csv;
  csv << "method,h,samples,wall_seconds,max_abs_error,mean_abs_error\n";
  std::printf("%-18s %-6s %-9s %-10s %-14s %-14s\n", "method", "h", "samples", "wall[s]", "max_abs_err",
              "mean_abs_err");
  for (const auto& r : report.rows) {
    std::printf("%-18s %-6g %-9zu %-10.3f %-14.6g %-14.6g\n", r.method.c_str(), r.h, r.samples,
                r.wall_seconds, r.max_abs_error, r.mean_abs_error);
    csv << r.method << ',' << format_number(r.h) << ',' << r.samples << ',' << format_number(r.wall_seconds)
        << ',' << format_number(r.max_abs_error) << ',' << format_number(r.mean_abs_error) << '\n';
  }
  const fs::path out(f.out_dir);
  fs::create_directories(out);
  write_text(out / "compare.csv", csv.str());
  return 0;
}

// --- lamperti -------------------------------------------------------------

int cmd_lamperti(const RunConfig& c) {
  if (!c.general) throw ConfigError("lamperti needs --b, --sigma, --level and --start");
  const auto result = lamperti_transform(*c.general);
  std::printf("x = %s\n", format_number(result.x).c_str());
  std::printf("a(F(v)) = %s   (v in the original coordinate)\n", result.model.drift_text().c_str());
  std::printf("z,a,gamma\n");
  for (int k = 0; k <= 10; ++k) {
    const double z = 2.0 * result.x * k / 10.0;
    std::printf("%s,%s,%s\n", format_number(z).c_str(), format_number(result.model.a(z)).c_str(),
                format_number(result.model.gamma(z)).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-passage-time densities of one-dimensional diffusions via 3-d Brownian bridges"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;

  app.add_option("--config", f.config_file, "JSON configuration file (flags override it)")
      ->envname("FPTD_CONFIG");
  auto* o_drift = app.add_option("--drift", f.drift, "drift a(z) as an expression in z")->envname("FPTD_DRIFT");
  auto* o_x = app.add_option("--x", f.x, "start level x > 0")->envname("FPTD_X");
  auto* o_b = app.add_option("--b", f.b, "general drift b(z)")->envname("FPTD_B");
  auto* o_sigma = app.add_option("--sigma", f.sigma, "general diffusion coefficient sigma(z)")->envname("FPTD_SIGMA");
  auto* o_level = app.add_option("--level", f.level, "passage level l")->envname("FPTD_LEVEL");
  auto* o_start = app.add_option("--start", f.start, "start y > l")->envname("FPTD_START");
  auto* o_tmax = app.add_option("--t-max", f.t_max, "end of the time grid")->envname("FPTD_T_MAX");
  auto* o_grid = app.add_option("--grid-points", f.grid_points, "points on (0, t-max]")->envname("FPTD_GRID_POINTS");
  auto* o_n = app.add_option("--n", f.n, "number of bridge paths N")->envname("FPTD_N");
  auto* o_m = app.add_option("--m", f.m, "bridge grid size M (even)")->envname("FPTD_M");
  auto* o_seed = app.add_option("--seed", f.seed, "base seed")->envname("FPTD_SEED");
  app.add_option("--threads", f.threads, "worker threads (does not change results)")->envname("FPTD_THREADS");
  app.add_option("--out-dir", f.out_dir, "output directory")->envname("FPTD_OUT_DIR");
  auto* o_tail_T = app.add_option("--tail-T", f.tail_T, "splice time T")->envname("FPTD_TAIL_T");
  auto* o_tail_n = app.add_option("--tail-n", f.tail_n, "eigenvalue domain length n")->envname("FPTD_TAIL_N");
  auto* o_tail_mesh = app.add_option("--tail-mesh", f.tail_mesh, "eigenvalue mesh")->envname("FPTD_TAIL_MESH");
  auto* o_bh = app.add_option("--baseline-h", f.baseline_h, "Euler step size")->envname("FPTD_BASELINE_H");
  auto* o_bne = app.add_option("--baseline-ne", f.baseline_ne, "Euler paths")->envname("FPTD_BASELINE_NE");
  auto* o_corr = app.add_flag("--correction,!--no-correction", f.correction, "bridge crossing correction")
                     ->envname("FPTD_CORRECTION");
  app.add_option("--reference", f.reference, "reference density CSV with columns t,p");
  app.add_option("--dump-ensemble", f.dump_ensemble, "write the bridge ensemble to this binary file");

  auto* estimate = app.add_subcommand("estimate", "estimate density and rate function");
  auto* validate_cmd = app.add_subcommand("validate", "run oracle checks");
  auto* tail = app.add_subcommand("tail", "principal eigenvalue and mixture tail");
  auto* compare = app.add_subcommand("compare", "direct estimator vs Euler + kernel smoothing");
  auto* lamperti = app.add_subcommand("lamperti", "print the unit-diffusion transform");

  CLI11_PARSE(app, argc, argv);

  RunConfig c;
  try {
    if (!f.config_file.empty()) {
      std::ifstream is(f.config_file);
      if (!is) throw ConfigError("cannot read " + f.config_file);
      nlohmann::json j;
      try {
        is >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
      }
      merge_json(c, j);
    }
    const bool general_flags = o_b->count() || o_sigma->count() || o_level->count() || o_start->count();
    if (o_drift->count()) {
      c.drift = f.drift;
      c.general.reset();
    }
    if (o_x->count()) c.x = f.x;
    if (general_flags) {
      GeneralDiffusionSpec g = c.general.value_or(GeneralDiffusionSpec{});
      if (o_b->count()) g.b = f.b;
      if (o_sigma->count()) g.sigma = f.sigma;
      if (o_level->count()) g.level = f.level;
      if (o_start->count()) g.start = f.start;
      c.general = g;
      if (!o_drift->count()) {
        c.drift.reset();
        c.x.reset();
      }
    }
    if (o_tmax->count()) c.T = f.t_max;
    if (o_grid->count()) c.grid_points = f.grid_points;
    if (o_n->count()) c.N = f.n;
    if (o_m->count()) c.M = f.m;
    if (o_seed->count()) c.seed = f.seed;
    if (o_tail_T->count()) c.tail.T = f.tail_T;
    if (o_tail_n->count()) c.tail.n = f.tail_n;
    if (o_tail_mesh->count()) c.tail.mesh = f.tail_mesh;
    if (o_bh->count()) c.baseline.h = f.baseline_h;
    if (o_bne->count()) c.baseline.N_e = f.baseline_ne;
    if (o_corr->count()) c.baseline.correction = f.correction;
    if (f.threads < 1) throw ConfigError("threads must be at least 1");

    if (lamperti->parsed()) {
      if (!c.general) throw ConfigError("lamperti needs --b, --sigma, --level and --start");
      c.drift.reset();
      c.x.reset();
    }
    validate(c);

    if (estimate->parsed()) return cmd_estimate(c, f);
    if (validate_cmd->parsed()) return cmd_validate(c, f);
    if (tail->parsed()) return cmd_tail(c, f);
    if (compare->parsed()) return cmd_compare(c, f);
    if (lamperti->parsed()) return cmd_lamperti(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "config error: cannot parse expression: " << e.what() << "\n";
    return 1;
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
