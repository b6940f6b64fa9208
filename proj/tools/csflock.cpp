#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

#include "csflock/csflock.hpp"

namespace fs = std::filesystem;
using namespace csflock;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotMet = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out = ".";
};

std::ofstream open_output(const Globals &g, const std::string &name) {
  fs::create_directories(g.out);
  const fs::path p = fs::path(g.out) / name;
  std::ofstream f(p, std::ios::binary);
  if (!f)
    throw ValidationError("cannot write '" + p.string() + "'");
  return f;
}

RunConfig load_config(const Globals &g) {
  RunConfig cfg;
  if (!g.config.empty())
    cfg = parse_config_file(g.config);
  else
    cfg.model.validate();
  if (g.seed)
    cfg.seed = *g.seed;
  return cfg;
}

unsigned workers(const Globals &g) { return g.workers ? std::max(1u, *g.workers) : default_workers(); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Shortest round-trip text for human-readable reports; CSV output keeps 17 digits.
std::string show(double x) {
  if (!std::isfinite(x))
    return format_double(x);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string opt_text(const std::optional<double> &v) { return v ? show(*v) : "none"; }

int cmd_criteria(double lambda, double sigma, double tau, std::optional<double> delta, double lipschitz, double ell,
                 bool as_json) {
  const FlockingCriteriaReport fc = critical_delay(lambda, sigma);
  const std::optional<double> bound = dgbm_bound(lambda, sigma);
  const OdeRegime regime = classify_delayed_ode(lambda * tau);
  const double d = delta.value_or(default_delta(lambda, sigma));
  const LyapunovParams lp = lyapunov_params(lambda, sigma, tau, d, lipschitz, ell);
  const bool sufficient = lp.flocking_sufficient();

  if (as_json) {
    auto opt = [](const std::optional<double> &v) -> nlohmann::json {
      return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["lambda"] = lambda;
    j["sigma_max"] = sigma;
    j["tau"] = tau;
    j["noise_ok"] = fc.noise_ok;
    j["tau_c"] = opt(fc.tau_c);
    j["kappa_max"] = fc.kappa_max;
    j["tau_c_kappa"] = opt(fc.tau_c_kappa);
    j["tau_c_quoted_variant"] = opt(fc.tau_c_quoted_variant);
    j["dgbm_bound"] = opt(bound);
    j["dgbm_condition"] = dgbm_condition_holds(lambda, sigma, tau);
    j["ode_regime"] = to_string(regime);
    j["delta"] = lp.delta;
    j["p"] = lp.p;
    j["q"] = lp.q;
    j["lipschitz"] = lp.lipschitz;
    j["ell"] = lp.ell;
    j["margin"] = lp.margin;
    j["epsilon"] = lp.epsilon();
    j["flocking_sufficient"] = sufficient;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "lambda                 " << show(lambda) << "\n"
              << "sigma_max              " << show(sigma) << "\n"
              << "tau                    " << show(tau) << "\n"
              << "noise condition        " << (fc.noise_ok ? "holds" : "violated (sigma_max^2 >= lambda)") << "\n"
              << "critical delay tau_c   " << opt_text(fc.tau_c) << "\n"
              << "tau_c (kappa form)     " << opt_text(fc.tau_c_kappa) << "\n"
              << "tau_c (quoted variant) " << opt_text(fc.tau_c_quoted_variant) << "\n"
              << "dgbm bound             " << opt_text(bound) << "\n"
              << "dgbm condition         " << (dgbm_condition_holds(lambda, sigma, tau) ? "holds" : "fails") << "\n"
              << "delayed ODE regime     " << to_string(regime) << "\n"
              << "delta                  " << show(lp.delta) << "\n"
              << "p, q                   " << show(lp.p) << ", " << show(lp.q) << "\n"
              << "lyapunov margin        " << show(lp.margin) << "\n"
              << "verdict                " << (sufficient ? "flocking-sufficient" : "not sufficient") << "\n";
  }
  return sufficient ? kExitOk : kExitNotMet;
}

int cmd_single_run(const Globals &g, const std::string &command) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(g);
  const IntegrationGrid grid = cfg.grid();
  const AnySystem sys = make_system(cfg.model);
  const DelayedTrajectory tr =
      std::visit([&](const auto &s) { return simulate_path(s, grid, SeedMaterial{cfg.seed, 0, 0, 0}); }, sys);

  {
    auto f = open_output(g, "trajectory.csv");
    write_trajectory_csv(f, tr, cfg.model, cfg.thin);
  }
  RunManifest m;
  m.command = command;
  m.config = cfg;
  m.wall_clock_seconds = seconds_since(start);
  m.diverged = {tr.diverged ? std::size_t{1} : std::size_t{0}};
  if (tr.diverged_at)
    m.extra.emplace_back("diverged_at_step", std::to_string(*tr.diverged_at));
  {
    auto f = open_output(g, "trajectory.manifest.ini");
    write_manifest(f, m);
  }
  std::cout << "wrote " << (fs::path(g.out) / "trajectory.csv").string() << " (" << tr.rows() << " steps)\n";
  if (tr.diverged) {
    std::cerr << "error: trajectory became non-finite at step " << *tr.diverged_at << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_sweep(const Globals &g, const std::string &command) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = load_config(g);
  SweepSpec spec = cfg.sweep_spec(workers(g));
  if (cfg.theta_calibrated)
    spec.theta = calibrate_theta(cfg.dt, cfg.t_end);
  const PhaseGrid pg = run_sweep(spec);

  {
    auto f = open_output(g, "phase_grid.csv");
    write_phase_grid_csv(f, pg, spec.theta);
  }
  RunManifest m;
  m.command = command;
  m.config = cfg;
  m.wall_clock_seconds = seconds_since(start);
  m.diverged = pg.diverged;
  m.extra.emplace_back("theta_value", format_double(spec.theta));
  {
    auto f = open_output(g, "phase_grid.manifest.ini");
    write_manifest(f, m);
  }
  std::cout << "wrote " << (fs::path(g.out) / "phase_grid.csv").string() << " (" << pg.rows() << "x" << pg.cols()
            << " cells, theta " << format_double(spec.theta) << ", " << pg.total_diverged() << " diverged paths)\n";
  return kExitOk;
}

int cmd_gbm_bias(const Globals &g, GbmBiasConfig cfg, const std::string &command) {
  const auto start = std::chrono::steady_clock::now();
  if (g.seed)
    cfg.seed = *g.seed;
  cfg.workers = workers(g);
  const GbmBiasResult res = run_gbm_bias(cfg);
  {
    auto f = open_output(g, "gbm_bias.csv");
    write_gbm_bias_csv(f, res);
  }
  auto f = open_output(g, "gbm_bias.manifest.ini");
  f << "[manifest]\ntool = csflock\nversion = " << kVersion << "\ncommand = " << command
    << "\nwall_clock_seconds = " << format_double(seconds_since(start)) << "\n\n[gbm_bias]\n"
    << "lambda = " << format_double(cfg.lambda) << "\nsigma = " << format_double(cfg.sigma)
    << "\npaths = " << cfg.paths << "\nt_end = " << format_double(cfg.t_end) << "\nsamples = " << cfg.samples
    << "\nseed = " << cfg.seed << "\neta = " << format_double(res.eta) << "\n";
  std::cout << "wrote " << (fs::path(g.out) / "gbm_bias.csv").string() << " (eta " << format_double(res.eta)
            << ")\n";
  return kExitOk;
}

int cmd_fundamental(const Globals &g, double lambda, double tau, double t_max, double dt,
                    std::optional<double> sigma, const std::string &command) {
  if (!(lambda > 0.0))
    throw ValidationError("lambda must be positive");
  const IntegrationGrid grid = IntegrationGrid::make(dt, t_max, tau);
  const std::vector<double> r = fundamental_solution(lambda, grid.tau, grid);
  {
    auto f = open_output(g, "fundamental.csv");
    write_fundamental_csv(f, grid, r);
  }
  auto f = open_output(g, "fundamental.manifest.ini");
  f << "[manifest]\ntool = csflock\nversion = " << kVersion << "\ncommand = " << command << "\n\n[fundamental]\n"
    << "lambda = " << format_double(lambda) << "\ntau = " << format_double(tau)
    << "\nt_max = " << format_double(t_max) << "\ndt = " << format_double(dt) << "\n";
  std::cout << "wrote " << (fs::path(g.out) / "fundamental.csv").string() << "\n"
            << "regime " << to_string(classify_delayed_ode(lambda * tau)) << "\n";
  if (sigma) {
    const L2Report rep = l2_criterion(lambda, tau, *sigma, t_max, dt);
    std::cout << "l2 integral   " << show(rep.integral) << "\n"
              << "threshold     " << show(rep.threshold) << "\n"
              << "tail fraction " << show(rep.tail_fraction) << "\n"
              << "verdict       " << to_string(rep.verdict) << "\n";
    if (!rep.note.empty())
      std::cout << "note          " << rep.note << "\n";
  }
  return kExitOk;
}

std::string join_args(int argc, char **argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i)
      s += ' ';
    s += argv[i];
  }
  return s;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Stochastic delayed Cucker-Smale flocking simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Configuration file (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed (overrides the configuration)");
  app.add_option("--workers", g.workers, "Worker threads (default: CSFLOCK_WORKERS or hardware threads)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  auto *crit = app.add_subcommand("criteria", "Evaluate the sufficient flocking conditions");
  double c_lambda = 1.0, c_sigma = 0.0, c_tau = 0.0, c_lip = 0.0, c_ell = 0.0;
  std::optional<double> c_delta;
  bool c_json = false;
  crit->add_option("--lambda", c_lambda, "Coupling strength")->capture_default_str();
  crit->add_option("--sigma", c_sigma, "Largest noise intensity")->capture_default_str();
  crit->add_option("--tau", c_tau, "Delay")->capture_default_str();
  crit->add_option("--delta", c_delta, "Young parameter (default lambda / (lambda - sigma^2))");
  crit->add_option("--lipschitz", c_lip, "Lipschitz constant of the rate function")->capture_default_str();
  crit->add_option("--ell", c_ell, "Lower bound on the Fiedler value")->capture_default_str();
  crit->add_flag("--json", c_json, "Machine-readable output");

  auto *single = app.add_subcommand("single-run", "Simulate one path and write its trajectory");
  auto *sweep = app.add_subcommand("sweep", "Flocking indicator over a two-parameter grid");

  auto *bias = app.add_subcommand("gbm-bias", "Monte-Carlo truncation bias for geometric Brownian motion");
  GbmBiasConfig b_cfg;
  bias->add_option("--lambda", b_cfg.lambda)->capture_default_str();
  bias->add_option("--sigma", b_cfg.sigma)->capture_default_str();
  bias->add_option("--paths", b_cfg.paths)->capture_default_str();
  bias->add_option("--t-end", b_cfg.t_end)->capture_default_str();
  bias->add_option("--samples", b_cfg.samples)->capture_default_str();

  auto *fund = app.add_subcommand("fundamental", "Fundamental solution of the delayed ODE");
  double f_lambda = 1.0, f_tau = 1.0, f_tmax = 10.0, f_dt = 1e-3;
  std::optional<double> f_sigma;
  fund->add_option("--lambda", f_lambda)->capture_default_str();
  fund->add_option("--tau", f_tau)->capture_default_str();
  fund->add_option("--t-max", f_tmax)->capture_default_str();
  fund->add_option("--dt", f_dt)->capture_default_str();
  fund->add_option("--sigma", f_sigma, "Noise intensity for the L2 criterion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = join_args(argc, argv);
  try {
    if (*crit)
      return cmd_criteria(c_lambda, c_sigma, c_tau, c_delta, c_lip, c_ell, c_json);
    if (*single)
      return cmd_single_run(g, command);
    if (*sweep)
      return cmd_sweep(g, command);
    if (*bias)
      return cmd_gbm_bias(g, b_cfg, command);
    if (*fund)
      return cmd_fundamental(g, f_lambda, f_tau, f_tmax, f_dt, f_sigma, command);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
