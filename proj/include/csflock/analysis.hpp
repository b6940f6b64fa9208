#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csflock/engine.hpp"
#include "csflock/errors.hpp"
#include "csflock/grid.hpp"
#include "csflock/laplacian.hpp"
#include "csflock/models.hpp"

namespace csflock {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Micro-macro decomposition

struct MicroMacro {
  double mean = 0.0;              // V_c
  std::vector<double> fluctuation; // w, sums to zero
};

inline MicroMacro micro_macro(std::span<const double> v) {
  if (v.empty())
    throw ValidationError("micro_macro: empty velocity vector");
  MicroMacro out;
  double s = 0.0;
  for (double x : v)
    s += x;
  out.mean = s / static_cast<double>(v.size());
  out.fluctuation.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.fluctuation[i] = v[i] - out.mean;
  return out;
}

// ---------------------------------------------------------------------------
// Flocking criteria

struct FlockingCriteriaReport {
  double lambda = 0.0;
  double sigma_max = 0.0;
  bool noise_ok = false;              // sigma_max^2 < lambda
  std::optional<double> tau_c;        // critical delay for a constant matrix
  double kappa_max = 0.0;             // sigma_max / lambda
  bool kappa_form_ok = false;         // lambda * kappa_max^2 < 1
  std::optional<double> tau_c_kappa;  // same bound written in kappa_max
  // The worked numbers quoted alongside the time-delay-induced-flocking
  // experiment (0.35 at sigma = 0, 0.17 at sigma = 0.5) match neither tau_c
  // nor any other printed form; they coincide with the variant
  // (-s^2/2 + sqrt(s^4/4 + (lambda - s^2)^2 / 8)) / lambda^2. Reported only.
  std::optional<double> tau_c_quoted_variant;
};

inline FlockingCriteriaReport critical_delay(double lambda, double sigma_max) {
  if (!(lambda > 0.0))
    throw ValidationError("critical_delay: lambda must be positive");
  if (!(sigma_max >= 0.0))
    throw ValidationError("critical_delay: sigma_max must be non-negative");
  FlockingCriteriaReport r;
  r.lambda = lambda;
  r.sigma_max = sigma_max;
  const double s2 = sigma_max * sigma_max;
  r.noise_ok = s2 < lambda;
  r.kappa_max = sigma_max / lambda;
  r.kappa_form_ok = lambda * r.kappa_max * r.kappa_max < 1.0;
  if (r.noise_ok) {
    const double gap = lambda - s2;
    r.tau_c = (-s2 + std::sqrt(s2 * s2 + gap * gap / 12.0)) / (lambda * lambda);
    const double k2 = r.kappa_max * r.kappa_max;
    const double kgap = 1.0 - lambda * k2;
    r.tau_c_kappa = -k2 + std::sqrt(k2 * k2 + kgap * kgap / (12.0 * lambda * lambda));
    r.tau_c_quoted_variant = (-s2 / 2.0 + std::sqrt(s2 * s2 / 4.0 + gap * gap / 8.0)) / (lambda * lambda);
  }
  return r;
}

/// Largest delay for which the delayed GBM sufficient condition holds; empty
/// when sigma^2 >= 2 lambda.
inline std::optional<double> dgbm_bound(double lambda, double sigma) {
  if (!(lambda > 0.0))
    throw ValidationError("dgbm_bound: lambda must be positive");
  const double s2 = sigma * sigma;
  if (!(s2 < 2.0 * lambda))
    return std::nullopt;
  const double gap = 2.0 * lambda - s2;
  return (-2.0 * s2 + std::sqrt(4.0 * s2 * s2 + 2.0 * gap * gap)) / (4.0 * lambda * lambda);
}

/// Both parts of the delayed-GBM condition at a given delay.
inline bool dgbm_condition_holds(double lambda, double sigma, double tau) {
  const auto b = dgbm_bound(lambda, sigma);
  return b && tau < *b;
}

enum class OdeRegime { MonotoneDecay, DampedOscillation, Periodic, Divergent };

inline const char *to_string(OdeRegime r) {
  switch (r) {
  case OdeRegime::MonotoneDecay:
    return "monotone-decay";
  case OdeRegime::DampedOscillation:
    return "damped-oscillation";
  case OdeRegime::Periodic:
    return "periodic";
  case OdeRegime::Divergent:
    return "divergent";
  }
  return "?";
}

/// Qualitative behaviour of w' = -lambda w(t - tau) from constant data.
inline OdeRegime classify_delayed_ode(double lambda_tau) {
  if (!(lambda_tau >= 0.0))
    throw ValidationError("classify_delayed_ode: lambda*tau must be non-negative");
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (std::abs(lambda_tau - half_pi) <= 1e-12)
    return OdeRegime::Periodic;
  if (lambda_tau <= 1.0 / std::numbers::e)
    return OdeRegime::MonotoneDecay;
  if (lambda_tau < half_pi)
    return OdeRegime::DampedOscillation;
  return OdeRegime::Divergent;
}

// ---------------------------------------------------------------------------
// Fundamental solution of r'(t) = -lambda r(t - tau), r(0) = 1, r = 0 on (-tau, 0)

/// Method of steps: on [m tau, (m+1) tau] the solution is a polynomial p_m in
/// s = t - m tau with p_{m+1}(s) = p_m(tau) - lambda * int_0^s p_m. Terms whose
/// contribution on [0, tau] falls below 1e-18 of the polynomial's scale are
/// dropped.
class FundamentalSolution {
public:
  FundamentalSolution(double lambda, double tau, double t_max) : lambda_(lambda), tau_(tau) {
    if (!(lambda > 0.0))
      throw ValidationError("fundamental solution: lambda must be positive");
    if (!(tau >= 0.0))
      throw ValidationError("fundamental solution: tau must be non-negative");
    if (tau == 0.0)
      return;
    const auto intervals = static_cast<std::size_t>(std::floor(t_max / tau)) + 1;
    pieces_.reserve(intervals);
    pieces_.push_back({1.0});
    while (pieces_.size() < intervals) {
      const std::vector<double> &p = pieces_.back();
      std::vector<double> next(p.size() + 1);
      next[0] = horner(p, tau_);
      double scale = std::abs(next[0]);
      double pw = 1.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        next[k + 1] = -lambda_ * p[k] / static_cast<double>(k + 1);
        pw *= tau_;
        scale += std::abs(next[k + 1]) * pw;
      }
      // trim negligible high-order terms
      double tail_pw = std::pow(tau_, static_cast<double>(next.size() - 1));
      while (next.size() > 1 && std::abs(next.back()) * tail_pw < 1e-18 * scale) {
        next.pop_back();
        tail_pw /= tau_;
      }
      pieces_.push_back(std::move(next));
    }
  }

  double operator()(double t) const {
    if (t < 0.0)
      return 0.0;
    if (tau_ == 0.0)
      return std::exp(-lambda_ * t);
    auto m = static_cast<std::size_t>(std::floor(t / tau_));
    m = std::min(m, pieces_.size() - 1);
    return horner(pieces_[m], t - static_cast<double>(m) * tau_);
  }

private:
  static double horner(const std::vector<double> &c, double s) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it)
      acc = acc * s + *it;
    return acc;
  }

  double lambda_, tau_;
  std::vector<std::vector<double>> pieces_;
};

/// r_lambda sampled at grid.time(k), k = 0..n_steps.
inline std::vector<double> fundamental_solution(double lambda, double tau, const IntegrationGrid &grid) {
  const FundamentalSolution r(lambda, tau, grid.t_end);
  std::vector<double> out(grid.n_steps + 1);
  for (std::size_t k = 0; k <= grid.n_steps; ++k)
    out[k] = r(grid.time(k));
  return out;
}

enum class CriterionVerdict { Satisfied, Failed, Inconclusive };

inline const char *to_string(CriterionVerdict v) {
  switch (v) {
  case CriterionVerdict::Satisfied:
    return "satisfied";
  case CriterionVerdict::Failed:
    return "failed";
  case CriterionVerdict::Inconclusive:
    return "inconclusive";
  }
  return "?";
}

struct L2Report {
  double integral = 0.0;      // trapezoid of r^2 on [0, t_max]; +inf if r grows
  double threshold = kInf;    // 1 / sigma^2
  double tail_fraction = 0.0; // share of the integral on the last 10% of the horizon
  OdeRegime regime = OdeRegime::MonotoneDecay;
  CriterionVerdict verdict = CriterionVerdict::Inconclusive;
  std::string note;
};

/// Mean-square stability test int_0^inf r^2 < 1/sigma^2, truncated at t_max.
/// A verdict of Satisfied needs the last 10% of the horizon to carry less than
/// 1e-6 of the mass; otherwise the result is Inconclusive unless the partial
/// integral already exceeds the threshold.
inline L2Report l2_criterion(double lambda, double tau, double sigma, double t_max, double dt) {
  L2Report rep;
  rep.regime = classify_delayed_ode(lambda * tau);
  rep.threshold = sigma == 0.0 ? kInf : 1.0 / (sigma * sigma);
  if (rep.regime == OdeRegime::Divergent || rep.regime == OdeRegime::Periodic) {
    rep.integral = kInf;
    rep.verdict = CriterionVerdict::Failed;
    rep.note = "r does not decay (lambda*tau >= pi/2); the L2 norm is infinite";
    return rep;
  }
  const auto grid = IntegrationGrid::make(dt, t_max, 0.0);
  const std::vector<double> r = fundamental_solution(lambda, tau, grid);
  const std::size_t tail_start = grid.n_steps - grid.n_steps / 10;
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double piece = 0.5 * dt * (r[k] * r[k] + r[k + 1] * r[k + 1]);
    total += piece;
    if (k >= tail_start)
      tail += piece;
  }
  rep.integral = total;
  rep.tail_fraction = total > 0.0 ? tail / total : 0.0;
  if (total >= rep.threshold) {
    rep.verdict = CriterionVerdict::Failed;
  } else if (rep.tail_fraction < 1e-6) {
    rep.verdict = CriterionVerdict::Satisfied;
  } else {
    rep.verdict = CriterionVerdict::Inconclusive;
    rep.note = "tail mass not negligible; increase t_max";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lyapunov functional

struct LyapunovParams {
  double lambda = 0.0, sigma_max = 0.0, tau = 0.0;
  double delta = 0.0;
  double p = 0.0, q = 0.0;
  double lipschitz = 0.0; // L
  double ell = 0.0;       // Fiedler lower bound
  double margin = 0.0;    // -2 lambda + lambda/delta + 2 q (L tau / ell + 1)
  bool flocking_sufficient() const { return margin < 0.0; }
  /// Decay rate when sufficient, else 0.
  double epsilon() const { return margin < 0.0 ? -margin : 0.0; }
};

/// delta = lambda / (lambda - sigma_max^2): the maximiser of the admissible
/// delay for constant matrices and the midpoint of the admissible range
/// otherwise. Falls back to 1 when sigma_max^2 >= lambda (no admissible delta).
inline double default_delta(double lambda, double sigma_max) {
  const double gap = lambda - sigma_max * sigma_max;
  return gap > 0.0 ? lambda / gap : 1.0;
}

inline LyapunovParams lyapunov_params(double lambda, double sigma_max, double tau, double delta, double L = 0.0,
                                      double ell = 0.0) {
  if (!(lambda > 0.0) || !(delta > 0.0))
    throw ValidationError("lyapunov_params: lambda and delta must be positive");
  if (!(sigma_max >= 0.0) || !(tau >= 0.0) || !(L >= 0.0))
    throw ValidationError("lyapunov_params: sigma_max, tau and L must be non-negative");
  if (L > 0.0 && !(ell > 0.0))
    throw ValidationError("lyapunov_params: ell must be positive when L > 0");
  LyapunovParams lp;
  lp.lambda = lambda;
  lp.sigma_max = sigma_max;
  lp.tau = tau;
  lp.delta = delta;
  lp.lipschitz = L;
  lp.ell = ell;
  const double s2 = sigma_max * sigma_max;
  lp.p = 6.0 * lambda * delta * (lambda * lambda * tau + 2.0 * s2);
  lp.q = s2 + lp.p * tau;
  const double drift_term = L > 0.0 ? L * tau / ell : 0.0;
  lp.margin = -2.0 * lambda + lambda / delta + 2.0 * lp.q * (drift_term + 1.0);
  return lp;
}

/// Lyapunov functional at the last row of `window`.
///
/// `window` holds velocity rows (n values each) on consecutive grid steps
/// covering at least [t - 2 tau, t], i.e. 2 * delay_steps + 1 rows; only the
/// last 2 * delay_steps + 1 rows are read. Fluctuations w are taken from
/// micro_macro. Integrals use the trapezoid rule; the double integral is the
/// single integral of |A w(s - tau)|^2 weighted by (s - (t - tau)).
inline double lyapunov_value(std::span<const double> window, std::size_t n, const Laplacian &lap, double p, double q,
                             std::size_t delay_steps, double dt) {
  if (n == 0 || window.size() % n != 0)
    throw ValidationError("lyapunov_value: window is not a whole number of rows");
  if (lap.size() != n)
    throw ValidationError("lyapunov_value: Laplacian size mismatch");
  const std::size_t rows = window.size() / n;
  const std::size_t m = delay_steps;
  if (rows < 2 * m + 1)
    throw ValidationError("lyapunov_value: window must cover [t - 2 tau, t] (" + std::to_string(2 * m + 1) +
                          " rows), got " + std::to_string(rows));
  const std::size_t base = rows - (2 * m + 1);
  const double inv_n2 = 1.0 / static_cast<double>(n * n);

  std::vector<double> h(2 * m + 1);
  std::vector<double> aw(n);
  for (std::size_t j = 0; j < h.size(); ++j) {
    const auto w = micro_macro(window.subspan((base + j) * n, n)).fluctuation;
    lap.apply(w, aw);
    double s = 0.0;
    for (double x : aw)
      s += x * x;
    h[j] = s * inv_n2;
  }

  const auto w_now = micro_macro(window.subspan((rows - 1) * n, n)).fluctuation;
  double value = 0.0;
  for (double x : w_now)
    value += x * x;
  if (m == 0)
    return value;

  double single = 0.0, weighted = 0.0;
  for (std::size_t j = m; j < 2 * m; ++j) {
    single += 0.5 * dt * (h[j] + h[j + 1]);
    // s - (t - tau) at rows j and j+1 is (j - m) dt and (j + 1 - m) dt; the
    // delayed integrand sits m rows earlier.
    const double w0 = static_cast<double>(j - m) * dt;
    const double w1 = static_cast<double>(j + 1 - m) * dt;
    weighted += 0.5 * dt * (w0 * h[j - m] + w1 * h[j + 1 - m]);
  }
  return value + q * single + p * weighted;
}

/// Rows k - 2m .. k of a velocity trajectory, padding with the constant
/// pre-history (row 0) before t = 0.
inline std::vector<double> lyapunov_window(const DelayedTrajectory &tr, std::size_t k) {
  const std::size_t m = tr.grid.delay_steps;
  if (k >= tr.rows())
    throw ValidationError("lyapunov_window: step beyond trajectory");
  std::vector<double> out;
  out.reserve((2 * m + 1) * tr.width);
  for (std::size_t j = 0; j <= 2 * m; ++j) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(2 * m) +
                               static_cast<std::ptrdiff_t>(j);
    const auto row = tr.row(idx < 0 ? 0 : static_cast<std::size_t>(idx));
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flocking indicator

struct IndicatorResult {
  double value = 0.0;          // mean over finite paths; +inf if none
  std::size_t finite_paths = 0;
  std::size_t diverged_paths = 0;
};

/// (1/Q) sum_q ( dt/n sum_{k=k0}^{k1} |v^q_k|^2 )^{1/2} with
/// k0 = round(t_from/dt), k1 = round(t_to/dt). The root is taken per path
/// before averaging; diverged paths are excluded and counted.
inline IndicatorResult indicator_from_windows(std::span<const PathWindow> windows, double t_from, double t_to,
                                              std::size_t n, double dt) {
  if (!(t_to > t_from) || t_from < 0.0)
    throw ValidationError("indicator window must satisfy 0 <= t_from < t_to");
  if (n == 0)
    throw ValidationError("indicator needs a positive agent count");
  const auto k0 = static_cast<std::size_t>(std::llround(t_from / dt));
  const auto k1 = static_cast<std::size_t>(std::llround(t_to / dt));
  IndicatorResult res;
  double acc = 0.0;
  for (const PathWindow &w : windows) {
    if (w.diverged) {
      ++res.diverged_paths;
      continue;
    }
    if (k0 < w.first_step || k1 >= w.first_step + w.sq_norms.size())
      throw ValidationError("indicator window exceeds the retained trajectory window");
    double s = 0.0;
    for (std::size_t k = k0; k <= k1; ++k)
      s += w.sq_norms[k - w.first_step];
    acc += std::sqrt(dt / static_cast<double>(n) * s);
    ++res.finite_paths;
  }
  res.value = res.finite_paths > 0 ? acc / static_cast<double>(res.finite_paths) : kInf;
  return res;
}

/// Indicator over the terminal unit window [T - 1, T].
inline IndicatorResult flocking_indicator(const EnsembleStats &ens, double window = 1.0) {
  const double t_end = ens.grid.t_end;
  if (window > t_end)
    throw ValidationError("indicator window exceeds the trajectory");
  return indicator_from_windows(ens.windows, t_end - window, t_end, ens.agents, ens.grid.dt);
}

inline constexpr double kDefaultTheta = 1e-2;

inline bool numerical_flocking(double indicator, double theta = kDefaultTheta) { return indicator < theta; }

/// Threshold anchored at the noise-free DGBM with lambda = 1 and
/// tau = pi/2 (snapped to dt): Theta = I_{0, pi/2}.
inline double calibrate_theta(double dt, double t_end) {
  const auto grid = IntegrationGrid::make(dt, t_end, snap_to_grid(std::numbers::pi / 2.0, dt));
  const DgbmSystem sys(1.0, 0.0, 1.0);
  EnsembleOptions opt;
  opt.record_moments = false;
  const auto ens = run_ensemble(sys, grid, 1, 0, opt);
  return flocking_indicator(ens).value;
}

// ---------------------------------------------------------------------------
// Monte-Carlo truncation bias for geometric Brownian motion (2 lambda = sigma^2)

/// E[v-bar^2] / E[v^2] for a density truncated at |z| <= eta sqrt(4 lambda t):
///   [erfc(-eta - s) - erfc(eta - s)] / (2 erf(eta)),  s = sqrt(4 lambda t).
/// Evaluated as [erfc(s - eta) - erfc(s + eta)] / (2 erf(eta)), the same
/// quantity without cancellation between two values near 2 at large s.
inline double gbm_truncation_ratio(double lambda, double t, double eta) {
  if (!(eta > 0.0))
    throw ValidationError("gbm_truncation_ratio: eta must be positive");
  if (!(lambda > 0.0) || !(t >= 0.0))
    throw ValidationError("gbm_truncation_ratio: need lambda > 0 and t >= 0");
  const double s = std::sqrt(4.0 * lambda * t);
  return (std::erfc(s - eta) - std::erfc(s + eta)) / (2.0 * std::erf(eta));
}

/// Large-time approximation 2 eta / (sqrt(pi) erf(eta)) exp(-4 lambda t).
inline double gbm_truncation_ratio_asymptote(double lambda, double t, double eta) {
  return 2.0 * eta / (std::sqrt(std::numbers::pi) * std::erf(eta)) * std::exp(-4.0 * lambda * t);
}

/// max over samples of |z(t)| / sqrt(4 lambda t); every t must be positive.
inline double eta_from_path(std::span<const double> times, std::span<const double> z, double lambda) {
  if (times.empty() || times.size() != z.size())
    throw ValidationError("eta_from_path: need matching, non-empty samples");
  double eta = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0))
      throw ValidationError("eta_from_path: sample times must be positive");
    eta = std::max(eta, std::abs(z[i]) / std::sqrt(4.0 * lambda * times[i]));
  }
  return eta;
}

struct GbmMoments {
  double mean;
  double second_moment;
};

/// Exact moments of dv = lambda v dt + sqrt(2 lambda) v dB, v(0) = 1.
inline GbmMoments gbm_exact_moments(double lambda, double t) {
  return {std::exp(lambda * t), std::exp(4.0 * lambda * t)};
}

} // namespace csflock
