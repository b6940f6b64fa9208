#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "csflock/errors.hpp"
#include "csflock/laplacian.hpp"

namespace csflock {

enum class ModelVariant { DGBM, CSFixed, CSFull };

/// Which positions feed psi in the full model: lagged perceptions (default)
/// or the current configuration.
enum class RateTiming { Delayed, Current };

inline const char *to_string(ModelVariant v) {
  switch (v) {
  case ModelVariant::DGBM:
    return "dgbm";
  case ModelVariant::CSFixed:
    return "cs-fixed";
  case ModelVariant::CSFull:
    return "cs-full";
  }
  return "?";
}

/// First half of the agents at -1, second half at +1. n must be even.
inline std::vector<double> split_initial_data(std::size_t n) {
  if (n == 0 || n % 2 != 0)
    throw ValidationError("split initial datum needs an even, positive agent count");
  std::vector<double> v(n, 1.0);
  std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), -1.0);
  return v;
}

struct ModelSpec {
  ModelVariant variant = ModelVariant::DGBM;
  std::size_t n_agents = 1;
  std::size_t dim = 1;
  double lambda = 1.0;
  std::vector<double> sigma{0.0}; // one per agent
  double beta = 0.0;
  std::vector<double> initial_v{1.0}; // n_agents * dim, agent-major
  std::vector<double> initial_x;      // CSFull only
  RateTiming rate_timing = RateTiming::Delayed;
  std::optional<RateMatrix> rates;    // CSFixed; complete unit graph when absent

  double sigma_max() const {
    double m = 0.0;
    for (double s : sigma)
      m = std::max(m, std::abs(s));
    return m;
  }

  void set_uniform_sigma(double s) { sigma.assign(n_agents, s); }

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw ValidationError("lambda must be positive");
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw ValidationError("beta must be non-negative");
    if (n_agents < 1 || dim < 1)
      throw ValidationError("agent count and dimension must be positive");
    if (variant == ModelVariant::DGBM && (n_agents != 1 || dim != 1))
      throw ValidationError("DGBM is a scalar model (one agent, d = 1)");
    if (variant != ModelVariant::DGBM && n_agents < 2)
      throw ValidationError("Cucker-Smale models need at least two agents");
    if (sigma.size() != n_agents)
      throw ValidationError("sigma must list one value per agent (got " + std::to_string(sigma.size()) + ")");
    for (double s : sigma)
      if (!std::isfinite(s))
        throw ValidationError("sigma must be finite");
    if (initial_v.size() != n_agents * dim)
      throw ValidationError("initial_v must hold n_agents * dim values");
    if (variant == ModelVariant::CSFull && initial_x.size() != n_agents * dim)
      throw ValidationError("initial_x must hold n_agents * dim values");
    if (variant == ModelVariant::CSFixed && rates && rates->size() != n_agents)
      throw ValidationError("rate matrix size does not match agent count");
  }
};

// ---------------------------------------------------------------------------
// Right-hand sides

/// Delayed geometric Brownian motion: (drift, diffusion) = (-lambda w~, sigma w~).
inline std::pair<double, double> dgbm_rhs(double delayed_w, double lambda, double sigma) {
  return {-lambda * delayed_w, sigma * delayed_w};
}

struct VelocityRhs {
  std::vector<double> drift;
  std::vector<double> diffusion;
};

/// Fixed-communication consensus system with g = A v~:
/// drift_i = -(lambda/N) g_i, diffusion_i = -(sigma_i/N) g_i, i.e. both are
/// (1/N) sum_j psi_ij (v~_j - v~_i) scaled by lambda and sigma_i.
inline VelocityRhs cs_fixed_rhs(std::span<const double> delayed_v, const Laplacian &lap, double lambda,
                                std::span<const double> sigma) {
  const std::size_t n = lap.size();
  if (delayed_v.size() != n || sigma.size() != n)
    throw ValidationError("cs_fixed_rhs: dimension mismatch");
  VelocityRhs out{lap.apply(delayed_v), std::vector<double>(n)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = out.drift[i];
    out.drift[i] = -lambda * inv_n * g;
    out.diffusion[i] = -sigma[i] * inv_n * g;
  }
  return out;
}

struct FullRhs {
  std::vector<double> x_drift;
  std::vector<double> v_drift;
  std::vector<double> v_diffusion;
};

/// Full position-coupled system in d = 1. Rates are psi(|x~_i - x~_j|) from
/// the positions passed in (delayed ones under the default timing).
inline FullRhs cs_full_rhs(std::span<const double> delayed_x, std::span<const double> delayed_v,
                           std::span<const double> current_v, double lambda, std::span<const double> sigma,
                           double beta) {
  const std::size_t n = delayed_x.size();
  if (delayed_v.size() != n || current_v.size() != n || sigma.size() != n)
    throw ValidationError("cs_full_rhs: dimension mismatch");
  FullRhs out{std::vector<double>(current_v.begin(), current_v.end()), std::vector<double>(n, 0.0),
              std::vector<double>(n, 0.0)};
  std::vector<double> coupling(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double psi = cs_rate(std::abs(delayed_x[i] - delayed_x[j]), beta);
      const double diff = delayed_v[j] - delayed_v[i];
      coupling[i] += psi * diff;
      coupling[j] -= psi * diff;
    }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.v_drift[i] = lambda * inv_n * coupling[i];
    out.v_diffusion[i] = sigma[i] * inv_n * coupling[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Systems for the integrator (see DelaySystem in engine.hpp)

class DgbmSystem {
public:
  DgbmSystem(double lambda, double sigma, double initial_w) : lambda_(lambda), sigma_(sigma), w0_(initial_w) {}

  std::size_t width() const { return 1; }
  std::size_t velocity_offset() const { return 0; }
  std::size_t agents() const { return 1; }
  std::size_t dim() const { return 1; }
  bool has_noise() const { return sigma_ != 0.0; }
  std::vector<double> initial_state() const { return {w0_}; }

  void evaluate(std::span<const double>, std::span<const double> delayed, std::span<double> drift,
                std::span<double> diffusion) const {
    const auto [f, g] = dgbm_rhs(delayed[0], lambda_, sigma_);
    drift[0] = f;
    diffusion[0] = g;
  }

private:
  double lambda_, sigma_, w0_;
};

class CsFixedSystem {
public:
  CsFixedSystem(Laplacian lap, double lambda, std::vector<double> sigma, std::vector<double> initial_v,
                std::size_t dim = 1)
      : lap_(std::move(lap)), lambda_(lambda), sigma_(std::move(sigma)), v0_(std::move(initial_v)), dim_(dim),
        noisy_(std::any_of(sigma_.begin(), sigma_.end(), [](double s) { return s != 0.0; })) {
    if (sigma_.size() != lap_.size() || v0_.size() != lap_.size() * dim_)
      throw ValidationError("CsFixedSystem: dimension mismatch");
  }

  std::size_t width() const { return lap_.size() * dim_; }
  std::size_t velocity_offset() const { return 0; }
  std::size_t agents() const { return lap_.size(); }
  std::size_t dim() const { return dim_; }
  bool has_noise() const { return noisy_; }
  std::vector<double> initial_state() const { return v0_; }
  const Laplacian &laplacian() const { return lap_; }

  void evaluate(std::span<const double>, std::span<const double> delayed, std::span<double> drift,
                std::span<double> diffusion) const {
    const std::size_t n = lap_.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < dim_; ++c) {
      // drift temporarily holds g = (A v~) component c
      if (lap_.is_complete_unit()) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          total += delayed[j * dim_ + c];
        for (std::size_t i = 0; i < n; ++i)
          drift[i * dim_ + c] = static_cast<double>(n) * delayed[i * dim_ + c] - total;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += lap_(i, j) * delayed[j * dim_ + c];
          drift[i * dim_ + c] = acc;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < dim_; ++c) {
        const double g = drift[i * dim_ + c];
        drift[i * dim_ + c] = -lambda_ * inv_n * g;
        diffusion[i * dim_ + c] = -sigma_[i] * inv_n * g;
      }
  }

private:
  Laplacian lap_;
  double lambda_;
  std::vector<double> sigma_;
  std::vector<double> v0_;
  std::size_t dim_;
  bool noisy_;
};

/// State layout: [x (n*dim) | v (n*dim)]. Positions integrate the current
/// velocity; velocities follow the delayed alignment force.
class CsFullSystem {
public:
  CsFullSystem(double lambda, std::vector<double> sigma, double beta, std::vector<double> initial_x,
               std::vector<double> initial_v, std::size_t dim = 1, RateTiming timing = RateTiming::Delayed)
      : lambda_(lambda), sigma_(std::move(sigma)), beta_(beta), x0_(std::move(initial_x)), v0_(std::move(initial_v)),
        n_(sigma_.size()), dim_(dim), timing_(timing),
        noisy_(std::any_of(sigma_.begin(), sigma_.end(), [](double s) { return s != 0.0; })) {
    if (x0_.size() != n_ * dim_ || v0_.size() != n_ * dim_)
      throw ValidationError("CsFullSystem: dimension mismatch");
  }

  std::size_t width() const { return 2 * n_ * dim_; }
  std::size_t velocity_offset() const { return n_ * dim_; }
  std::size_t agents() const { return n_; }
  std::size_t dim() const { return dim_; }
  bool has_noise() const { return noisy_; }
  std::vector<double> initial_state() const {
    std::vector<double> s(x0_);
    s.insert(s.end(), v0_.begin(), v0_.end());
    return s;
  }

  void evaluate(std::span<const double> current, std::span<const double> delayed, std::span<double> drift,
                std::span<double> diffusion) const {
    const std::size_t nd = n_ * dim_;
    const double *xr = timing_ == RateTiming::Delayed ? delayed.data() : current.data();
    const double *vd = delayed.data() + nd;
    std::vector<double> coupling(nd, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        double dist2 = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
          const double dx = xr[i * dim_ + c] - xr[j * dim_ + c];
          dist2 += dx * dx;
        }
        const double psi = cs_rate(std::sqrt(dist2), beta_);
        for (std::size_t c = 0; c < dim_; ++c) {
          const double diff = vd[j * dim_ + c] - vd[i * dim_ + c];
          coupling[i * dim_ + c] += psi * diff;
          coupling[j * dim_ + c] -= psi * diff;
        }
      }
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t k = 0; k < nd; ++k) {
      drift[k] = current[nd + k];
      diffusion[k] = 0.0;
    }
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t c = 0; c < dim_; ++c) {
        const std::size_t k = i * dim_ + c;
        drift[nd + k] = lambda_ * inv_n * coupling[k];
        diffusion[nd + k] = sigma_[i] * inv_n * coupling[k];
      }
  }

private:
  double lambda_;
  std::vector<double> sigma_;
  double beta_;
  std::vector<double> x0_, v0_;
  std::size_t n_, dim_;
  RateTiming timing_;
  bool noisy_;
};

using AnySystem = std::variant<DgbmSystem, CsFixedSystem, CsFullSystem>;

inline AnySystem make_system(const ModelSpec &spec) {
  spec.validate();
  switch (spec.variant) {
  case ModelVariant::DGBM:
    return DgbmSystem(spec.lambda, spec.sigma[0], spec.initial_v[0]);
  case ModelVariant::CSFixed: {
    const RateMatrix rates = spec.rates ? *spec.rates : RateMatrix::complete(spec.n_agents);
    return CsFixedSystem(build_laplacian(rates), spec.lambda, spec.sigma, spec.initial_v, spec.dim);
  }
  case ModelVariant::CSFull:
    return CsFullSystem(spec.lambda, spec.sigma, spec.beta, spec.initial_x, spec.initial_v, spec.dim,
                        spec.rate_timing);
  }
  throw ValidationError("unknown model variant");
}

} // namespace csflock
