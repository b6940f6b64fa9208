#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "csflock/analysis.hpp"
#include "csflock/engine.hpp"
#include "csflock/random.hpp"

namespace csflock {

struct GbmBiasConfig {
  double lambda = 0.5;
  double sigma = 1.0;
  std::size_t paths = 100000;
  double t_end = 30.0;
  std::size_t samples = 1000; // sampling intervals on [0, T]
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct GbmBiasRow {
  double t;
  double log_mc_second_moment;
  double log_exact_second_moment;
  double log_ratio_mc;
  double log_ratio_theory;
};

struct GbmBiasResult {
  double eta = 0.0; // pooled over every path and sample time
  std::vector<GbmBiasRow> rows;
};

/// Monte-Carlo estimate of E[exp(2 z)] for dz = (lambda - sigma^2/2) dt + sigma dB
/// sampled exactly at the grid points, compared with the exact second moment
/// of v = exp(z) and with the truncated-density prediction at the pooled eta.
/// Only meaningful in the regime 2 lambda = sigma^2.
inline GbmBiasResult run_gbm_bias(const GbmBiasConfig &cfg) {
  if (!(cfg.lambda > 0.0))
    throw ValidationError("gbm-bias: lambda must be positive");
  if (std::abs(cfg.sigma * cfg.sigma - 2.0 * cfg.lambda) > 1e-12 * std::max(1.0, 2.0 * cfg.lambda))
    throw ValidationError("gbm-bias: the truncation analysis needs 2 lambda = sigma^2");
  if (cfg.paths < 1 || cfg.samples < 1)
    throw ValidationError("gbm-bias: need at least one path and one sample interval");
  if (!(cfg.t_end > 0.0))
    throw ValidationError("gbm-bias: T must be positive");

  const std::size_t rows = cfg.samples + 1;
  const double dt = cfg.t_end / static_cast<double>(cfg.samples);
  const double drift = (cfg.lambda - 0.5 * cfg.sigma * cfg.sigma) * dt;
  const double scale = cfg.sigma * std::sqrt(dt);
  std::vector<double> times(rows);
  for (std::size_t k = 0; k < rows; ++k)
    times[k] = static_cast<double>(k) * dt;

  struct Partial {
    std::vector<double> sum;
    double eta = 0.0;
  };
  std::vector<double> sum(rows, 0.0);
  double eta = 0.0;
  const std::size_t blocks = (cfg.paths + detail::kPathsPerBlock - 1) / detail::kPathsPerBlock;
  constexpr std::size_t kWave = 64;
  for (std::size_t wave = 0; wave < blocks; wave += kWave) {
    const std::size_t in_wave = std::min(kWave, blocks - wave);
    std::vector<Partial> partials(in_wave);
    detail::parallel_for(in_wave, cfg.workers, [&](std::size_t b) {
      Partial &part = partials[b];
      part.sum.assign(rows, 0.0);
      const std::size_t begin = (wave + b) * detail::kPathsPerBlock;
      const std::size_t end = std::min(cfg.paths, begin + detail::kPathsPerBlock);
      for (std::size_t q = begin; q < end; ++q) {
        NoiseStream noise({cfg.seed, 0, static_cast<std::uint32_t>(q), 0});
        double z = 0.0;
        part.sum[0] += 1.0;
        for (std::size_t k = 1; k < rows; ++k) {
          z += drift + scale * noise.normal();
          part.sum[k] += std::exp(2.0 * z);
          part.eta = std::max(part.eta, std::abs(z) / std::sqrt(4.0 * cfg.lambda * times[k]));
        }
      }
    });
    for (const Partial &p : partials) {
      for (std::size_t k = 0; k < rows; ++k)
        sum[k] += p.sum[k];
      eta = std::max(eta, p.eta);
    }
  }

  GbmBiasResult res;
  res.eta = eta;
  res.rows.reserve(rows);
  const double inv_q = 1.0 / static_cast<double>(cfg.paths);
  for (std::size_t k = 0; k < rows; ++k) {
    const double t = times[k];
    const double log_mc = std::log(sum[k] * inv_q);
    const double log_exact = 4.0 * cfg.lambda * t; // log of gbm_exact_moments().second_moment
    const double theory = eta > 0.0 ? std::log(gbm_truncation_ratio(cfg.lambda, t, eta)) : 0.0;
    res.rows.push_back({t, log_mc, log_exact, log_mc - log_exact, theory});
  }
  return res;
}

} // namespace csflock
