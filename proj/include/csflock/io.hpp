#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "csflock/analysis.hpp"
#include "csflock/bias.hpp"
#include "csflock/config.hpp"
#include "csflock/engine.hpp"
#include "csflock/models.hpp"
#include "csflock/sweep.hpp"
#include "csflock/version.hpp"

namespace csflock {

// All CSV output: '\n' line endings, 17 significant digits.

/// `t,agent,x,v`, one row per (sample time, agent); x is empty for
/// velocity-only models. Every `thin`-th grid step is written, plus the last
/// stored one.
inline void write_trajectory_csv(std::ostream &out, const DelayedTrajectory &tr, const ModelSpec &model,
                                 std::size_t thin = 1) {
  const std::size_t n = model.n_agents;
  const bool has_x = model.variant == ModelVariant::CSFull;
  out << "t,agent,x,v\n";
  const std::size_t rows = tr.rows();
  for (std::size_t k = 0; k < rows; ++k) {
    if (k % thin != 0 && k + 1 != rows)
      continue;
    const auto s = tr.row(k);
    const std::string t = format_double(tr.grid.time(k));
    for (std::size_t a = 0; a < n; ++a) {
      out << t << ',' << a << ',';
      if (has_x)
        out << format_double(s[a]);
      out << ',' << format_double(has_x ? s[n + a] : s[a]) << '\n';
    }
  }
}

/// `axis1,axis2,indicator,log10_indicator,flocking,diverged_paths`,
/// axis1-major, both axes ascending.
inline void write_phase_grid_csv(std::ostream &out, const PhaseGrid &grid, double theta) {
  out << "axis1,axis2,indicator,log10_indicator,flocking,diverged_paths\n";
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      const double v = grid.at(i, j);
      out << format_double(grid.axis1_values[i]) << ',' << format_double(grid.axis2_values[j]) << ','
          << format_double(v) << ',' << format_double(std::log10(v)) << ','
          << (numerical_flocking(v, theta) ? 1 : 0) << ',' << grid.diverged[i * grid.cols() + j] << '\n';
    }
}

inline void write_gbm_bias_csv(std::ostream &out, const GbmBiasResult &res) {
  out << "t,log_mc_second_moment,log_exact_second_moment,log_ratio_mc,log_ratio_theory\n";
  for (const auto &r : res.rows)
    out << format_double(r.t) << ',' << format_double(r.log_mc_second_moment) << ','
        << format_double(r.log_exact_second_moment) << ',' << format_double(r.log_ratio_mc) << ','
        << format_double(r.log_ratio_theory) << '\n';
}

inline void write_fundamental_csv(std::ostream &out, const IntegrationGrid &grid, const std::vector<double> &r) {
  out << "t,r\n";
  for (std::size_t k = 0; k < r.size(); ++k)
    out << format_double(grid.time(k)) << ',' << format_double(r[k]) << '\n';
}

/// Provenance record written next to each output. The body after the
/// [manifest] section is the resolved configuration, so the file can be passed
/// back with --config to reproduce the output exactly.
struct RunManifest {
  std::string command;
  RunConfig config;
  double wall_clock_seconds = 0.0;
  std::vector<std::size_t> diverged; // per path (single run) or per cell (sweep)
  std::vector<std::pair<std::string, std::string>> extra;
};

inline void write_manifest(std::ostream &out, const RunManifest &m) {
  out << "[manifest]\n";
  out << "tool = csflock\n";
  out << "version = " << kVersion << "\n";
  out << "command = " << m.command << "\n";
  out << "wall_clock_seconds = " << format_double(m.wall_clock_seconds) << "\n";
  std::size_t total = 0;
  std::string per;
  for (std::size_t i = 0; i < m.diverged.size(); ++i) {
    total += m.diverged[i];
    if (i)
      per += ',';
    per += std::to_string(m.diverged[i]);
  }
  out << "diverged_total = " << total << "\n";
  out << "diverged = " << per << "\n";
  for (const auto &[k, v] : m.extra)
    out << k << " = " << v << "\n";
  out << "\n" << to_ini(m.config);
}

} // namespace csflock
