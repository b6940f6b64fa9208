#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "csflock/analysis.hpp"
#include "csflock/engine.hpp"
#include "csflock/errors.hpp"
#include "csflock/grid.hpp"
#include "csflock/models.hpp"

namespace csflock {

enum class SweepParam { Sigma, Tau, Beta };

inline const char *to_string(SweepParam p) {
  switch (p) {
  case SweepParam::Sigma:
    return "sigma";
  case SweepParam::Tau:
    return "tau";
  case SweepParam::Beta:
    return "beta";
  }
  return "?";
}

inline SweepParam parse_sweep_param(const std::string &s) {
  if (s == "sigma")
    return SweepParam::Sigma;
  if (s == "tau")
    return SweepParam::Tau;
  if (s == "beta")
    return SweepParam::Beta;
  throw ValidationError("unknown sweep parameter '" + s + "' (expected sigma, tau or beta)");
}

struct AxisSpec {
  SweepParam param = SweepParam::Sigma;
  double min = 0.0;
  double max = 2.0;
  std::size_t count = 20;

  /// count equidistant values including both end points.
  std::vector<double> values() const {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
      v[i] = count == 1 ? min : min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
    return v;
  }
};

inline unsigned default_workers() {
  if (const char *env = std::getenv("CSFLOCK_WORKERS")) {
    try {
      const long w = std::stol(env);
      if (w > 0)
        return static_cast<unsigned>(w);
    } catch (const std::exception &) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepSpec {
  ModelSpec model;
  AxisSpec axis1{SweepParam::Sigma, 0.0, 2.0, 50};
  AxisSpec axis2{SweepParam::Tau, 0.0, 2.0, 50};
  std::size_t q_paths = 100;
  double dt = 1e-3;
  double t_end = 30.0;
  double tau = 0.0; // used when tau is not swept
  std::uint64_t base_seed = 1;
  double theta = kDefaultTheta;
  double window = 1.0;
  unsigned workers = 1;

  void validate() const {
    if (axis1.param == axis2.param)
      throw ValidationError("sweep axes must name different parameters");
    for (const AxisSpec *a : {&axis1, &axis2}) {
      if (a->count < 2)
        throw ValidationError(std::string("axis '") + to_string(a->param) + "' needs at least two points");
      if (!(a->max >= a->min))
        throw ValidationError(std::string("axis '") + to_string(a->param) + "' has max < min");
      if (a->param == SweepParam::Beta && model.variant != ModelVariant::CSFull)
        throw ValidationError("beta can only be swept for the full model");
      if (a->min < 0.0)
        throw ValidationError(std::string("axis '") + to_string(a->param) + "' must be non-negative");
    }
    if (q_paths < 1)
      throw ValidationError("sweep needs at least one path per cell");
    if (!(theta > 0.0))
      throw ValidationError("theta must be positive");
    if (!(window > 0.0) || window > t_end)
      throw ValidationError("indicator window must lie inside [0, T]");
    model.validate();
    // grid checks (tau commensurability of the fixed delay, T / dt)
    IntegrationGrid::make(dt, t_end, swept(SweepParam::Tau) ? 0.0 : tau);
  }

  bool swept(SweepParam p) const { return axis1.param == p || axis2.param == p; }

  /// Axis values as used, with tau values snapped to multiples of dt.
  std::vector<double> axis_values(const AxisSpec &a) const {
    auto v = a.values();
    if (a.param == SweepParam::Tau)
      for (double &x : v)
        x = snap_to_grid(x, dt);
    return v;
  }
};

struct PhaseGrid {
  AxisSpec axis1, axis2;
  std::vector<double> axis1_values, axis2_values; // as simulated (tau snapped)
  std::vector<double> values;                     // axis1-major: values[i * count2 + j]
  std::vector<std::size_t> diverged;              // per cell
  std::vector<std::size_t> paths;                 // per cell (1 for noise-free cells)

  std::size_t rows() const { return axis1_values.size(); }
  std::size_t cols() const { return axis2_values.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  std::size_t total_diverged() const {
    std::size_t s = 0;
    for (auto d : diverged)
      s += d;
    return s;
  }
};

namespace detail {

struct CellSetup {
  ModelSpec model;
  IntegrationGrid grid;
  std::size_t paths;
};

inline CellSetup make_cell(const SweepSpec &spec, double v1, double v2) {
  CellSetup c{spec.model, {}, spec.q_paths};
  double tau = spec.tau;
  auto apply = [&](SweepParam p, double v) {
    switch (p) {
    case SweepParam::Sigma:
      c.model.set_uniform_sigma(v);
      break;
    case SweepParam::Tau:
      tau = v;
      break;
    case SweepParam::Beta:
      c.model.beta = v;
      break;
    }
  };
  apply(spec.axis1.param, v1);
  apply(spec.axis2.param, v2);
  c.grid = IntegrationGrid::make(spec.dt, spec.t_end, tau);
  // Without noise every path is the same deterministic trajectory.
  if (c.model.sigma_max() == 0.0)
    c.paths = 1;
  return c;
}

} // namespace detail

/// Indicator over every (axis1, axis2) cell. Cell (i, j) uses seed material
/// (base_seed, i * count2 + j, path, agent); cells run concurrently and are
/// stored by index, so the grid is a pure function of the spec.
inline PhaseGrid run_sweep(const SweepSpec &spec) {
  spec.validate();
  PhaseGrid pg;
  pg.axis1 = spec.axis1;
  pg.axis2 = spec.axis2;
  pg.axis1_values = spec.axis_values(spec.axis1);
  pg.axis2_values = spec.axis_values(spec.axis2);
  const std::size_t rows = pg.rows(), cols = pg.cols();
  pg.values.assign(rows * cols, 0.0);
  pg.diverged.assign(rows * cols, 0);
  pg.paths.assign(rows * cols, 0);

  detail::parallel_for(rows * cols, spec.workers, [&](std::size_t cell) {
    const std::size_t i = cell / cols, j = cell % cols;
    const auto setup = detail::make_cell(spec, pg.axis1_values[i], pg.axis2_values[j]);
    EnsembleOptions opt;
    opt.record_moments = false;
    opt.window = spec.window;
    opt.cell = static_cast<std::uint32_t>(cell);
    const AnySystem sys = make_system(setup.model);
    const EnsembleStats ens = std::visit(
        [&](const auto &s) { return run_ensemble(s, setup.grid, setup.paths, spec.base_seed, opt); }, sys);
    const IndicatorResult ind = flocking_indicator(ens, spec.window);
    pg.values[cell] = ind.value;
    pg.diverged[cell] = ind.diverged_paths;
    pg.paths[cell] = setup.paths;
  });
  return pg;
}

struct FlockingRegion {
  std::vector<bool> mask;                   // axis1-major, like PhaseGrid::values
  std::vector<std::optional<double>> boundary; // per axis1 index: largest flocking axis2 value
};

inline FlockingRegion flocking_region(const PhaseGrid &grid, double theta = kDefaultTheta) {
  FlockingRegion r;
  r.mask.resize(grid.values.size());
  r.boundary.resize(grid.rows());
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      const bool f = numerical_flocking(grid.at(i, j), theta);
      r.mask[i * grid.cols() + j] = f;
      if (f)
        r.boundary[i] = grid.axis2_values[j];
    }
  return r;
}

} // namespace csflock
