#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csflock/errors.hpp"

namespace csflock {

namespace detail {

inline constexpr double kCommensurateTol = 1e-9;

// Number of dt steps in `span`, or a ValidationError if span/dt is not an
// integer within the relative tolerance.
inline std::size_t whole_steps(double span, double dt, const char *what) {
  const double ratio = span / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) > kCommensurateTol * std::max(1.0, std::abs(ratio)))
    throw ValidationError(std::string(what) + " = " + std::to_string(span) +
                          " is not an integer multiple of dt = " + std::to_string(dt));
  return static_cast<std::size_t>(nearest);
}

} // namespace detail

/// Uniform time grid on [0, T] with a delay that lands exactly on grid points.
struct IntegrationGrid {
  double dt = 1e-3;
  double t_end = 30.0;
  double tau = 0.0;
  std::size_t n_steps = 0;
  std::size_t delay_steps = 0;

  static IntegrationGrid make(double dt, double t_end, double tau) {
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ValidationError("dt must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
      throw ValidationError("t_end must be positive");
    if (!(tau >= 0.0) || !std::isfinite(tau))
      throw ValidationError("tau must be non-negative");
    IntegrationGrid g;
    g.dt = dt;
    g.t_end = t_end;
    g.tau = tau;
    g.n_steps = detail::whole_steps(t_end, dt, "t_end");
    g.delay_steps = detail::whole_steps(tau, dt, "tau");
    if (g.n_steps == 0)
      throw ValidationError("grid must contain at least one step");
    return g;
  }

  double time(std::size_t k) const { return static_cast<double>(k) * dt; }
};

/// Nearest multiple of dt; sweeps use this before building grids.
inline double snap_to_grid(double value, double dt) { return std::round(value / dt) * dt; }

/// Ring buffer of the last delay_steps + 1 states. Slots start filled with the
/// initial datum, which is the constant pre-history on (-tau, 0].
class HistoryBuffer {
public:
  HistoryBuffer(std::size_t width, std::size_t delay_steps, std::span<const double> initial)
      : width_(width), depth_(delay_steps + 1), lag_(delay_steps), slots_(width * (delay_steps + 1)) {
    if (initial.size() != width)
      throw ValidationError("history buffer: initial datum has wrong width");
    for (std::size_t s = 0; s < depth_; ++s)
      std::copy(initial.begin(), initial.end(), slots_.begin() + static_cast<std::ptrdiff_t>(s * width_));
  }

  std::size_t width() const { return width_; }
  std::size_t depth() const { return depth_; }

  /// Record the state at grid step k (k = 0 is the initial datum).
  void store(std::size_t k, std::span<const double> state) {
    std::copy(state.begin(), state.end(), slots_.begin() + static_cast<std::ptrdiff_t>((k % depth_) * width_));
  }

  /// State at step k - delay_steps, or the initial datum when k < delay_steps.
  /// Valid once step k has been stored.
  std::span<const double> delayed(std::size_t k) const {
    const std::size_t slot = (k + depth_ - lag_) % depth_;
    return {slots_.data() + slot * width_, width_};
  }

private:
  std::size_t width_, depth_, lag_;
  std::vector<double> slots_;
};

} // namespace csflock
