#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "csflock/errors.hpp"
#include "csflock/grid.hpp"
#include "csflock/random.hpp"

namespace csflock {

/// A delayed Ito system dX = F(X, X~) dt + G(X~) dB evaluated per step.
///
/// The noisy block of the state is [velocity_offset(), width()), laid out
/// agent-major with dim() components per agent; agent a draws its increments
/// from its own NoiseStream. evaluate() writes drift and diffusion for every
/// component (zero diffusion outside the noisy block).
template <class S>
concept DelaySystem = requires(const S &s, std::span<const double> cur, std::span<const double> del,
                               std::span<double> out) {
  { s.width() } -> std::convertible_to<std::size_t>;
  { s.velocity_offset() } -> std::convertible_to<std::size_t>;
  { s.agents() } -> std::convertible_to<std::size_t>;
  { s.dim() } -> std::convertible_to<std::size_t>;
  { s.has_noise() } -> std::convertible_to<bool>;
  { s.initial_state() } -> std::convertible_to<std::vector<double>>;
  s.evaluate(cur, del, out, out);
};

/// One Euler-Maruyama step:
///   next = current + dt * drift + sqrt(dt) * diffusion .* increments
/// `increments` are unit-variance normals. Returns false if any component of
/// `next` is non-finite.
inline bool em_step(std::span<const double> current, std::span<const double> drift,
                    std::span<const double> diffusion, std::span<const double> increments, double dt,
                    std::span<double> next) {
  const std::size_t n = current.size();
  if (drift.size() != n || diffusion.size() != n || increments.size() != n || next.size() != n)
    throw ValidationError("em_step: dimension mismatch");
  const double sqdt = std::sqrt(dt);
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    next[i] = current[i] + dt * drift[i] + sqdt * diffusion[i] * increments[i];
    finite = finite && std::isfinite(next[i]);
  }
  return finite;
}

/// em_step with drift and diffusion given as functions of the delayed state.
template <class Drift, class Diffusion>
std::vector<double> em_step(std::span<const double> current, std::span<const double> delayed, Drift &&drift,
                            Diffusion &&diffusion, std::span<const double> increments, double dt) {
  const std::vector<double> f = drift(delayed);
  const std::vector<double> g = diffusion(delayed);
  std::vector<double> next(current.size());
  em_step(current, f, g, increments, dt, next);
  return next;
}

struct IntegrationOutcome {
  std::size_t steps_completed = 0; // last grid index holding a finite state
  bool diverged = false;
};

/// Core stepping loop. Calls observer(k, state) for k = 0 .. n_steps (or up
/// to the last finite step when the path diverges; the path is then frozen).
template <DelaySystem S, class Observer>
IntegrationOutcome integrate(const S &sys, const IntegrationGrid &grid, const SeedMaterial &seed,
                             Observer &&observer) {
  const std::size_t width = sys.width();
  const std::size_t off = sys.velocity_offset();
  const std::size_t agents = sys.agents();
  const std::size_t dim = sys.dim();
  if (off + agents * dim != width)
    throw ValidationError("system noise block does not match its width");

  std::vector<double> current = sys.initial_state();
  if (current.size() != width)
    throw ValidationError("initial state has wrong width");
  HistoryBuffer history(width, grid.delay_steps, current);

  std::vector<NoiseStream> streams;
  const bool noisy = sys.has_noise();
  if (noisy) {
    streams.reserve(agents);
    for (std::size_t a = 0; a < agents; ++a) {
      SeedMaterial m = seed;
      m.agent = static_cast<std::uint32_t>(a);
      streams.emplace_back(m);
    }
  }

  std::vector<double> drift(width), diffusion(width), increments(width, 0.0), next(width);
  IntegrationOutcome out;
  observer(std::size_t{0}, std::span<const double>(current));
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    sys.evaluate(std::span<const double>(current), history.delayed(k), std::span<double>(drift),
                 std::span<double>(diffusion));
    if (noisy) {
      for (std::size_t a = 0; a < agents; ++a)
        for (std::size_t c = 0; c < dim; ++c)
          increments[off + a * dim + c] = streams[a].normal();
    }
    if (!em_step(current, drift, diffusion, increments, grid.dt, next)) {
      out.diverged = true;
      return out;
    }
    current.swap(next);
    history.store(k + 1, current);
    out.steps_completed = k + 1;
    observer(k + 1, std::span<const double>(current));
  }
  return out;
}

/// Samples of one path on [0, T]. Rows past a divergence are not stored.
struct DelayedTrajectory {
  IntegrationGrid grid;
  std::size_t width = 0;
  std::vector<double> states; // row-major, rows() x width
  bool diverged = false;
  std::optional<std::size_t> diverged_at; // first step whose state was non-finite

  std::size_t rows() const { return width == 0 ? 0 : states.size() / width; }
  std::span<const double> row(std::size_t k) const { return {states.data() + k * width, width}; }
};

template <DelaySystem S>
DelayedTrajectory simulate_path(const S &sys, const IntegrationGrid &grid, const SeedMaterial &seed) {
  DelayedTrajectory tr;
  tr.grid = grid;
  tr.width = sys.width();
  tr.states.reserve((grid.n_steps + 1) * tr.width);
  auto outcome = integrate(sys, grid, seed, [&](std::size_t, std::span<const double> s) {
    tr.states.insert(tr.states.end(), s.begin(), s.end());
  });
  tr.diverged = outcome.diverged;
  if (outcome.diverged)
    tr.diverged_at = outcome.steps_completed + 1;
  return tr;
}

/// Squared velocity norms |v_k|^2 of one path on the retained terminal window.
struct PathWindow {
  std::size_t first_step = 0;
  std::vector<double> sq_norms;
  bool diverged = false;
};

struct EnsembleOptions {
  bool record_moments = true;
  std::size_t stride = 1;     // keep moments every `stride` grid steps
  double window = 1.0;        // terminal window retained per path (time units)
  unsigned workers = 1;
  std::uint32_t cell = 0;     // seed material cell index
};

/// Per-step moments across non-diverged paths plus per-path terminal windows.
struct EnsembleStats {
  IntegrationGrid grid;
  std::size_t width = 0;
  std::size_t stride = 1;
  std::size_t velocity_offset = 0;
  std::size_t agents = 0;
  std::size_t dim = 1;
  std::size_t paths = 0;
  std::size_t diverged_paths = 0;
  std::vector<double> mean;          // recorded_rows() x width
  std::vector<double> second_moment; // recorded_rows() x width
  std::vector<PathWindow> windows;   // one per path, path-index order

  std::size_t finite_paths() const { return paths - diverged_paths; }
  std::size_t recorded_rows() const { return width == 0 ? 0 : mean.size() / width; }
  double row_time(std::size_t r) const { return grid.time(r * stride); }
  double mean_at(std::size_t r, std::size_t c) const { return mean[r * width + c]; }
  double second_at(std::size_t r, std::size_t c) const { return second_moment[r * width + c]; }
  /// Standard error of the mean of component c at recorded row r.
  double standard_error(std::size_t r, std::size_t c) const {
    const std::size_t q = finite_paths();
    if (q < 2)
      return 0.0;
    const double m = mean_at(r, c);
    const double var = std::max(0.0, second_at(r, c) - m * m) * static_cast<double>(q) / static_cast<double>(q - 1);
    return std::sqrt(var / static_cast<double>(q));
  }
};

namespace detail {

inline constexpr std::size_t kPathsPerBlock = 64;
inline constexpr std::size_t kBlocksPerWave = 4;

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items must
/// write only to index-owned storage.
template <class Fn> void parallel_for(std::size_t count, unsigned workers, Fn &&fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
      fn(i);
  };
  std::vector<std::jthread> pool;
  const unsigned spawned = static_cast<unsigned>(std::min<std::size_t>(workers, count)) - 1;
  pool.reserve(spawned);
  for (unsigned w = 0; w < spawned; ++w)
    pool.emplace_back(body);
  body();
}

} // namespace detail

/// Monte-Carlo ensemble over q_paths independent paths. Path q uses seed
/// material (base_seed, options.cell, q, agent). Paths are grouped in fixed
/// blocks of 64 whose partial sums are added in block order, so the result is
/// bit-identical for any worker count.
template <DelaySystem S>
EnsembleStats run_ensemble(const S &sys, const IntegrationGrid &grid, std::size_t q_paths, std::uint64_t base_seed,
                           const EnsembleOptions &options = {}) {
  if (q_paths < 1)
    throw ValidationError("ensemble needs at least one path");
  if (options.stride < 1)
    throw ValidationError("moment stride must be at least 1");

  EnsembleStats st;
  st.grid = grid;
  st.width = sys.width();
  st.stride = options.stride;
  st.velocity_offset = sys.velocity_offset();
  st.agents = sys.agents();
  st.dim = sys.dim();
  st.paths = q_paths;
  st.windows.resize(q_paths);

  const std::size_t width = st.width;
  const std::size_t rows = options.record_moments ? grid.n_steps / options.stride + 1 : 0;
  const std::size_t window_steps =
      std::min(grid.n_steps, static_cast<std::size_t>(std::llround(options.window / grid.dt)));
  const std::size_t first_window_step = grid.n_steps - window_steps;
  const std::size_t voff = st.velocity_offset;
  const std::size_t vcount = st.agents * st.dim;

  std::vector<double> sum(rows * width, 0.0), sum_sq(rows * width, 0.0);
  const std::size_t blocks = (q_paths + detail::kPathsPerBlock - 1) / detail::kPathsPerBlock;

  struct Partial {
    std::vector<double> sum, sum_sq;
    std::size_t diverged = 0;
  };

  for (std::size_t wave = 0; wave < blocks; wave += detail::kBlocksPerWave) {
    const std::size_t in_wave = std::min(detail::kBlocksPerWave, blocks - wave);
    std::vector<Partial> partials(in_wave);
    detail::parallel_for(in_wave, options.workers, [&](std::size_t b) {
      Partial &part = partials[b];
      part.sum.assign(rows * width, 0.0);
      part.sum_sq.assign(rows * width, 0.0);
      std::vector<double> scratch(rows * width);
      const std::size_t begin = (wave + b) * detail::kPathsPerBlock;
      const std::size_t end = std::min(q_paths, begin + detail::kPathsPerBlock);
      for (std::size_t q = begin; q < end; ++q) {
        PathWindow &win = st.windows[q];
        win.first_step = first_window_step;
        win.sq_norms.clear();
        win.sq_norms.reserve(window_steps + 1);
        const SeedMaterial seed{base_seed, options.cell, static_cast<std::uint32_t>(q), 0};
        auto outcome = integrate(sys, grid, seed, [&](std::size_t k, std::span<const double> s) {
          if (rows > 0 && k % options.stride == 0)
            std::copy(s.begin(), s.end(), scratch.begin() + static_cast<std::ptrdiff_t>((k / options.stride) * width));
          if (k >= first_window_step) {
            double acc = 0.0;
            for (std::size_t c = voff; c < voff + vcount; ++c)
              acc += s[c] * s[c];
            win.sq_norms.push_back(acc);
          }
        });
        win.diverged = outcome.diverged;
        if (outcome.diverged) {
          ++part.diverged;
          continue;
        }
        for (std::size_t i = 0; i < rows * width; ++i) {
          part.sum[i] += scratch[i];
          part.sum_sq[i] += scratch[i] * scratch[i];
        }
      }
    });
    for (const Partial &part : partials) {
      for (std::size_t i = 0; i < rows * width; ++i) {
        sum[i] += part.sum[i];
        sum_sq[i] += part.sum_sq[i];
      }
      st.diverged_paths += part.diverged;
    }
  }

  const std::size_t finite = st.finite_paths();
  st.mean.assign(rows * width, std::numeric_limits<double>::quiet_NaN());
  st.second_moment.assign(rows * width, std::numeric_limits<double>::quiet_NaN());
  if (finite > 0) {
    const double inv = 1.0 / static_cast<double>(finite);
    for (std::size_t i = 0; i < rows * width; ++i) {
      st.mean[i] = sum[i] * inv;
      st.second_moment[i] = sum_sq[i] * inv;
    }
  }
  return st;
}

} // namespace csflock
