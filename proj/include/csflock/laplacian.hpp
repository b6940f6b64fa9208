#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "csflock/errors.hpp"

namespace csflock {

/// Communication rate psi(s) = (1 + s^2)^(-beta).
inline double cs_rate(double distance, double beta) {
  if (beta == 0.0)
    return 1.0;
  return std::exp(-beta * std::log1p(distance * distance));
}

/// Symmetric matrix of pairwise rates with 0 < psi_ij <= 1 off the diagonal.
/// The diagonal is carried along but never read.
class RateMatrix {
public:
  RateMatrix(std::size_t n, std::vector<double> psi) : n_(n), psi_(std::move(psi)) {
    if (n_ < 2)
      throw ValidationError("rate matrix needs at least two agents");
    if (psi_.size() != n_ * n_)
      throw ValidationError("rate matrix storage must hold n*n entries");
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (i == j)
          continue;
        const double v = (*this)(i, j);
        if (!(v > 0.0 && v <= 1.0))
          throw ValidationError("rate psi[" + std::to_string(i) + "][" + std::to_string(j) +
                                "] = " + std::to_string(v) + " is outside (0, 1]");
        if (v != (*this)(j, i))
          throw ValidationError("rate matrix is not symmetric at psi[" + std::to_string(i) +
                                "][" + std::to_string(j) + "]");
      }
    }
  }

  /// All off-diagonal rates equal to one (complete graph).
  static RateMatrix complete(std::size_t n) { return RateMatrix(n, std::vector<double>(n * n, 1.0)); }

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return psi_[i * n_ + j]; }

private:
  std::size_t n_;
  std::vector<double> psi_;
};

/// Graph Laplacian A with A_ij = -psi_ij (i != j) and zero row sums.
class Laplacian {
public:
  Laplacian() = default;

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  std::span<const double> data() const { return a_; }

  /// True when every off-diagonal entry is exactly -1, which admits the
  /// O(n) product A u = n u - (sum u) e.
  bool is_complete_unit() const { return complete_unit_; }

  /// out = A u
  void apply(std::span<const double> u, std::span<double> out) const {
    if (u.size() != n_ || out.size() != n_)
      throw ValidationError("Laplacian product: dimension mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      const double *row = a_.data() + i * n_;
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j)
        acc += row[j] * u[j];
      out[i] = acc;
    }
  }

  std::vector<double> apply(std::span<const double> u) const {
    std::vector<double> out(n_);
    apply(u, out);
    return out;
  }

  double frobenius_norm() const {
    return std::sqrt(std::inner_product(a_.begin(), a_.end(), a_.begin(), 0.0));
  }

  friend Laplacian build_laplacian(const RateMatrix &rates);

private:
  std::size_t n_ = 0;
  std::vector<double> a_;
  bool complete_unit_ = false;
};

inline Laplacian build_laplacian(const RateMatrix &rates) {
  const std::size_t n = rates.size();
  Laplacian lap;
  lap.n_ = n;
  lap.a_.assign(n * n, 0.0);
  bool unit = true;
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double psi = rates(i, j);
      unit = unit && psi == 1.0;
      lap.a_[i * n + j] = -psi;
      diag += psi;
    }
    lap.a_[i * n + i] = diag;
  }
  lap.complete_unit_ = unit;
  return lap;
}

struct SpectralSummary {
  std::vector<double> eigenvalues; // ascending
  double fiedler = 0.0;
  double max_eig = 0.0;
};

namespace detail {

inline double off_diagonal_norm(const std::vector<double> &m, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j)
        s += m[i * n + j] * m[i * n + j];
  return std::sqrt(s);
}

} // namespace detail

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Converges when the off-diagonal Frobenius mass drops below
/// rel_tol * ||M||_F; throws NumericalError after max_sweeps.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> m, std::size_t n,
                                              double rel_tol = 1e-12, int max_sweeps = 100) {
  double total = 0.0;
  for (double v : m)
    total += v * v;
  const double threshold = rel_tol * std::sqrt(total);

  int sweep = 0;
  while (detail::off_diagonal_norm(m, n) > threshold) {
    if (sweep++ >= max_sweeps)
      throw NumericalError("Jacobi eigensolver did not converge within " + std::to_string(max_sweeps) +
                           " sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (apq == 0.0)
          continue;
        const double app = m[p * n + p];
        const double aqq = m[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m[k * n + p];
          const double mkq = m[k * n + q];
          m[k * n + p] = c * mkp - s * mkq;
          m[k * n + q] = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m[p * n + k];
          const double mqk = m[q * n + k];
          m[p * n + k] = c * mpk - s * mqk;
          m[q * n + k] = s * mpk + c * mqk;
        }
        m[p * n + q] = 0.0;
        m[q * n + p] = 0.0;
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i)
    eig[i] = m[i * n + i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

/// Fiedler number is reported as eigenvalues[1] whether or not the graph is
/// connected; checking a lower bound on it is the caller's business.
inline SpectralSummary spectrum(const Laplacian &lap) {
  const std::size_t n = lap.size();
  auto d = lap.data();
  SpectralSummary s;
  s.eigenvalues = jacobi_eigenvalues(std::vector<double>(d.begin(), d.end()), n);
  s.fiedler = n > 1 ? s.eigenvalues[1] : 0.0;
  s.max_eig = s.eigenvalues.back();
  return s;
}

/// u^T A w as the plain bilinear sum.
inline double quadratic_form(const Laplacian &lap, std::span<const double> u, std::span<const double> w) {
  const std::size_t n = lap.size();
  if (u.size() != n || w.size() != n)
    throw ValidationError("quadratic form: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      row += lap(i, j) * w[j];
    acc += u[i] * row;
  }
  return acc;
}

} // namespace csflock
