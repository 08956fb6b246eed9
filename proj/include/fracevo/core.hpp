#pragma once

#include <fracevo/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fracevo {

using Real = double;
using Complex = std::complex<double>;

/// State vectors live in a complex finite-dimensional Hilbert space.
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

inline constexpr Real kPi = 3.14159265358979323846264338327950288;

/// Order and tempering rate of the tempered Caputo derivative.
class FractionalParams {
 public:
  FractionalParams(Real alpha, Real eta = 0.0) : alpha_(alpha), eta_(eta) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ParameterError("alpha must lie in (0,1), got " + std::to_string(alpha));
    }
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
      throw ParameterError("eta must be finite and >= 0, got " + std::to_string(eta));
    }
  }

  Real alpha() const noexcept { return alpha_; }
  Real eta() const noexcept { return eta_; }

  bool operator==(const FractionalParams&) const = default;

 private:
  Real alpha_;
  Real eta_;
};

/// Uniform grid t_k = k * dt, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(Real dt, std::size_t n_steps) : dt_(dt), n_steps_(n_steps) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw ParameterError("time step must be positive and finite");
    }
    if (n_steps < 1) throw ParameterError("time grid needs at least one step");
  }

  /// Grid covering [0, horizon] with step closest to `dt`.
  static TimeGrid covering(Real horizon, Real dt) {
    if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    return TimeGrid(dt, n < 1 ? 1 : n);
  }

  Real dt() const noexcept { return dt_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t size() const noexcept { return n_steps_ + 1; }
  Real operator[](std::size_t k) const noexcept { return static_cast<Real>(k) * dt_; }
  Real horizon() const noexcept { return static_cast<Real>(n_steps_) * dt_; }

  std::vector<Real> points() const {
    std::vector<Real> t(size());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = (*this)[k];
    return t;
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  Real dt_;
  std::size_t n_steps_;
};

/// `count` points log-spaced on [lo, hi], endpoints included.
inline std::vector<Real> log_spaced(Real lo, Real hi, std::size_t count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) {
    throw ParameterError("log_spaced needs 0 < lo < hi and count >= 2");
  }
  std::vector<Real> t(count);
  const Real a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < count; ++k) {
    t[k] = std::exp(a + (b - a) * static_cast<Real>(k) / static_cast<Real>(count - 1));
  }
  t.front() = lo;
  t.back() = hi;
  return t;
}

/// Discrete L2 norm (plain Euclidean; mesh weights cancel in every ratio we report).
inline Real norm_x(const Vector& v) { return v.norm(); }

/// 64-bit FNV-1a over raw bytes, used for operator fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fracevo
