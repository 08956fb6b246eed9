#pragma once

// Fractional kernels g_beta(t) = t^{beta-1}/Gamma(beta), product-integration
// convolution on uniform grids, and the L1 / tempered Caputo derivatives.
// Every weight integrates the power kernel analytically over each subinterval,
// so g_beta is never sampled at its singularity t = 0.

#include <fracevo/core.hpp>
#include <fracevo/special_fn.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace fracevo {

/// g_beta(t) for t > 0 and 0 for t <= 0.
inline Real g_kernel(Real beta, Real t) {
  if (!(beta > 0.0)) throw ParameterError("g_kernel: beta must be positive");
  if (t <= 0.0) return 0.0;
  return std::pow(t, beta - 1.0) * rgamma(beta);
}

/// Samples of g_beta at t_1..t_n (t_0 is never stored).
struct KernelSamples {
  Real beta;
  std::vector<Real> values;
};

inline KernelSamples sample_kernel(Real beta, const TimeGrid& grid) {
  KernelSamples s{beta, std::vector<Real>(grid.n_steps())};
  for (std::size_t k = 1; k <= grid.n_steps(); ++k) s.values[k - 1] = g_kernel(beta, grid[k]);
  return s;
}

namespace detail {

// sum_{m >= m0} binom(p, m) x^m for |x| <= 0.1.
inline Real binomial_tail(Real p, Real x, int m0) {
  Real c = 1.0;  // binom(p, m)
  Real xm = 1.0;
  for (int m = 1; m < m0; ++m) {
    c *= (p - m + 1) / m;
    xm *= x;
  }
  Real sum = 0.0;
  for (int m = m0; m < 200; ++m) {
    c *= (p - m + 1) / m;
    xm *= x;
    const Real term = c * xm;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// (k+1)^p - 2 k^p + (k-1)^p without cancellation for large k.
inline Real second_difference_power(Real p, std::size_t k) {
  const Real kr = static_cast<Real>(k);
  if (k < 10) return std::pow(kr + 1.0, p) - 2.0 * std::pow(kr, p) + std::pow(kr - 1.0, p);
  const Real x = 1.0 / kr;
  return std::pow(kr, p) * (binomial_tail(p, x, 2) + binomial_tail(p, -x, 2));
}

// (n-1)^p - (n-p) n^{p-1}, the left-endpoint product-trapezoid weight with p = beta + 1.
inline Real start_weight_power(Real p, std::size_t n) {
  const Real nr = static_cast<Real>(n);
  if (n < 10) return std::pow(nr - 1.0, p) - (nr - p) * std::pow(nr, p - 1.0);
  return std::pow(nr, p) * binomial_tail(p, -1.0 / nr, 2);
}

}  // namespace detail

/// Product-trapezoid weights for (g_beta * u)(t_n) with piecewise-linear u:
///   (g_beta * u)(t_n) = scale * ( start[n] u_0 + sum_{j=1..n} toeplitz[n-j] u_j ).
struct ConvolutionWeights {
  Real beta = 0.0;
  Real scale = 0.0;            // dt^beta / Gamma(beta + 2)
  std::vector<Real> toeplitz;  // index k = n - j, toeplitz[0] = 1
  std::vector<Real> start;     // start[n], n >= 1; start[0] unused

  std::size_t n_steps() const noexcept { return toeplitz.empty() ? 0 : toeplitz.size() - 1; }
};

inline ConvolutionWeights product_trapezoid_weights(Real beta, Real dt, std::size_t n_steps) {
  if (!(beta > 0.0)) throw ParameterError("convolution order beta must be positive");
  ConvolutionWeights w;
  w.beta = beta;
  w.scale = std::pow(dt, beta) * rgamma(beta + 2.0);
  w.toeplitz.resize(n_steps + 1);
  w.start.resize(n_steps + 1);
  const Real p = beta + 1.0;
  w.toeplitz[0] = 1.0;
  for (std::size_t k = 1; k <= n_steps; ++k) w.toeplitz[k] = detail::second_difference_power(p, k);
  w.start[0] = 0.0;
  for (std::size_t n = 1; n <= n_steps; ++n) w.start[n] = detail::start_weight_power(p, n);
  return w;
}

/// (g_beta * u)(t_k) for every grid point; exact when u is piecewise linear.
template <typename T>
std::vector<T> convolve_kernel(Real beta, std::span<const T> u, const TimeGrid& grid) {
  if (!(beta > 0.0)) throw ParameterError("convolve_kernel: beta must be positive");
  if (u.size() != grid.size()) {
    throw ShapeError("convolve_kernel: " + std::to_string(u.size()) + " samples for a grid of " +
                     std::to_string(grid.size()) + " points");
  }
  const auto w = product_trapezoid_weights(beta, grid.dt(), grid.n_steps());
  std::vector<T> out(u.size(), T(0));
  for (std::size_t n = 1; n < u.size(); ++n) {
    T acc = w.start[n] * u[0];
    for (std::size_t j = 1; j <= n; ++j) acc += w.toeplitz[n - j] * u[j];
    out[n] = w.scale * acc;
  }
  return out;
}

template <typename T>
std::vector<T> convolve_kernel(Real beta, const std::vector<T>& u, const TimeGrid& grid) {
  return convolve_kernel<T>(beta, std::span<const T>(u), grid);
}

/// L1 coefficients b_k = (k+1)^{1-alpha} - k^{1-alpha}, k = 0..count-1 (decreasing in k).
inline std::vector<Real> l1_coefficients(Real alpha, std::size_t count) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("L1 order alpha must lie in (0,1)");
  std::vector<Real> b(count);
  const Real p = 1.0 - alpha;
  for (std::size_t k = 0; k < count; ++k) {
    const Real kr = static_cast<Real>(k);
    b[k] = k == 0 ? 1.0 : std::pow(kr, p) * std::expm1(p * std::log1p(1.0 / kr));
  }
  return b;
}

/// Leading L1 weight dt^{-alpha} / Gamma(2 - alpha).
inline Real l1_leading_weight(Real alpha, Real dt) {
  return std::pow(dt, -alpha) * rgamma(2.0 - alpha);
}

/// Weights w_0..w_n with D^alpha u(t_n) ~ sum_j w_j u(t_j); they sum to zero.
inline std::vector<Real> l1_weights(Real alpha, std::size_t n, Real dt) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("l1_weights: alpha must lie in (0,1)");
  if (!(dt > 0.0)) throw ParameterError("l1_weights: dt must be positive");
  if (n < 1) throw ParameterError("l1_weights: n must be at least 1");
  const auto b = l1_coefficients(alpha, n);
  const Real c = l1_leading_weight(alpha, dt);
  std::vector<Real> w(n + 1);
  w[n] = c * b[0];
  for (std::size_t j = 1; j < n; ++j) w[j] = c * (b[n - j] - b[n - j - 1]);
  w[0] = -c * b[n - 1];
  return w;
}

/// Exponents of the start-up terms t^gamma handled by starting weights: k * alpha < 1
/// (at most max_count - 1 of them), then gamma = 1.
inline std::vector<Real> starting_exponents(Real alpha, std::size_t max_count = 6) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("starting_exponents: alpha must lie in (0,1)");
  std::vector<Real> g;
  if (max_count == 0) return g;
  for (int k = 1; g.size() + 1 < max_count; ++k) {
    const Real e = k * alpha;
    if (e > 1.0 - 1e-8) break;
    g.push_back(e);
  }
  g.push_back(1.0);
  return g;
}

namespace detail {

// j^g - (j-1)^g without cancellation for large j.
inline Real power_difference(Real g, std::size_t j) {
  const Real jr = static_cast<Real>(j);
  if (j == 1) return 1.0;
  return -std::pow(jr, g) * std::expm1(g * std::log1p(-1.0 / jr));
}

// Rows n = 0..N of W solving sum_j W(n, j-1) j^gamma_i = residual_i[n].
inline Eigen::MatrixXd solve_starting_weights(std::span<const Real> exponents,
                                              const std::vector<std::vector<Real>>& residual, std::size_t N) {
  const auto m = static_cast<Eigen::Index>(exponents.size());
  Eigen::MatrixXd V(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) V(i, j) = std::pow(static_cast<Real>(j + 1), exponents[i]);
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(V);
  Eigen::MatrixXd R(m, static_cast<Eigen::Index>(N) + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t n = 0; n <= N; ++n) R(i, static_cast<Eigen::Index>(n)) = residual[i][n];
  }
  return lu.solve(R).transpose();
}

}  // namespace detail

/// Starting weights for the L1 derivative in unit-step scaling. With c the leading
/// weight and d_k = u_k - u_{k-1},
///   c * ( sum_k b_k d_{n-k} + sum_j W(n, j-1) (u_j - u_0) )
/// is exact at every t_n for u = t^gamma, gamma in starting_exponents(alpha, max_count).
inline Eigen::MatrixXd l1_starting_weights(Real alpha, std::size_t N, std::size_t max_count = 6) {
  const auto ex = starting_exponents(alpha, std::min(max_count, N));
  const auto b = l1_coefficients(alpha, N);
  const Real g2 = std::tgamma(2.0 - alpha);
  std::vector<std::vector<Real>> res(ex.size(), std::vector<Real>(N + 1, 0.0));
  std::vector<Real> a(N + 1);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const Real g = ex[i];
    for (std::size_t j = 1; j <= N; ++j) a[j] = detail::power_difference(g, j);
    const Real lead = g2 * std::tgamma(g + 1.0) / std::tgamma(g + 1.0 - alpha);
    for (std::size_t n = 1; n <= N; ++n) {
      Real s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b[k] * a[n - k];
      res[i][n] = lead * std::pow(static_cast<Real>(n), g - alpha) - s;
    }
  }
  return detail::solve_starting_weights(ex, res, N);
}

/// Starting weights for the product-trapezoid rule in unit-step scaling:
///   scale * ( start[n] f_0 + sum_j toeplitz[n-j] f_j + sum_j W(n, j-1) (f_j - f_0) )
/// is exact for f = t^gamma, gamma in starting_exponents(beta, max_count), 0 < beta < 1.
inline Eigen::MatrixXd trapezoid_starting_weights(Real beta, std::size_t N, std::size_t max_count = 6) {
  const auto ex = starting_exponents(beta, std::min(max_count, N));
  const auto w = product_trapezoid_weights(beta, 1.0, N);
  const Real g2 = std::tgamma(beta + 2.0);
  std::vector<std::vector<Real>> res(ex.size(), std::vector<Real>(N + 1, 0.0));
  std::vector<Real> f(N + 1);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const Real g = ex[i];
    for (std::size_t j = 0; j <= N; ++j) f[j] = std::pow(static_cast<Real>(j), g);
    const Real lead = g2 * std::tgamma(g + 1.0) / std::tgamma(g + 1.0 + beta);
    for (std::size_t n = 1; n <= N; ++n) {
      Real s = 0.0;
      for (std::size_t j = 1; j <= n; ++j) s += w.toeplitz[n - j] * f[j];
      res[i][n] = lead * std::pow(static_cast<Real>(n), g + beta) - s;
    }
  }
  return detail::solve_starting_weights(ex, res, N);
}

namespace detail {

// Midpoint-tempered L1 sum: c * sum_k b_k e^{-eta dt (k + 1/2)} (u_{n-k} - u_{n-k-1}).
template <typename T>
std::vector<T> tempered_l1(std::span<const T> u, Real alpha, Real eta, const TimeGrid& grid) {
  if (u.size() < 2) throw InsufficientDataError("fractional derivative needs at least 2 samples");
  if (u.size() != grid.size()) throw ShapeError("derivative: sample count does not match grid");
  const std::size_t n_max = u.size() - 1;
  const auto b = l1_coefficients(alpha, n_max);
  const Real c = l1_leading_weight(alpha, grid.dt());
  std::vector<Real> damp(n_max);
  for (std::size_t k = 0; k < n_max; ++k) {
    damp[k] = b[k] * std::exp(-eta * grid.dt() * (static_cast<Real>(k) + 0.5));
  }
  std::vector<T> out(u.size(), T(0));
  for (std::size_t n = 1; n <= n_max; ++n) {
    T acc(0);
    for (std::size_t k = 0; k < n; ++k) acc += damp[k] * (u[n - k] - u[n - k - 1]);
    out[n] = c * acc;
  }
  return out;
}

}  // namespace detail

/// L1 Caputo derivative at every grid point (0 at t_0); exact on piecewise-linear data.
template <typename T>
std::vector<T> caputo_l1(std::span<const T> u, Real alpha, const TimeGrid& grid) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("caputo_l1: alpha must lie in (0,1)");
  return detail::tempered_l1<T>(u, alpha, 0.0, grid);
}

template <typename T>
std::vector<T> caputo_l1(const std::vector<T>& u, Real alpha, const TimeGrid& grid) {
  return caputo_l1<T>(std::span<const T>(u), alpha, grid);
}

/// Tempered derivative (1/Gamma(1-a)) int_0^t (t-s)^{-a} e^{-eta (t-s)} u'(s) ds with
/// piecewise-linear u. The exponential factor is taken at each subinterval midpoint.
template <typename T>
std::vector<T> tempered_derivative(std::span<const T> u, const FractionalParams& params,
                                   const TimeGrid& grid) {
  return detail::tempered_l1<T>(u, params.alpha(), params.eta(), grid);
}

template <typename T>
std::vector<T> tempered_derivative(const std::vector<T>& u, const FractionalParams& params,
                                   const TimeGrid& grid) {
  return tempered_derivative<T>(std::span<const T>(u), params, grid);
}

}  // namespace fracevo
