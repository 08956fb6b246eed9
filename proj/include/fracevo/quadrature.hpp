#pragma once

#include <fracevo/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <type_traits>
#include <vector>

namespace fracevo::quad {

inline Real magnitude(Real x) { return std::abs(x); }
inline Real magnitude(const Complex& x) { return std::abs(x); }
template <typename Derived>
Real magnitude(const Eigen::MatrixBase<Derived>& x) {
  return x.norm();
}

template <typename T>
struct Result {
  T value;
  Real error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK constants).
inline constexpr Real kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr Real kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr Real kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename T>
struct Panel {
  Real a, b;
  T value;
  Real error;
};

template <typename F>
auto gauss_kronrod15(F& f, Real a, Real b) {
  using T = std::decay_t<decltype(f(a))>;
  const Real c = 0.5 * (a + b);
  const Real h = 0.5 * (b - a);
  const T fc = f(c);
  T kronrod = kWgk[7] * fc;
  T gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const Real dx = h * kXgk[j];
    const T f1 = f(c - dx);
    const T f2 = f(c + dx);
    kronrod = kronrod + kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss = gauss + kWg[j / 2] * (f1 + f2);
  }
  T value = h * kronrod;
  const Real err = magnitude(T(h * (kronrod - gauss)));
  return Panel<T>{a, b, std::move(value), err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [a, b]. The integrand
/// may return a scalar or an Eigen vector; convergence is measured in norm.
/// Bisects the panel with the largest error estimate until the summed estimate
/// drops below max(abs_tol, rel_tol * |I|) or `max_panels` is reached.
template <typename F>
auto integrate(F&& f, Real a, Real b, Real abs_tol, Real rel_tol,
               std::size_t max_panels = 2000) {
  using Panel = decltype(detail::gauss_kronrod15(f, a, b));
  using T = decltype(Panel::value);
  auto cmp = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp);

  Panel first = detail::gauss_kronrod15(f, a, b);
  T total = first.value;
  Real total_err = first.error;
  heap.push(std::move(first));
  std::size_t evals = 15;

  auto done = [&] { return total_err <= std::max(abs_tol, rel_tol * magnitude(total)); };
  while (!done() && heap.size() < max_panels) {
    Panel worst = heap.top();
    heap.pop();
    const Real mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(std::move(worst));
      break;  // cannot bisect further in floating point
    }
    Panel left = detail::gauss_kronrod15(f, worst.a, mid);
    Panel right = detail::gauss_kronrod15(f, mid, worst.b);
    evals += 30;
    total = total - worst.value + left.value + right.value;
    total_err += left.error + right.error - worst.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
  }

  // Re-sum to shed the drift of the running update.
  T sum = heap.top().value;
  Real err = 0.0;
  bool first_panel = true;
  while (!heap.empty()) {
    const Panel& p = heap.top();
    if (!first_panel) sum = sum + p.value;
    first_panel = false;
    err += p.error;
    heap.pop();
  }
  Result<T> out{std::move(sum), err, evals, false};
  out.converged = err <= std::max(abs_tol, rel_tol * magnitude(out.value));
  return out;
}

}  // namespace fracevo::quad
