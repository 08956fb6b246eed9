#pragma once

// Decay-rate fits on trajectory norms and empirical bound constants.

#include <fracevo/core.hpp>
#include <fracevo/evolution.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fracevo {

enum class DecayKind { exponential, polynomial };

inline const char* to_string(DecayKind k) { return k == DecayKind::exponential ? "exponential" : "polynomial"; }

struct FitWindow {
  Real lo;
  Real hi;
};

struct DecayReport {
  DecayKind kind = DecayKind::exponential;
  Real rate = 0.0;
  Real t_lo = 0.0;
  Real t_hi = 0.0;
  Real residual = 0.0;        // RMS in log space
  Real bound_constant = 0.0;  // sup of weight(t) * norm(t) / reference
  std::size_t points = 0;
};

struct DecayBound {
  Real constant = 0.0;
  Real tail_trend = 0.0;  // log-log slope over the last decade
  bool bounded = true;
};

/// Largest tail slope still counted as flat.
inline constexpr Real kFlatTrendSlope = 0.05;
inline constexpr std::size_t kMinFitPoints = 10;

namespace detail {

struct LineFit {
  Real slope;
  Real intercept;
  Real rms;
};

inline LineFit least_squares(std::span<const Real> x, std::span<const Real> y) {
  const auto n = static_cast<Real>(x.size());
  Real mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  Real sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("fit window has no spread in the abscissa");
  LineFit f{sxy / sxx, 0.0, 0.0};
  f.intercept = my - f.slope * mx;
  Real ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

inline void check_series(std::span<const Real> times, std::span<const Real> norms) {
  if (times.size() != norms.size()) throw ShapeError("times and norms differ in length");
  if (times.empty()) throw InsufficientDataError("empty norm series");
}

inline Real weight(DecayKind kind, Real rate, Real t) {
  return kind == DecayKind::exponential ? std::exp(rate * t) : 1.0 + std::pow(t, rate);
}

inline Real reference_norm(std::span<const Real> norms, std::optional<Real> ref) {
  const Real r = ref ? *ref : norms.front();
  if (!(r > 0.0) || !std::isfinite(r)) throw DataError("reference norm must be positive");
  return r;
}

inline FitWindow default_window(DecayKind kind, std::span<const Real> times) {
  const Real t_end = times.back();
  if (kind == DecayKind::exponential) return {0.5 * (times.front() + t_end), t_end};
  Real t_first = 1.0;
  for (Real t : times) {
    if (t > 0.0) {
      t_first = std::max(t_first, t);
      break;
    }
  }
  return {std::sqrt(t_first * t_end), t_end};
}

inline DecayReport fit_rate(DecayKind kind, std::span<const Real> times, std::span<const Real> norms,
                            std::optional<FitWindow> window, std::optional<Real> ref) {
  check_series(times, norms);
  const FitWindow win = window ? *window : default_window(kind, times);
  if (!(win.lo < win.hi)) throw ParameterError("fit window must satisfy t_lo < t_hi");
  if (kind == DecayKind::polynomial && !(win.lo > 0.0)) {
    throw ParameterError("polynomial fit window must start at positive time");
  }
  std::vector<Real> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < win.lo || times[i] > win.hi) continue;
    if (!(norms[i] > 0.0)) {
      throw DataError("non-positive norm at t = " + std::to_string(times[i]) +
                      " (underflow?); shorten the horizon or fit window");
    }
    x.push_back(kind == DecayKind::exponential ? times[i] : std::log(times[i]));
    y.push_back(std::log(norms[i]));
  }
  if (x.size() < kMinFitPoints) {
    throw InsufficientDataError("fit window holds " + std::to_string(x.size()) + " points, need at least " +
                                std::to_string(kMinFitPoints));
  }
  const LineFit f = least_squares(x, y);
  DecayReport rep;
  rep.kind = kind;
  rep.rate = -f.slope;
  rep.t_lo = win.lo;
  rep.t_hi = win.hi;
  rep.residual = f.rms;
  rep.points = x.size();
  const Real r = reference_norm(norms, ref);
  for (std::size_t i = 0; i < times.size(); ++i) {
    rep.bound_constant = std::max(rep.bound_constant, weight(kind, rep.rate, times[i]) * norms[i] / r);
  }
  return rep;
}

}  // namespace detail

/// Negated slope of log norm against t; bound constant is sup e^{rate t} norm / reference.
inline DecayReport fit_exponential_rate(std::span<const Real> times, std::span<const Real> norms,
                                        std::optional<FitWindow> window = std::nullopt,
                                        std::optional<Real> reference = std::nullopt) {
  return detail::fit_rate(DecayKind::exponential, times, norms, window, reference);
}

/// Negated slope of log norm against log t; bound constant is sup (1 + t^rate) norm / reference.
inline DecayReport fit_polynomial_rate(std::span<const Real> times, std::span<const Real> norms,
                                       std::optional<FitWindow> window = std::nullopt,
                                       std::optional<Real> reference = std::nullopt) {
  return detail::fit_rate(DecayKind::polynomial, times, norms, window, reference);
}

inline DecayReport fit_rate(DecayKind kind, std::span<const Real> times, std::span<const Real> norms,
                            std::optional<FitWindow> window = std::nullopt,
                            std::optional<Real> reference = std::nullopt) {
  return detail::fit_rate(kind, times, norms, window, reference);
}

/// sup over the grid of weight(t) * norm(t) / reference and the log-log trend of that
/// quantity over the last decade of t. A zero series yields constant 0.
inline DecayBound verify_decay_bound(std::span<const Real> times, std::span<const Real> norms, DecayKind kind,
                                     Real rate, std::optional<Real> reference = std::nullopt) {
  detail::check_series(times, norms);
  DecayBound out;
  const bool all_zero = std::all_of(norms.begin(), norms.end(), [](Real v) { return v == 0.0; });
  if (all_zero) return out;
  const Real r = detail::reference_norm(norms, reference);
  std::vector<Real> x, y;
  const Real t_end = times.back();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Real q = detail::weight(kind, rate, times[i]) * norms[i] / r;
    out.constant = std::max(out.constant, q);
    if (times[i] >= 0.1 * t_end && times[i] > 0.0 && q > 0.0) {
      x.push_back(std::log(times[i]));
      y.push_back(std::log(q));
    }
  }
  if (x.size() >= 2) out.tail_trend = detail::least_squares(x, y).slope;
  out.bounded = std::isfinite(out.constant) && out.tail_trend <= kFlatTrendSlope;
  return out;
}

inline DecayBound verify_decay_bound(const Trajectory& tr, DecayKind kind, Real rate) {
  const auto n = tr.norms();
  return verify_decay_bound(tr.times, n, kind, rate, n.front() > 0.0 ? std::optional<Real>() : 1.0);
}

enum class IntegroComponent { u, w };

/// Bound for ||u||_X or ||w||_{X_1/2}, both normalized by ||u0||_X.
inline DecayBound verify_decay_bound(const IntegroTrajectory& tr, IntegroComponent which, DecayKind kind,
                                     Real rate) {
  const Real ref = tr.norm_u_x.front();
  const auto& n = which == IntegroComponent::u ? tr.norm_u_x : tr.norm_w_xhalf;
  return verify_decay_bound(tr.times, n, kind, rate, ref > 0.0 ? ref : 1.0);
}

}  // namespace fracevo
