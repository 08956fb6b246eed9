#pragma once

// Gamma, Mittag-Leffler and Wright-type functions.
//
// E_{a,b}(z) is evaluated by one of three regimes, each of which carries its
// own error estimate; a regime is used only when the estimate certifies the
// target tolerance:
//   * Taylor series for |z| <= 1 with a running rounding-error bound,
//   * the algebraic asymptotic expansion plus pole residues for |z| >= 20,
//   * numerical inversion of the Laplace transform s^{a-b}/(s^a - z) on an
//     optimal parabolic contour (Garrappa's OPC scheme) everywhere else.
//
// Phi_g(t) is summed from its power series while that is numerically safe and
// otherwise obtained from a positive integral over [0, pi] (change of variables
// in Zolotarev's representation of the one-sided stable density).

#include <fracevo/core.hpp>
#include <fracevo/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fracevo {

inline constexpr Real kEps = std::numeric_limits<Real>::epsilon();

// ---------------------------------------------------------------------------
// Gamma
// ---------------------------------------------------------------------------

inline bool is_nonpositive_integer(Real x) { return x <= 0.0 && x == std::floor(x); }

/// sin(pi x) with exact zeros at the integers.
inline Real sin_pi(Real x) {
  Real r = x - 2.0 * std::round(0.5 * x);  // r in [-1, 1], exact
  if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
  if (r > 0.5) r = 1.0 - r;
  if (r < -0.5) r = -1.0 - r;
  return std::sin(kPi * r);
}

/// Euler Gamma. Throws DomainError at the poles 0, -1, -2, ...
inline Real gamma_fn(Real x) {
  if (std::isnan(x)) throw DomainError("gamma_fn: NaN argument");
  if (is_nonpositive_integer(x)) {
    throw DomainError("gamma_fn: pole at x = " + std::to_string(x));
  }
  return std::tgamma(x);
}

/// Sign and log-magnitude of 1/Gamma(x); `zero` is set at the poles of Gamma.
struct RecipGammaParts {
  bool zero = false;
  Real sign = 1.0;
  Real log_abs = 0.0;
};

inline RecipGammaParts rgamma_parts(Real x) {
  if (is_nonpositive_integer(x)) return {true, 0.0, -std::numeric_limits<Real>::infinity()};
  if (x > 0.0) return {false, 1.0, -std::lgamma(x)};
  // 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
  const Real s = sin_pi(x);
  return {false, s < 0.0 ? -1.0 : 1.0, std::log(std::abs(s)) + std::lgamma(1.0 - x) - std::log(kPi)};
}

/// 1/Gamma(x), an entire function (zero at the poles of Gamma).
inline Real rgamma(Real x) {
  if (is_nonpositive_integer(x)) return 0.0;
  if (x > 0.0 && x < 170.0) return 1.0 / std::tgamma(x);
  if (x < 0.0 && x > -170.0) return sin_pi(x) * std::tgamma(1.0 - x) / kPi;
  const auto p = rgamma_parts(x);
  return p.sign * std::exp(p.log_abs);
}

// ---------------------------------------------------------------------------
// Mittag-Leffler
// ---------------------------------------------------------------------------

class MittagLefflerParams {
 public:
  MittagLefflerParams(Real alpha, Real beta = 1.0) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0 && alpha <= 2.0)) {
      throw ParameterError("Mittag-Leffler alpha must lie in (0,2], got " + std::to_string(alpha));
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw ParameterError("Mittag-Leffler beta must be positive, got " + std::to_string(beta));
    }
  }
  Real alpha() const noexcept { return alpha_; }
  Real beta() const noexcept { return beta_; }

 private:
  Real alpha_;
  Real beta_;
};

enum class MlMethod { exact, series, asymptotic, laplace_inversion };

inline const char* to_string(MlMethod m) {
  switch (m) {
    case MlMethod::exact: return "exact";
    case MlMethod::series: return "series";
    case MlMethod::asymptotic: return "asymptotic";
    case MlMethod::laplace_inversion: return "laplace_inversion";
  }
  return "?";
}

struct MlEvaluation {
  Complex value;
  Real error_bound = 0.0;  // absolute
  MlMethod method = MlMethod::exact;
};

namespace detail {

inline constexpr Real kMlTargetRel = 1e-13;
inline constexpr std::size_t kMaxSeriesTerms = 500;

/// Taylor series; empty result when the running bound does not certify the target.
inline std::optional<MlEvaluation> ml_series(Real a, Real b, Complex z) {
  Complex sum = 0.0, zn = 1.0;
  Real abs_sum = 0.0;
  int small = 0;
  for (std::size_t n = 0; n < kMaxSeriesTerms; ++n) {
    const Complex term = zn * rgamma(a * static_cast<Real>(n) + b);
    sum += term;
    abs_sum += std::abs(term);
    if (std::abs(term) < 1e-16 * std::abs(sum)) {
      if (++small == 3) {
        const Real bound = 8.0 * kEps * abs_sum + 4.0 * std::abs(term);
        if (bound <= kMlTargetRel * std::abs(sum)) return MlEvaluation{sum, bound, MlMethod::series};
        return std::nullopt;
      }
    } else {
      small = 0;
    }
    zn *= z;
  }
  return std::nullopt;
}

/// Poles s* of s^{a-b}/(s^a - z) on the principal sheet: s*^a = z, |arg s*| < pi.
inline std::vector<Complex> ml_poles(Real a, Complex z) {
  std::vector<Complex> poles;
  const Real theta = std::arg(z);
  const Real r = std::pow(std::abs(z), 1.0 / a);
  const int kmin = static_cast<int>(std::ceil(-a / 2.0 - theta / (2.0 * kPi)));
  const int kmax = static_cast<int>(std::floor(a / 2.0 - theta / (2.0 * kPi)));
  for (int k = kmin; k <= kmax; ++k) {
    const Real ang = (theta + 2.0 * kPi * k) / a;
    if (std::abs(ang) < kPi) poles.push_back(std::polar(r, ang));
  }
  return poles;
}

inline Complex ml_residue(Real a, Real b, Complex s) {
  return std::pow(s, 1.0 - b) * std::exp(s) / a;
}

/// Algebraic expansion -sum_k z^{-k}/Gamma(b - a k) plus residues of the poles.
inline std::optional<MlEvaluation> ml_asymptotic(Real a, Real b, Complex z) {
  const auto poles = ml_poles(a, z);
  for (const Complex& s : poles) {
    // A pole close to the branch cut spoils the expansion of the Hankel part.
    if (kPi - std::abs(std::arg(s)) < 0.05 * kPi) return std::nullopt;
  }
  Complex residues = 0.0;
  for (const Complex& s : poles) residues += ml_residue(a, b, s);

  const Complex zinv = 1.0 / z;
  const Real log_zinv = -std::log(std::abs(z));
  Complex algebraic = 0.0;
  Complex zk = 1.0;
  Real last_mag = std::numeric_limits<Real>::infinity();
  Real omitted = std::numeric_limits<Real>::infinity();
  for (int k = 1; k <= 200; ++k) {
    zk *= zinv;
    const Real arg = b - a * k;
    const auto rg = rgamma_parts(arg);
    if (rg.zero) continue;
    const Real mag = std::exp(k * log_zinv + rg.log_abs);
    if (mag >= last_mag) {  // divergent tail begins: stop before the smallest term grows
      omitted = mag;
      break;
    }
    algebraic -= zk * rgamma(arg);
    last_mag = mag;
    if (mag < 1e-18 * std::abs(algebraic)) {
      omitted = mag;
      break;
    }
  }
  if (!std::isfinite(omitted)) {
    // Loop exhausted: every coefficient vanished or the terms kept shrinking.
    omitted = std::isfinite(last_mag) ? last_mag : 0.0;
  }
  const Complex value = residues + algebraic;
  const Real bound = omitted + 8.0 * kEps * (std::abs(algebraic) + std::abs(residues));
  if (!(bound <= kMlTargetRel * std::abs(value))) return std::nullopt;
  return MlEvaluation{value, bound, MlMethod::asymptotic};
}

struct ContourParams {
  Real mu = 0.0;
  Real h = 0.0;
  Real n = std::numeric_limits<Real>::infinity();
};

// Parabolic contour parameters for a region bounded by two singularities.
inline ContourParams opc_bounded(Real t, Real phi_j, Real phi_j1, Real pj, Real qj,
                                 Real log_epsilon) {
  const Real log_eps = std::log(kEps);
  const Real fac = 1.01;
  const Real f_max = std::exp(log_epsilon - log_eps);
  const Real sq_phi_j = std::sqrt(phi_j);
  const Real threshold = 2.0 * std::sqrt((log_epsilon - log_eps) / t);
  const Real sq_phi_j1 = std::min(std::sqrt(phi_j1), threshold - sq_phi_j);

  Real sq_bar_j = sq_phi_j, sq_bar_j1 = sq_phi_j1, f_bar = 1.0;
  const bool p_zero = pj < 1e-14, q_zero = qj < 1e-14;
  if (p_zero && !q_zero) {
    const Real f_min =
        sq_phi_j > 0.0 ? fac * std::pow(sq_phi_j / (sq_phi_j1 - sq_phi_j), qj) : fac;
    if (!(f_min < f_max)) return {};
    f_bar = f_min + f_min / f_max * (f_max - f_min);
    const Real fq = std::pow(f_bar, -1.0 / qj);
    sq_bar_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq);
  } else if (!p_zero && q_zero) {
    const Real f_min = fac * std::pow(sq_phi_j1 / (sq_phi_j1 - sq_phi_j), pj);
    if (!(f_min < f_max)) return {};
    f_bar = f_min + f_min / f_max * (f_max - f_min);
    const Real fp = std::pow(f_bar, -1.0 / pj);
    sq_bar_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp);
  } else if (!p_zero && !q_zero) {
    Real f_min = fac * (sq_phi_j + sq_phi_j1) / std::pow(sq_phi_j1 - sq_phi_j, std::max(pj, qj));
    if (!(f_min < f_max)) return {};
    f_min = std::max(f_min, 1.5);
    f_bar = f_min + f_min / f_max * (f_max - f_min);
    const Real fp = std::pow(f_bar, -1.0 / pj);
    const Real fq = std::pow(f_bar, -1.0 / qj);
    const Real w = -phi_j1 * t / log_epsilon;
    const Real den = 2.0 + w - (1.0 + w) * fp + fq;
    sq_bar_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den;
    sq_bar_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den;
  }
  const Real log_eps_adj = log_epsilon - std::log(f_bar);
  const Real w = -sq_bar_j1 * sq_bar_j1 * t / log_eps_adj;
  ContourParams out;
  out.mu = std::pow(((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w), 2);
  out.h = -2.0 * kPi / log_eps_adj * (sq_bar_j1 - sq_bar_j) / ((1.0 + w) * sq_bar_j + sq_bar_j1);
  out.n = std::ceil(std::sqrt(1.0 - log_eps_adj / t / out.mu) / out.h);
  if (!(out.h > 0.0) || !std::isfinite(out.n)) return {};
  return out;
}

// Parabolic contour parameters for the unbounded region right of the last singularity.
inline ContourParams opc_unbounded(Real t, Real phi_j, Real pj, Real log_epsilon) {
  const Real sq_phi_j = std::sqrt(phi_j);
  Real phibar = phi_j > 0.0 ? phi_j * 1.01 : 0.01;
  Real sq_phibar = std::sqrt(phibar);
  const Real f_min = 1.0, f_max = 10.0, f_tar = 5.0;
  Real n = 0.0, a = 0.0, sq_mu = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const Real phi_t = phibar * t;
    const Real le = log_epsilon / phi_t;
    n = std::ceil(phi_t / kPi * (1.0 - 3.0 * le / 2.0 + std::sqrt(1.0 - 2.0 * le)));
    a = kPi * n / phi_t;
    sq_mu = sq_phibar * std::abs(4.0 - a) / std::abs(7.0 - std::sqrt(1.0 + 12.0 * a));
    const Real fbar = std::pow((sq_phibar - sq_phi_j) / sq_mu, -pj);
    if (pj < 1e-14 || (f_min < fbar && fbar < f_max)) break;
    sq_phibar = std::pow(f_tar, -1.0 / pj) * sq_mu + sq_phi_j;
    phibar = sq_phibar * sq_phibar;
  }
  ContourParams out;
  out.mu = sq_mu * sq_mu;
  out.h = (-3.0 * a - 2.0 + 2.0 * std::sqrt(1.0 + 12.0 * a)) / (4.0 - a) / n;
  out.n = n;

  const Real log_eps = std::log(kEps);
  const Real threshold = (log_epsilon - log_eps) / t;
  if (out.mu > threshold) {
    const Real q = std::abs(pj) < 1e-14 ? 0.0 : std::pow(f_tar, -1.0 / pj) * std::sqrt(out.mu);
    phibar = std::pow(q + std::sqrt(phi_j), 2);
    if (phibar < threshold) {
      const Real w = std::sqrt(log_eps / (log_eps - log_epsilon));
      const Real u = std::sqrt(-phibar * t / log_eps);
      out.mu = threshold;
      out.n = std::ceil(w * log_epsilon / 2.0 / kPi / (u * w - 1.0));
      out.h = std::sqrt(log_eps / (log_eps - log_epsilon)) / out.n;
    } else {
      return {};
    }
  }
  if (!(out.h > 0.0) || !std::isfinite(out.n) || out.n <= 0.0) return {};
  return out;
}

/// Inverse Laplace transform of s^{a-b}/(s^a - z) at t = 1.
inline MlEvaluation ml_laplace_inversion(Real a, Real b, Complex z) {
  constexpr Real t = 1.0;
  Real log_epsilon = std::log(1e-15);

  struct Singularity {
    Complex s;
    Real phi;
  };
  std::vector<Singularity> sing;
  for (const Complex& s : ml_poles(a, z)) {
    const Real phi = 0.5 * (s.real() + std::abs(s));
    if (phi > 1e-15) sing.push_back({s, phi});
  }
  std::sort(sing.begin(), sing.end(), [](auto& x, auto& y) { return x.phi < y.phi; });
  sing.insert(sing.begin(), Singularity{Complex(0.0), 0.0});  // branch point

  const std::size_t j1_count = sing.size();
  std::vector<Real> p(j1_count, 1.0), q(j1_count, 1.0), phi(j1_count + 1);
  p[0] = std::max(0.0, -2.0 * (a - b + 1.0));
  q.back() = std::numeric_limits<Real>::infinity();
  for (std::size_t j = 0; j < j1_count; ++j) phi[j] = sing[j].phi;
  phi[j1_count] = std::numeric_limits<Real>::infinity();

  std::vector<std::size_t> admissible;
  for (std::size_t j = 0; j < j1_count; ++j) {
    if (phi[j] < (log_epsilon - std::log(kEps)) / t && phi[j] < phi[j + 1]) admissible.push_back(j);
  }
  if (admissible.empty()) {
    throw AccuracyError("mittag_leffler: no admissible integration region");
  }

  ContourParams best;
  std::size_t best_region = 0;
  for (;;) {
    best = {};
    for (std::size_t j : admissible) {
      const ContourParams c = (j + 1 < j1_count)
                                  ? opc_bounded(t, phi[j], phi[j + 1], p[j], q[j], log_epsilon)
                                  : opc_unbounded(t, phi[j], p[j], log_epsilon);
      if (c.n < best.n) {
        best = c;
        best_region = j;
      }
    }
    if (best.n <= 200.0) break;
    log_epsilon += std::log(10.0);
    if (log_epsilon > std::log(1e-10)) {
      throw AccuracyError("mittag_leffler: contour quadrature cannot reach 1e-10 at z = (" +
                          std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")");
    }
  }

  const Complex I(0.0, 1.0);
  const int n = static_cast<int>(best.n);
  Complex integral = 0.0;
  Real magnitude = 0.0;
  for (int k = -n; k <= n; ++k) {
    const Real u = best.h * k;
    const Complex s = best.mu * std::pow(I * u + 1.0, 2);
    const Complex ds = -2.0 * best.mu * u + 2.0 * best.mu * I;
    const Complex term = std::exp(s * t) * std::pow(s, a - b) / (std::pow(s, a) - z) * ds;
    integral += term;
    magnitude += std::abs(term);
  }
  integral *= best.h / (2.0 * kPi * I);
  magnitude *= best.h / (2.0 * kPi);

  Complex residues = 0.0;
  for (std::size_t j = best_region + 1; j < j1_count; ++j) residues += ml_residue(a, b, sing[j].s);

  Complex value = integral + residues;
  if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
    throw AccuracyError("mittag_leffler: non-finite contour quadrature");
  }
  if (z.imag() == 0.0) value = Complex(value.real(), 0.0);
  const Real bound = std::exp(log_epsilon) * std::max(1.0, std::abs(value)) + 16.0 * kEps * magnitude;
  return MlEvaluation{value, bound, MlMethod::laplace_inversion};
}

}  // namespace detail

/// E_{alpha,beta}(z) with an absolute error estimate and the regime used.
inline MlEvaluation mittag_leffler_eval(const MittagLefflerParams& params, Complex z) {
  const Real a = params.alpha(), b = params.beta();
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw DomainError("mittag_leffler: non-finite argument");
  }
  if (std::abs(z) == 0.0) return {Complex(rgamma(b)), 0.0, MlMethod::exact};
  if (std::abs(z) <= 1.0) {
    if (auto r = detail::ml_series(a, b, z)) return *r;
  }
  if (std::abs(z) >= 20.0) {
    if (auto r = detail::ml_asymptotic(a, b, z)) return *r;
  }
  return detail::ml_laplace_inversion(a, b, z);
}

inline Complex mittag_leffler(const MittagLefflerParams& params, Complex z) {
  return mittag_leffler_eval(params, z).value;
}

/// One-parameter E_alpha(z) = E_{alpha,1}(z).
inline Complex mittag_leffler(Real alpha, Complex z) {
  return mittag_leffler(MittagLefflerParams(alpha, 1.0), z);
}

/// Empirical witness for the constant c in |E_{alpha,beta}(-t)| <= c/(1+t):
/// sup of (1+t)|E_{alpha,beta}(-t)| over t = 0 and a log grid on [1e-6, 1e6].
inline Real ml_decay_constant(Real alpha, Real beta = 1.0, std::size_t grid_points = 1201) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ParameterError("ml_decay_constant: alpha must lie in (0,1]");
  }
  const MittagLefflerParams p(alpha, beta);
  Real sup = std::abs(rgamma(beta));
  for (Real t : log_spaced(1e-6, 1e6, grid_points)) {
    sup = std::max(sup, (1.0 + t) * std::abs(mittag_leffler(p, Complex(-t))));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Wright-type function Phi_gamma
// ---------------------------------------------------------------------------

class WrightParams {
 public:
  explicit WrightParams(Real gamma) : gamma_(gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw ParameterError("Wright gamma must lie in (0,1), got " + std::to_string(gamma));
    }
  }
  Real gamma() const noexcept { return gamma_; }

 private:
  Real gamma_;
};

enum class WrightMethod { exact, series, integral };

inline const char* to_string(WrightMethod m) {
  switch (m) {
    case WrightMethod::exact: return "exact";
    case WrightMethod::series: return "series";
    case WrightMethod::integral: return "integral";
  }
  return "?";
}

struct WrightEvaluation {
  Real value = 0.0;
  Real error_bound = 0.0;  // absolute
  WrightMethod method = WrightMethod::exact;
};

namespace detail {

inline constexpr Real kWrightSeriesBound = 1e-13;

inline std::optional<WrightEvaluation> wright_series(Real g, Real t) {
  const Real log_t = std::log(t);
  Real sum = 0.0, abs_sum = 0.0;
  int small = 0;
  for (std::size_t n = 0; n < kMaxSeriesTerms; ++n) {
    const auto rg = rgamma_parts(1.0 - g * static_cast<Real>(n + 1));
    Real term = 0.0;
    if (!rg.zero) {
      const Real sign = (n % 2 == 0 ? 1.0 : -1.0) * rg.sign;
      term = sign * std::exp(static_cast<Real>(n) * log_t - std::lgamma(static_cast<Real>(n) + 1.0) +
                             rg.log_abs);
    }
    sum += term;
    abs_sum += std::abs(term);
    if (!std::isfinite(abs_sum)) return std::nullopt;
    if (std::abs(term) < 1e-16 * std::abs(sum)) {
      if (++small == 3) {
        const Real bound = 16.0 * kEps * abs_sum + 4.0 * std::abs(term);
        if (bound > kWrightSeriesBound) return std::nullopt;
        return WrightEvaluation{sum, bound, WrightMethod::series};
      }
    } else {
      small = 0;
    }
  }
  return std::nullopt;
}

/// a(phi) - a(0) for the stable-density kernel; a(0) = (1-g) g^{g/(1-g)}.
inline Real wright_kernel_shift(Real g, Real phi, Real a0) {
  const Real s1 = std::sin(g * phi);
  const Real a = std::pow(s1 / std::sin(phi), 1.0 / (1.0 - g)) * std::sin((1.0 - g) * phi) / s1;
  return a - a0;
}

inline WrightEvaluation wright_integral(Real g, Real t) {
  // Phi_g(t) = t^{g/(1-g)} / (pi (1-g)) * int_0^pi a(phi) exp(-a(phi) X) dphi,  X = t^{1/(1-g)}
  const Real X = std::pow(t, 1.0 / (1.0 - g));
  const Real a0 = (1.0 - g) * std::pow(g, g / (1.0 - g));
  auto integrand = [&](Real phi) -> Real {
    const Real da = wright_kernel_shift(g, phi, a0);
    const Real e = da * X;
    if (!(e < 700.0)) return 0.0;
    return (da + a0) * std::exp(-e);
  };
  // Concentration width near phi = 0 is ~ 1/sqrt(a0 g X / 2); seed breakpoints there.
  const Real width = 1.0 / std::sqrt(1.0 + 0.5 * a0 * g * X);
  std::vector<Real> breaks{0.0};
  for (Real b = width; b < kPi; b *= 2.0) breaks.push_back(b);
  breaks.push_back(kPi);

  Real integral = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const auto r = quad::integrate(integrand, breaks[i], breaks[i + 1], 1e-300, 1e-14, 400);
    integral += r.value;
    err += r.error;
  }
  const Real scale = std::pow(t, g / (1.0 - g)) / (kPi * (1.0 - g)) * std::exp(-a0 * X);
  const Real value = scale * integral;
  const Real bound = scale * err + 16.0 * kEps * value;
  if (!std::isfinite(value) || bound > std::max(1e-10, 1e-8 * value)) {
    throw AccuracyError("wright_phi: integral representation did not converge at t = " +
                        std::to_string(t));
  }
  return WrightEvaluation{value, bound, WrightMethod::integral};
}

}  // namespace detail

/// Phi_gamma(t) = sum_n (-t)^n / (n! Gamma(1 - gamma (n+1))), t >= 0.
inline WrightEvaluation wright_phi_eval(const WrightParams& params, Real t) {
  const Real g = params.gamma();
  if (!(t >= 0.0)) throw DomainError("wright_phi: t must be >= 0, got " + std::to_string(t));
  if (!std::isfinite(t)) return {0.0, 0.0, WrightMethod::exact};
  if (t == 0.0) return {rgamma(1.0 - g), 0.0, WrightMethod::exact};
  WrightEvaluation r;
  if (auto s = detail::wright_series(g, t)) {
    r = *s;
  } else {
    r = detail::wright_integral(g, t);
  }
  if (r.value < -1e-10) {
    throw AccuracyError("wright_phi: negative density value " + std::to_string(r.value));
  }
  return r;
}

inline Real wright_phi(const WrightParams& params, Real t) { return wright_phi_eval(params, t).value; }
inline Real wright_phi(Real gamma, Real t) { return wright_phi(WrightParams(gamma), t); }

/// Leading saddle-point form A t^{(g-1/2)/(1-g)} exp(-B t^{1/(1-g)}).
inline Real wright_asymptotic(const WrightParams& params, Real t) {
  const Real g = params.gamma();
  const Real B = (1.0 - g) * std::pow(g, g / (1.0 - g));
  const Real A = std::sqrt(B) / ((1.0 - g) * std::sqrt(2.0 * kPi * g));
  return A * std::pow(t, (g - 0.5) / (1.0 - g)) * std::exp(-B * std::pow(t, 1.0 / (1.0 - g)));
}

/// Smallest point of a doubling search beyond which the tail mass of Phi_gamma,
/// estimated from the saddle-point form with safety factor 2, is below `tail_tol`.
inline Real wright_tail_point(const WrightParams& params, Real tail_tol) {
  const Real g = params.gamma();
  const Real q = 1.0 / (1.0 - g);
  const Real B = (1.0 - g) * std::pow(g, g / (1.0 - g));
  Real s = 1.0;
  for (int i = 0; i < 200; ++i, s *= 1.25) {
    // int_s^inf f ~ f(s) / (q B s^{q-1}) for f = A s^p exp(-B s^q)
    const Real tail = 2.0 * wright_asymptotic(params, s) / (q * B * std::pow(s, q - 1.0));
    if (s > 2.0 && tail < tail_tol) return s;
  }
  return s;
}

}  // namespace fracevo
