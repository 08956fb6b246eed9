#pragma once

// Solution operators for the tempered problem. With v = e^{eta t} u the problem
// becomes D^alpha v = A v, v(0) = u0, or equivalently v = u0 + g_alpha * (A v).
// Every solver computes v and then multiplies by e^{-eta t}.

#include <fracevo/core.hpp>
#include <fracevo/kernel.hpp>
#include <fracevo/operators.hpp>
#include <fracevo/quadrature.hpp>
#include <fracevo/special_fn.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fracevo {

inline constexpr std::size_t kMaxTimeSteps = 1'000'000;

struct Trajectory {
  std::vector<Real> times;
  std::vector<Vector> states;
  FractionalParams params{0.5, 0.0};
  std::uint64_t fingerprint = 0;

  std::size_t size() const noexcept { return times.size(); }

  std::vector<Real> norms() const {
    std::vector<Real> n(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) n[k] = norm_x(states[k]);
    return n;
  }

  /// k-th component of every state.
  std::vector<Complex> component(Eigen::Index k) const {
    std::vector<Complex> c(states.size());
    for (std::size_t j = 0; j < states.size(); ++j) c[j] = states[j](k);
    return c;
  }
};

/// (g_alpha * u, u) pairs of the integro-differential system.
struct IntegroTrajectory {
  std::vector<Real> times;
  std::vector<Vector> w;
  std::vector<Vector> u;
  std::vector<Real> norm_u_x;
  std::vector<Real> norm_w_xhalf;
  Real alpha = 0.5;
};

namespace detail {

inline void check_initial(const LinearOperator& op, const Vector& u0) {
  if (u0.size() != op.dimension()) {
    throw ShapeError("initial datum has length " + std::to_string(u0.size()) + ", operator dimension is " +
                     std::to_string(op.dimension()));
  }
}

inline void check_grid(const TimeGrid& grid) {
  if (grid.n_steps() > kMaxTimeSteps) {
    throw ParameterError("time grid exceeds " + std::to_string(kMaxTimeSteps) +
                         " steps; use the spectral solver for long horizons");
  }
}

// u_k = e^{-eta t_k} v_k; states[0] is u0 itself.
inline void apply_tempering(Trajectory& tr, Real eta) {
  if (eta == 0.0) return;
  for (std::size_t k = 1; k < tr.states.size(); ++k) tr.states[k] *= std::exp(-eta * tr.times[k]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectral solver
// ---------------------------------------------------------------------------

/// u_k(t) = e^{-eta t} E_alpha(lambda_k t^alpha) u0_k at arbitrary times t >= 0.
inline Trajectory solve_spectral(const LinearOperator& op, const FractionalParams& params, const Vector& u0,
                                 std::span<const Real> times) {
  if (!op.spectral_data()) throw CapabilityError("solve_spectral requires a diagonal operator");
  detail::check_initial(op, u0);
  const Vector& lambda = *op.spectral_data();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k).real() > 0.0) {
      throw ParameterError("solve_spectral: eigenvalue " + std::to_string(k) + " has positive real part");
    }
  }
  const MittagLefflerParams ml(params.alpha(), 1.0);
  Trajectory tr{{times.begin(), times.end()}, {}, params, op.fingerprint()};
  tr.states.reserve(times.size());
  for (Real t : times) {
    if (!(t >= 0.0)) throw DomainError("solve_spectral: negative time");
    if (t == 0.0) {
      tr.states.push_back(u0);
      continue;
    }
    const Real ta = std::pow(t, params.alpha());
    const Real damp = std::exp(-params.eta() * t);
    Vector s(u0.size());
    for (Eigen::Index k = 0; k < u0.size(); ++k) s(k) = damp * mittag_leffler(ml, lambda(k) * ta) * u0(k);
    tr.states.push_back(std::move(s));
  }
  return tr;
}

inline Trajectory solve_spectral(const LinearOperator& op, const FractionalParams& params, const Vector& u0,
                                 const TimeGrid& grid) {
  const auto t = grid.points();
  return solve_spectral(op, params, u0, std::span<const Real>(t));
}

// ---------------------------------------------------------------------------
// L1 stepping
// ---------------------------------------------------------------------------

namespace detail {

// Solves sum_i P(n,i) v_i + sum_i Q(n,i) A v_i = rhs_n jointly for the first m steps.
inline std::vector<Vector> solve_start(const LinearOperator& op, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                                       const std::vector<Vector>& rhs) {
  const Eigen::Index m = P.rows();
  const Eigen::Index dim = op.dimension();
  std::vector<Vector> v(static_cast<std::size_t>(m), Vector(dim));
  if (const auto& ev = op.spectral_data()) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      const Matrix M = P.cast<Complex>() + (*ev)(k) * Q.cast<Complex>();
      const Eigen::PartialPivLU<Matrix> lu(M);
      if (!(lu.rcond() > 1e-14)) throw SingularityError("start-up system is singular");
      Vector r(m);
      for (Eigen::Index n = 0; n < m; ++n) r(n) = rhs[static_cast<std::size_t>(n)](k);
      const Vector x = lu.solve(r);
      for (Eigen::Index n = 0; n < m; ++n) v[static_cast<std::size_t>(n)](k) = x(n);
    }
    return v;
  }
  const Matrix A = op.to_dense();
  Matrix M(m * dim, m * dim);
  Vector r(m * dim);
  for (Eigen::Index n = 0; n < m; ++n) {
    for (Eigen::Index i = 0; i < m; ++i) {
      auto blk = M.block(n * dim, i * dim, dim, dim);
      blk = Q(n, i) * A;
      blk.diagonal().array() += P(n, i);
    }
    r.segment(n * dim, dim) = rhs[static_cast<std::size_t>(n)];
  }
  const Eigen::PartialPivLU<Matrix> lu(M);
  if (!(lu.rcond() > 1e-14)) throw SingularityError("start-up system is singular");
  const Vector x = lu.solve(r);
  for (Eigen::Index n = 0; n < m; ++n) v[static_cast<std::size_t>(n)] = x.segment(n * dim, dim);
  return v;
}

}  // namespace detail

/// Implicit L1 scheme for D^alpha v = A v with starting weights that make the discrete
/// derivative exact on t^{k alpha} and t. The first m steps are solved as one coupled
/// system; afterwards each step solves (c I - A) v_n = rhs with c = dt^{-alpha}/Gamma(2-alpha),
/// one factorization for the rest of the run.
inline Trajectory solve_l1(const LinearOperator& op, const FractionalParams& params, const Vector& u0,
                           const TimeGrid& grid) {
  detail::check_initial(op, u0);
  detail::check_grid(grid);
  const std::size_t N = grid.n_steps();
  const Eigen::Index dim = op.dimension();
  const Real c = l1_leading_weight(params.alpha(), grid.dt());
  const auto b = l1_coefficients(params.alpha(), N);
  const Eigen::MatrixXd W = l1_starting_weights(params.alpha(), N);
  const auto m = static_cast<std::size_t>(W.cols());

  Trajectory tr{grid.points(), {}, params, op.fingerprint()};
  tr.states.reserve(N + 1);
  tr.states.push_back(u0);

  // Start-up block in e = v - v_0: c (sum_k b_k d_{n-k} + sum_j W(n,j) e_j) - A e_n = A v_0.
  const Vector au0 = op.apply(u0);
  std::vector<Vector> lifted;
  {
    const auto mi = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mi, mi), Q = Eigen::MatrixXd::Zero(mi, mi);
    for (std::size_t n = 1; n <= m; ++n) {
      const auto row = static_cast<Eigen::Index>(n - 1);
      for (std::size_t k = 0; k < n; ++k) {
        P(row, static_cast<Eigen::Index>(n - k - 1)) += c * b[k];
        if (n - k - 1 >= 1) P(row, static_cast<Eigen::Index>(n - k - 2)) -= c * b[k];
      }
      for (Eigen::Index j = 0; j < mi; ++j) P(row, j) += c * W(static_cast<Eigen::Index>(n), j);
      Q(row, row) = -1.0;
    }
    lifted = detail::solve_start(op, P, Q, std::vector<Vector>(m, au0));
    for (const auto& e : lifted) tr.states.push_back(u0 + e);
  }

  // brev[N - m] = b[m], so the weights of d_1..d_{n-1} at step n are contiguous.
  Eigen::VectorXd brev(N + 1);
  for (std::size_t k = 0; k < N; ++k) brev(static_cast<Eigen::Index>(N - k)) = b[k];
  brev(0) = 0.0;

  Matrix diffs(dim, static_cast<Eigen::Index>(N) + 1);  // column j holds v_j - v_{j-1}
  diffs.col(0).setZero();
  Matrix lift(dim, static_cast<Eigen::Index>(m));  // column j-1 holds e_j
  for (std::size_t j = 1; j <= m; ++j) {
    diffs.col(static_cast<Eigen::Index>(j)) = j == 1 ? lifted[0] : Vector(lifted[j - 1] - lifted[j - 2]);
    lift.col(static_cast<Eigen::Index>(j - 1)) = lifted[j - 1];
  }
  if (m == N) {
    detail::apply_tempering(tr, params.eta());
    return tr;
  }
  const ShiftedSolver solver = op.shifted_solver(Complex(c, 0.0));
  Vector prev = lifted.back();
  for (std::size_t n = m + 1; n <= N; ++n) {
    const auto h = static_cast<Eigen::Index>(n - 1);
    Vector rhs = c * prev + au0;
    rhs -= c * (diffs.middleCols(1, h) * brev.segment(static_cast<Eigen::Index>(N - n + 1), h).cast<Complex>());
    rhs -= c * (lift * W.row(static_cast<Eigen::Index>(n)).transpose().cast<Complex>());
    Vector e = solver.solve(rhs);
    diffs.col(static_cast<Eigen::Index>(n)) = e - prev;
    tr.states.push_back(u0 + e);
    prev = std::move(e);
  }
  detail::apply_tempering(tr, params.eta());
  return tr;
}

// ---------------------------------------------------------------------------
// Volterra product-trapezoid quadrature
// ---------------------------------------------------------------------------

namespace detail {

// v_n = u0 + scale (start[n] f_0 + sum_{j=1..n} toeplitz[n-j] f_j + sum_j W(n,j) (f_j - f_0)),
// f = A v; the first m steps are coupled through the starting weights.
inline std::vector<Vector> volterra_states(const LinearOperator& op, Real alpha, const Vector& u0,
                                           const TimeGrid& grid) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0,1)");
  check_initial(op, u0);
  check_grid(grid);
  const std::size_t N = grid.n_steps();
  const Eigen::Index dim = op.dimension();
  const auto w = product_trapezoid_weights(alpha, grid.dt(), N);
  const Eigen::MatrixXd W = trapezoid_starting_weights(alpha, N);
  const auto m = static_cast<std::size_t>(W.cols());
  const Real s = w.scale;

  Matrix av(dim, static_cast<Eigen::Index>(N) + 1);  // column j holds A v_j
  av.col(0) = op.apply(u0);
  std::vector<Vector> states;
  states.reserve(N + 1);
  states.push_back(u0);
  {
    const auto mi = static_cast<Eigen::Index>(m);
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(mi, mi);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(mi, mi);
    std::vector<Vector> rhs;
    for (std::size_t n = 1; n <= m; ++n) {
      const auto row = static_cast<Eigen::Index>(n - 1);
      for (std::size_t i = 1; i <= m; ++i) {
        Real k = W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i - 1));
        if (i <= n) k += w.toeplitz[n - i];
        Q(row, static_cast<Eigen::Index>(i - 1)) = -s * k;
      }
      const Real f0 = w.start[n] - W.row(static_cast<Eigen::Index>(n)).sum();
      rhs.push_back(u0 + (s * f0) * av.col(0));
    }
    for (auto& v : solve_start(op, P, Q, rhs)) {
      av.col(static_cast<Eigen::Index>(states.size())) = op.apply(v);
      states.push_back(std::move(v));
    }
  }
  if (m == N) return states;

  Eigen::VectorXd trev(N + 1);
  for (std::size_t k = 0; k <= N; ++k) trev(static_cast<Eigen::Index>(N - k)) = w.toeplitz[k];
  Matrix lift(dim, static_cast<Eigen::Index>(m));  // column j-1 holds f_j - f_0
  for (std::size_t j = 1; j <= m; ++j) lift.col(static_cast<Eigen::Index>(j - 1)) = av.col(static_cast<Eigen::Index>(j)) - av.col(0);

  // (I - s A) = s (1/s I - A)
  const ShiftedSolver solver = op.shifted_solver(Complex(1.0 / s, 0.0));
  for (std::size_t n = m + 1; n <= N; ++n) {
    const auto h = static_cast<Eigen::Index>(n - 1);
    Vector hist = w.start[n] * av.col(0);
    hist += av.middleCols(1, h) * trev.segment(static_cast<Eigen::Index>(N - n + 1), h).cast<Complex>();
    hist += lift * W.row(static_cast<Eigen::Index>(n)).transpose().cast<Complex>();
    const Vector rhs = u0 + s * hist;
    Vector v = solver.solve(rhs) / s;
    av.col(static_cast<Eigen::Index>(n)) = op.apply(v);
    states.push_back(std::move(v));
  }
  return states;
}

}  // namespace detail

inline Trajectory solve_volterra(const LinearOperator& op, const FractionalParams& params, const Vector& u0,
                                 const TimeGrid& grid) {
  Trajectory tr{grid.points(), detail::volterra_states(op, params.alpha(), u0, grid), params, op.fingerprint()};
  detail::apply_tempering(tr, params.eta());
  return tr;
}

inline Trajectory solve_volterra(const LinearOperator& op, Real alpha, const Vector& u0, const TimeGrid& grid) {
  return solve_volterra(op, FractionalParams(alpha, 0.0), u0, grid);
}

// ---------------------------------------------------------------------------
// Subordination
// ---------------------------------------------------------------------------

using SemigroupEval = std::function<Vector(Real, const Vector&)>;

/// Exact semigroup S(s)x = (e^{lambda_k s} x_k) of a diagonal operator.
inline SemigroupEval diagonal_semigroup(const LinearOperator& op) {
  if (!op.spectral_data()) throw CapabilityError("diagonal_semigroup requires a diagonal operator");
  const Vector lambda = *op.spectral_data();
  return [lambda](Real s, const Vector& x) -> Vector {
    return (lambda * s).array().exp().matrix().cwiseProduct(x);
  };
}

/// Tail tolerance used to truncate the subordination integral.
inline constexpr Real kSubordinationTail = 1e-10;

/// int_0^inf Phi_alpha(sigma) S(sigma t^alpha) x d sigma, truncated where the
/// density tail drops below 1e-10.
inline Vector subordinate(const SemigroupEval& semigroup, Real alpha, Real t, const Vector& x,
                          Real rel_tol = 1e-11) {
  if (!(t > 0.0)) throw DomainError("subordinate: t must be positive");
  const WrightParams wp(alpha);
  if (x.size() == 0 || x.isZero(0.0)) return Vector::Zero(x.size());
  const Real sigma_max = wright_tail_point(wp, kSubordinationTail);
  const Real ta = std::pow(t, alpha);
  auto integrand = [&](Real sigma) -> Vector { return wright_phi(wp, sigma) * semigroup(sigma * ta, x); };
  Vector total = Vector::Zero(x.size());
  // Panels [0, 2^-k sigma_max] refine near the origin, where fast modes concentrate.
  std::vector<Real> cuts{0.0};
  for (Real s = sigma_max / 1024.0; s < sigma_max; s *= 4.0) cuts.push_back(s);
  cuts.push_back(sigma_max);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = quad::integrate(integrand, cuts[i], cuts[i + 1], 1e-14 * x.norm(), rel_tol);
    if (!r.converged) throw AccuracyError("subordinate: quadrature did not converge");
    total += r.value;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Integro-differential system
// ---------------------------------------------------------------------------

/// Solves U = U0 + g_alpha * (B U), U0 = (0, u0), for the block operator B; the
/// first block is w = g_alpha * u.
inline IntegroTrajectory solve_integrodiff(const BlockSystemOperator& block, Real alpha, const Vector& u0,
                                           const TimeGrid& grid) {
  const Eigen::Index n = block.half_dimension();
  if (u0.size() != n) throw ShapeError("solve_integrodiff: initial datum has wrong length");
  Vector big = Vector::Zero(2 * n);
  big.tail(n) = u0;
  const auto states = detail::volterra_states(block.as_operator(), alpha, big, grid);
  IntegroTrajectory out;
  out.alpha = alpha;
  out.times = grid.points();
  out.w.reserve(states.size());
  out.u.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    out.w.push_back(states[k].head(n));
    out.u.push_back(states[k].tail(n));
    out.norm_u_x.push_back(norm_x(out.u.back()));
    out.norm_w_xhalf.push_back(block.half_norm(out.w.back()));
  }
  out.u.front() = u0;
  return out;
}

}  // namespace fracevo
