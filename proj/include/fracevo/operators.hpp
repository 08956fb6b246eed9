#pragma once

// Finite-dimensional realizations of the generator: diagonal (spectral) test
// operators, the damped Schroedinger operator -(i Delta_h + a) with Dirichlet
// conditions, and the 2x2 block operator [[0, I], [-A, -BB*]] of the
// integro-differential system. Plus dissipativity and resolvent diagnostics.

#include <fracevo/core.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fracevo {

/// Factorization of (lambda I - A) for repeated solves with one shift.
class ShiftedSolver {
 public:
  Vector solve(const Vector& b) const {
    if (b.size() != dimension()) throw ShapeError("shifted solve: right-hand side has wrong length");
    if (const auto* d = std::get_if<Vector>(&impl_)) return b.cwiseQuotient(*d);
    return std::get<Eigen::PartialPivLU<Matrix>>(impl_).solve(b);
  }

  /// Solves (lambda I - A)^* x = b.
  Vector solve_adjoint(const Vector& b) const {
    if (const auto* d = std::get_if<Vector>(&impl_)) return b.cwiseQuotient(d->conjugate());
    return std::get<Eigen::PartialPivLU<Matrix>>(impl_).adjoint().solve(b);
  }

  Complex shift() const noexcept { return shift_; }

  Eigen::Index dimension() const {
    if (const auto* d = std::get_if<Vector>(&impl_)) return d->size();
    return std::get<Eigen::PartialPivLU<Matrix>>(impl_).rows();
  }

 private:
  friend class LinearOperator;
  ShiftedSolver(Complex shift, Vector diag) : shift_(shift), impl_(std::move(diag)) {}
  ShiftedSolver(Complex shift, Eigen::PartialPivLU<Matrix> lu) : shift_(shift), impl_(std::move(lu)) {}

  Complex shift_;
  std::variant<Vector, Eigen::PartialPivLU<Matrix>> impl_;
};

/// Immutable handle for the generator A on C^n.
class LinearOperator {
 public:
  static LinearOperator diagonal(std::span<const Complex> eigenvalues) {
    if (eigenvalues.empty()) throw ParameterError("diagonal_operator: empty eigenvalue list");
    LinearOperator op;
    op.diag_ = Vector(static_cast<Eigen::Index>(eigenvalues.size()));
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
      (*op.diag_)(static_cast<Eigen::Index>(k)) = eigenvalues[k];
    }
    return op;
  }

  static LinearOperator dense(Matrix m) {
    if (m.rows() == 0 || m.rows() != m.cols()) throw ShapeError("dense operator must be square and non-empty");
    LinearOperator op;
    op.dense_ = std::move(m);
    return op;
  }

  Eigen::Index dimension() const { return diag_ ? diag_->size() : dense_.rows(); }
  bool is_diagonal() const noexcept { return diag_.has_value(); }

  /// Eigenvalues when the operator is diagonal, empty otherwise.
  const std::optional<Vector>& spectral_data() const noexcept { return diag_; }

  Vector apply(const Vector& x) const {
    check_length(x);
    if (diag_) return diag_->cwiseProduct(x);
    return dense_ * x;
  }

  Vector adjoint_apply(const Vector& x) const {
    check_length(x);
    if (diag_) return diag_->conjugate().cwiseProduct(x);
    return dense_.adjoint() * x;
  }

  ShiftedSolver shifted_solver(Complex lambda) const {
    if (diag_) {
      Vector d = Vector::Constant(diag_->size(), lambda) - *diag_;
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        const Real scale = std::max({std::abs(lambda), std::abs((*diag_)(k)), 1e-300});
        if (std::abs(d(k)) <= 4.0 * std::numeric_limits<Real>::epsilon() * scale) {
          throw SingularityError("shifted solve: shift coincides with eigenvalue " + std::to_string(k));
        }
      }
      return ShiftedSolver(lambda, std::move(d));
    }
    Matrix m = -dense_;
    m.diagonal().array() += lambda;
    Eigen::PartialPivLU<Matrix> lu(m);
    if (!(lu.rcond() > 1e-14)) {
      throw SingularityError("shifted solve: (lambda I - A) is singular to working precision");
    }
    return ShiftedSolver(lambda, std::move(lu));
  }

  /// (lambda I - A)^{-1} b.
  Vector shifted_solve(Complex lambda, const Vector& b) const {
    return shifted_solver(lambda).solve(b);
  }

  Matrix to_dense() const {
    if (diag_) return diag_->asDiagonal();
    return dense_;
  }

  /// Dimension mixed with a hash of the spectral data or matrix entries.
  std::uint64_t fingerprint() const {
    const std::int64_t n = dimension();
    std::uint64_t h = fnv1a(&n, sizeof n);
    const std::uint8_t tag = diag_ ? 1 : 2;
    h = fnv1a(&tag, 1, h);
    if (diag_) return fnv1a(diag_->data(), sizeof(Complex) * static_cast<std::size_t>(diag_->size()), h);
    return fnv1a(dense_.data(), sizeof(Complex) * static_cast<std::size_t>(dense_.size()), h);
  }

 private:
  LinearOperator() = default;

  void check_length(const Vector& x) const {
    if (x.size() != dimension()) {
      throw ShapeError("operator of dimension " + std::to_string(dimension()) +
                       " applied to vector of length " + std::to_string(x.size()));
    }
  }

  std::optional<Vector> diag_;
  Matrix dense_;
};

inline LinearOperator diagonal_operator(std::span<const Complex> eigenvalues) {
  return LinearOperator::diagonal(eigenvalues);
}

inline LinearOperator diagonal_operator(std::initializer_list<Complex> eigenvalues) {
  return LinearOperator::diagonal(std::span<const Complex>(eigenvalues.begin(), eigenvalues.size()));
}

/// Eigenvalues of an arbitrary operator (dense complex eigensolver for non-diagonal ones).
inline Vector eigenvalues(const LinearOperator& op) {
  if (op.spectral_data()) return *op.spectral_data();
  Eigen::ComplexEigenSolver<Matrix> es(op.to_dense(), /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw AccuracyError("eigenvalue computation did not converge");
  return es.eigenvalues();
}

/// Diagonal operator with the eigenvalues of `op`.
inline LinearOperator diagonalized(const LinearOperator& op) {
  const Vector ev = eigenvalues(op);
  return LinearOperator::diagonal(std::span<const Complex>(ev.data(), static_cast<std::size_t>(ev.size())));
}

// ---------------------------------------------------------------------------
// 1D mesh, damping profiles, Schroedinger and Laplacian operators
// ---------------------------------------------------------------------------

/// Interior nodes x_j = j h, j = 1..n, h = L/(n+1).
inline std::vector<Real> dirichlet_mesh(std::size_t n, Real length) {
  const Real h = length / static_cast<Real>(n + 1);
  std::vector<Real> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = static_cast<Real>(j + 1) * h;
  return x;
}

/// Non-negative damping coefficient a(x) sampled at the interior mesh nodes.
class DampingProfile {
 public:
  explicit DampingProfile(std::vector<Real> samples) : samples_(std::move(samples)) {
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      if (!(samples_[j] >= 0.0) || !std::isfinite(samples_[j])) {
        throw ParameterError("damping sample " + std::to_string(j) + " is negative or not finite (" +
                             std::to_string(samples_[j]) + ")");
      }
    }
  }

  static DampingProfile constant(std::size_t n, Real value) {
    return DampingProfile(std::vector<Real>(n, value));
  }

  /// scale on [x1, x2], zero elsewhere.
  static DampingProfile indicator(std::size_t n, Real length, Real x1, Real x2, Real scale = 1.0) {
    std::vector<Real> a(n, 0.0);
    const auto x = dirichlet_mesh(n, length);
    for (std::size_t j = 0; j < n; ++j) a[j] = (x[j] >= x1 && x[j] <= x2) ? scale : 0.0;
    return DampingProfile(std::move(a));
  }

  /// Smooth compactly supported bump amplitude * exp(1 - 1/(1 - r^2)), r = (x - c)/w.
  static DampingProfile bump(std::size_t n, Real length, Real center, Real width, Real amplitude = 1.0) {
    if (!(width > 0.0)) throw ParameterError("bump width must be positive");
    std::vector<Real> a(n, 0.0);
    const auto x = dirichlet_mesh(n, length);
    for (std::size_t j = 0; j < n; ++j) {
      const Real r = (x[j] - center) / width;
      if (std::abs(r) < 1.0) a[j] = amplitude * std::exp(1.0 - 1.0 / (1.0 - r * r));
    }
    return DampingProfile(std::move(a));
  }

  const std::vector<Real>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

  /// Index range [first, last] of strictly positive samples, if any.
  std::optional<std::pair<std::size_t, std::size_t>> support() const {
    std::optional<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      if (samples_[j] > 0.0) {
        if (!s) s = std::make_pair(j, j);
        s->second = j;
      }
    }
    return s;
  }

 private:
  std::vector<Real> samples_;
};

/// -(i Delta_h + diag(a)) with the 3-point Dirichlet Laplacian, h = L/(n+1).
inline LinearOperator damped_schrodinger_1d(std::size_t n, Real length, const DampingProfile& damping) {
  if (n < 3) throw ParameterError("damped_schrodinger_1d: mesh size must be at least 3");
  if (!(length > 0.0)) throw ParameterError("damped_schrodinger_1d: length must be positive");
  if (damping.size() != n) throw ShapeError("damped_schrodinger_1d: damping has wrong length");
  const Real h = length / static_cast<Real>(n + 1);
  const Real inv_h2 = 1.0 / (h * h);
  const Complex I(0.0, 1.0);
  const auto N = static_cast<Eigen::Index>(n);
  Matrix m = Matrix::Zero(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    m(j, j) = 2.0 * inv_h2 * I - damping.samples()[static_cast<std::size_t>(j)];
    if (j > 0) m(j, j - 1) = -inv_h2 * I;
    if (j + 1 < N) m(j, j + 1) = -inv_h2 * I;
  }
  return LinearOperator::dense(std::move(m));
}

/// -Delta_h, symmetric positive definite.
inline LinearOperator dirichlet_laplacian_1d(std::size_t n, Real length) {
  if (n < 1) throw ParameterError("dirichlet_laplacian_1d: empty mesh");
  const Real h = length / static_cast<Real>(n + 1);
  const auto N = static_cast<Eigen::Index>(n);
  Matrix m = Matrix::Zero(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    m(j, j) = 2.0 / (h * h);
    if (j > 0) m(j, j - 1) = -1.0 / (h * h);
    if (j + 1 < N) m(j, j + 1) = -1.0 / (h * h);
  }
  return LinearOperator::dense(std::move(m));
}

/// Closed-form eigenvalues (4/h^2) sin^2(k pi h / (2L)) of -Delta_h, k = 1..n.
inline std::vector<Real> dirichlet_eigenvalues(std::size_t n, Real length) {
  const Real h = length / static_cast<Real>(n + 1);
  std::vector<Real> mu(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const Real s = std::sin(static_cast<Real>(k) * kPi * h / (2.0 * length));
    mu[k - 1] = 4.0 / (h * h) * s * s;
  }
  return mu;
}

/// Multiplication by the damping samples (BB* for B = multiplication by sqrt(a)).
inline LinearOperator multiplication_operator(const DampingProfile& a) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) {
    m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = a.samples()[j];
  }
  return LinearOperator::dense(std::move(m));
}

// ---------------------------------------------------------------------------
// Block operator for the integro-differential system
// ---------------------------------------------------------------------------

/// [[0, I], [-A, -D]] acting on stacked (v, u) in X_{1/2} x X, with A self-adjoint
/// positive definite and D = BB* self-adjoint non-negative.
class BlockSystemOperator {
 public:
  Eigen::Index half_dimension() const { return a_.rows(); }
  Eigen::Index dimension() const { return 2 * a_.rows(); }

  const Matrix& a_part() const noexcept { return a_; }
  const Matrix& damping() const noexcept { return d_; }

  /// (v, u) -> (u, -A v - D u).
  Vector apply(const Vector& stacked) const {
    if (stacked.size() != dimension()) throw ShapeError("block operator: wrong state length");
    const Eigen::Index n = half_dimension();
    Vector out(dimension());
    out.head(n) = stacked.tail(n);
    out.tail(n) = -a_ * stacked.head(n) - d_ * stacked.tail(n);
    return out;
  }

  LinearOperator as_operator() const {
    const Eigen::Index n = half_dimension();
    Matrix m = Matrix::Zero(2 * n, 2 * n);
    m.topRightCorner(n, n).setIdentity();
    m.bottomLeftCorner(n, n) = -a_;
    m.bottomRightCorner(n, n) = -d_;
    return LinearOperator::dense(std::move(m));
  }

  /// ||A^{1/2} v|| computed from the Cholesky factor A = L L^*.
  Real half_norm(const Vector& v) const { return (chol_.matrixU() * v).norm(); }

  /// Energy norm sqrt(||A^{1/2} v||^2 + ||u||^2) of a stacked state.
  Real energy_norm(const Vector& stacked) const {
    const Eigen::Index n = half_dimension();
    return std::hypot(half_norm(stacked.head(n)), stacked.tail(n).norm());
  }

 private:
  friend BlockSystemOperator block_operator(const LinearOperator&, const LinearOperator&);
  BlockSystemOperator(Matrix a, Matrix d, Eigen::LLT<Matrix> chol)
      : a_(std::move(a)), d_(std::move(d)), chol_(std::move(chol)) {}

  Matrix a_;
  Matrix d_;
  Eigen::LLT<Matrix> chol_;
};

inline BlockSystemOperator block_operator(const LinearOperator& a, const LinearOperator& damping) {
  if (a.dimension() != damping.dimension()) {
    throw ShapeError("block_operator: A has dimension " + std::to_string(a.dimension()) +
                     " but damping has " + std::to_string(damping.dimension()));
  }
  Matrix am = a.to_dense();
  Matrix dm = damping.to_dense();
  const Real a_scale = std::max(1.0, am.norm());
  if ((am - am.adjoint()).norm() > 1e-12 * a_scale) throw ParameterError("block_operator: A is not self-adjoint");
  Eigen::LLT<Matrix> chol(am);
  if (chol.info() != Eigen::Success) throw ParameterError("block_operator: A is not positive definite");
  Eigen::SelfAdjointEigenSolver<Matrix> ea(am, Eigen::EigenvaluesOnly);
  if (!(ea.eigenvalues().minCoeff() > 0.0)) throw ParameterError("block_operator: A is not positive definite");
  const Real d_scale = std::max(1.0, dm.norm());
  if ((dm - dm.adjoint()).norm() > 1e-12 * d_scale) {
    throw ParameterError("block_operator: damping is not self-adjoint");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> ed(dm, Eigen::EigenvaluesOnly);
  if (ed.eigenvalues().minCoeff() < -1e-12 * d_scale) {
    throw ParameterError("block_operator: damping is not non-negative");
  }
  return BlockSystemOperator(std::move(am), std::move(dm), std::move(chol));
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Max of Re<Ax, x> over `trials` random unit vectors.
inline Real dissipativity_check(const LinearOperator& op, std::size_t trials, std::uint64_t seed = 20240611) {
  if (trials < 1) throw ParameterError("dissipativity_check: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal;
  Real worst = -std::numeric_limits<Real>::infinity();
  Vector x(op.dimension());
  for (std::size_t t = 0; t < trials; ++t) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = Complex(normal(rng), normal(rng));
    x.normalize();
    worst = std::max(worst, x.dot(op.apply(x)).real());
  }
  return worst;
}

/// Exact sup of Re<Ax, x> over unit x: top eigenvalue of the Hermitian part.
inline Real numerical_abscissa(const LinearOperator& op) {
  if (op.spectral_data()) return op.spectral_data()->real().maxCoeff();
  const Matrix m = op.to_dense();
  const Matrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

enum class ResolventMethod { automatic, dense_svd, inverse_iteration };

namespace detail {

// 1/sigma_min(M) by inverse subspace iteration on (M^* M)^{-1} with Rayleigh-Ritz.
inline Real inverse_norm_subspace(const ShiftedSolver& lu, Real tol, std::uint64_t seed) {
  const Eigen::Index n = lu.dimension();
  const Eigen::Index p = std::min<Eigen::Index>(n, 4);
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal;
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = Complex(normal(rng), normal(rng));
  Eigen::HouseholderQR<Matrix> qr(x);
  x = qr.householderQ() * Matrix::Identity(n, p);

  Real theta_prev = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    Matrix y(n, p), z(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      y.col(j) = lu.solve_adjoint(x.col(j));
      z.col(j) = lu.solve(y.col(j));
    }
    const Matrix gram = y.adjoint() * y;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const Real theta = es.eigenvalues().maxCoeff();
    if (!std::isfinite(theta)) break;
    if (std::abs(theta - theta_prev) <= tol * theta) return std::sqrt(theta);
    theta_prev = theta;
    Eigen::HouseholderQR<Matrix> q(z);
    x = q.householderQ() * Matrix::Identity(n, p);
  }
  throw AccuracyError("resolvent_scan: inverse iteration did not converge");
}

}  // namespace detail

/// ||(i mu I - A)^{-1}|| for each mu in the grid.
inline std::vector<Real> resolvent_scan(const LinearOperator& op, std::span<const Real> mu_grid,
                                        ResolventMethod method = ResolventMethod::automatic,
                                        Real tol = 1e-12) {
  const Complex I(0.0, 1.0);
  std::vector<Real> out;
  out.reserve(mu_grid.size());
  const bool diag = op.spectral_data().has_value();
  if (method == ResolventMethod::automatic && !diag) {
    method = op.dimension() <= 512 ? ResolventMethod::dense_svd : ResolventMethod::inverse_iteration;
  }
  const Matrix dense = (diag || method == ResolventMethod::inverse_iteration) ? Matrix() : op.to_dense();
  for (Real mu : mu_grid) {
    const std::string where = "resolvent_scan: i*mu - A singular at mu = " + std::to_string(mu);
    if (diag && method == ResolventMethod::automatic) {
      const Vector& ev = *op.spectral_data();
      Real dist = std::numeric_limits<Real>::infinity();
      for (Eigen::Index k = 0; k < ev.size(); ++k) dist = std::min(dist, std::abs(I * mu - ev(k)));
      if (!(dist > 0.0)) throw SingularityError(where);
      out.push_back(1.0 / dist);
      continue;
    }
    if (method == ResolventMethod::dense_svd) {
      Matrix m = diag ? Matrix(-op.to_dense()) : Matrix(-dense);
      m.diagonal().array() += I * mu;
      Eigen::BDCSVD<Matrix> svd(m);
      const Real smin = svd.singularValues().minCoeff();
      const Real smax = svd.singularValues().maxCoeff();
      if (!(smin > 4.0 * std::numeric_limits<Real>::epsilon() * smax)) throw SingularityError(where);
      out.push_back(1.0 / smin);
      continue;
    }
    try {
      const ShiftedSolver lu = op.shifted_solver(I * mu);
      out.push_back(detail::inverse_norm_subspace(lu, tol, 0x5eed));
    } catch (const SingularityError&) {
      throw SingularityError(where);
    }
  }
  return out;
}

inline std::vector<Real> uniform_points(Real lo, Real hi, std::size_t count) {
  if (count < 2) throw ParameterError("uniform_points: need at least 2 points");
  std::vector<Real> x(count);
  for (std::size_t k = 0; k < count; ++k) {
    x[k] = lo + (hi - lo) * static_cast<Real>(k) / static_cast<Real>(count - 1);
  }
  return x;
}

}  // namespace fracevo
