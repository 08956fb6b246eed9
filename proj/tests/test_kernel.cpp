#include <fracevo/kernel.hpp>
#include <fracevo/quadrature.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

using namespace fracevo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr Real kSqrtPi = 1.7724538509055160273;

std::vector<Real> sample(const TimeGrid& g, auto f) {
  std::vector<Real> u(g.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = f(g[k]);
  return u;
}

}  // namespace

TEST_CASE("g_kernel values", "[kernel]") {
  CHECK(g_kernel(1.0, 3.7) == 1.0);
  CHECK_THAT(g_kernel(2.0, 0.5), WithinRel(0.5, 1e-15));
  CHECK_THAT(g_kernel(0.5, 4.0), WithinRel(0.5 / kSqrtPi, 1e-14));
  CHECK_THAT(g_kernel(0.5, 4.0), WithinAbs(0.2820948, 5e-8));
  CHECK(g_kernel(0.3, 0.0) == 0.0);
  CHECK(g_kernel(0.3, -1.0) == 0.0);
  CHECK_THROWS_AS(g_kernel(0.0, 1.0), ParameterError);
  CHECK_THROWS_AS(g_kernel(-0.5, 1.0), ParameterError);
}

TEST_CASE("kernel samples skip t = 0 and decrease for beta < 1", "[kernel]") {
  const TimeGrid g(0.1, 20);
  const auto s = sample_kernel(0.4, g);
  REQUIRE(s.values.size() == 20);
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    CHECK(s.values[k] > 0.0);
    if (k > 0) CHECK(s.values[k] < s.values[k - 1]);
  }
}

TEST_CASE("convolution of g_1 with constant gives t", "[kernel][convolution]") {
  const TimeGrid g(0.05, 40);
  const std::vector<Real> one(g.size(), 1.0);
  const auto out = convolve_kernel(1.0, one, g);
  for (std::size_t k = 0; k < out.size(); ++k) CHECK_THAT(out[k], WithinAbs(g[k], 1e-13));
}

TEST_CASE("convolution of zero data is zero", "[kernel][convolution]") {
  const TimeGrid g(0.01, 100);
  const std::vector<Real> zero(g.size(), 0.0);
  for (Real v : convolve_kernel(0.3, zero, g)) CHECK(v == 0.0);
}

TEST_CASE("convolution is exact for piecewise-linear data", "[kernel][convolution]") {
  // g_beta * t = g_{beta+2}, g_beta * 1 = g_{beta+1}
  const TimeGrid g(0.1, 30);
  for (Real beta : {0.3, 0.5, 0.7, 1.4}) {
    const auto u = sample(g, [](Real t) { return 2.0 + 3.0 * t; });
    const auto out = convolve_kernel(beta, u, g);
    for (std::size_t k = 1; k < out.size(); ++k) {
      const Real exact = 2.0 * g_kernel(beta + 1.0, g[k]) + 3.0 * g_kernel(beta + 2.0, g[k]);
      CHECK_THAT(out[k], WithinRel(exact, 1e-12));
    }
  }
}

TEST_CASE("convolution accepts complex samples", "[kernel][convolution]") {
  const TimeGrid g(0.1, 10);
  std::vector<Complex> u(g.size(), Complex(1.0, -2.0));
  const auto out = convolve_kernel(0.5, u, g);
  CHECK_THAT(out.back().real(), WithinRel(g_kernel(1.5, 1.0), 1e-13));
  CHECK_THAT(out.back().imag(), WithinRel(-2.0 * g_kernel(1.5, 1.0), 1e-13));
}

TEST_CASE("convolution rejects mismatched lengths", "[kernel][convolution]") {
  const TimeGrid g(0.1, 10);
  const std::vector<Real> u(5, 1.0);
  CHECK_THROWS_AS(convolve_kernel(0.5, u, g), ShapeError);
}

TEST_CASE("g_0.5 * g_0.5 = g_1 with singular samples", "[kernel][semigroup]") {
  // The sample at t = 0 is infinite; the interpolant uses 0 there, which costs O(sqrt(dt)).
  Real prev_err = 0.0;
  for (std::size_t n : {2000u, 8000u}) {
    const TimeGrid g(1.0 / static_cast<Real>(n), n);
    auto u = sample(g, [](Real t) { return g_kernel(0.5, t); });
    u[0] = 0.0;
    const Real err = std::abs(convolve_kernel(0.5, u, g).back() - 1.0);
    CHECK(err < 2e-2);
    if (prev_err > 0.0) CHECK(std::log2(prev_err / err) / 2.0 > 0.45);  // rate in dt
    prev_err = err;
  }
}

TEST_CASE("kernel semigroup law g_b * g_{1+c} = g_{1+b+c}", "[kernel][semigroup]") {
  // Data g_{1+c} has a t^c cusp at the origin: the error at t = 1 is O(dt^{1+c}) and
  // the error over the whole grid, dominated by the first steps, is O(dt^{b+c}).
  for (Real beta : {0.3, 0.5, 0.7}) {
    for (Real c : {0.3, 0.5, 0.7}) {
      Real end_err[2], max_err[2];
      for (int i = 0; i < 2; ++i) {
        const std::size_t n = i == 0 ? 200 : 400;
        const TimeGrid g(1.0 / static_cast<Real>(n), n);
        const auto u = sample(g, [c](Real t) { return g_kernel(1.0 + c, t); });
        const auto out = convolve_kernel(beta, u, g);
        Real e = 0.0;
        for (std::size_t k = 1; k < out.size(); ++k) {
          e = std::max(e, std::abs(out[k] - g_kernel(1.0 + beta + c, g[k])));
        }
        max_err[i] = e;
        end_err[i] = std::abs(out.back() - g_kernel(1.0 + beta + c, 1.0));
      }
      INFO("beta=" << beta << " c=" << c << " end " << end_err[0] << " " << end_err[1] << " max " << max_err[0]
                   << " " << max_err[1]);
      CHECK(end_err[1] < 2e-4);
      CHECK(std::log2(end_err[0] / end_err[1]) > 1.0 + c - 0.1);
      CHECK(std::log2(max_err[0] / max_err[1]) > beta + c - 0.1);
    }
  }
}

TEST_CASE("product-trapezoid weights for large indices stay accurate", "[kernel][convolution]") {
  // Direct formula in long double as reference.
  const Real p = 1.5;
  for (std::size_t k : {10u, 50u, 1000u, 100000u}) {
    const long double kl = static_cast<long double>(k);
    const long double ref = std::pow(kl + 1, 1.5L) - 2 * std::pow(kl, 1.5L) + std::pow(kl - 1, 1.5L);
    CHECK_THAT(detail::second_difference_power(p, k), WithinRel(static_cast<Real>(ref), 1e-9));
  }
}

TEST_CASE("L1 weights: leading coefficient and zero sum", "[kernel][l1]") {
  const auto w1 = l1_weights(0.5, 1, 1.0);
  CHECK_THAT(w1[1], WithinRel(2.0 / kSqrtPi, 1e-14));
  CHECK_THAT(w1[1], WithinAbs(1.1283792, 5e-8));
  for (Real alpha : {0.1, 0.5, 0.9}) {
    for (std::size_t n : {1u, 2u, 7u, 100u}) {
      for (Real dt : {0.01, 1.0}) {
        const auto w = l1_weights(alpha, n, dt);
        const Real scale = std::abs(w[n]);
        CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0)) <= 1e-13 * scale * static_cast<Real>(n));
      }
    }
  }
  CHECK_THROWS_AS(l1_weights(1.0, 3, 0.1), ParameterError);
  CHECK_THROWS_AS(l1_weights(0.0, 3, 0.1), ParameterError);
  CHECK_THROWS_AS(l1_weights(0.5, 3, 0.0), ParameterError);
}

TEST_CASE("L1 coefficients decrease", "[kernel][l1]") {
  for (Real alpha : {0.1, 0.5, 0.9}) {
    const auto b = l1_coefficients(alpha, 5000);
    CHECK(b[0] == 1.0);
    for (std::size_t k = 1; k < b.size(); ++k) CHECK(b[k] < b[k - 1]);
  }
}

TEST_CASE("L1 derivative of u = t at t = 1", "[kernel][l1]") {
  const TimeGrid g(1.0, 1);
  const std::vector<Real> u{0.0, 1.0};
  CHECK_THAT(caputo_l1(u, 0.5, g)[1], WithinRel(2.0 / kSqrtPi, 1e-14));
  const auto w = l1_weights(0.5, 1, 1.0);
  CHECK_THAT(w[0] * u[0] + w[1] * u[1], WithinRel(2.0 / kSqrtPi, 1e-14));
}

TEST_CASE("L1 is exact on piecewise-linear data", "[kernel][l1]") {
  // Caputo derivative of the interpolant of a hat-shaped path, computed piece by piece:
  // D^a u(t) = sum_j s_j [ (t - t_{j-1})^{1-a} - (t - t_j)_+^{1-a} ] / Gamma(2 - a).
  const Real alpha = 0.35;
  const TimeGrid g(0.25, 12);
  std::vector<Real> u(g.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::sin(1.7 * static_cast<Real>(k)) + 0.1 * static_cast<Real>(k);
  const auto d = caputo_l1(u, alpha, g);
  for (std::size_t n = 1; n < u.size(); ++n) {
    long double exact = 0.0L;
    for (std::size_t j = 1; j <= n; ++j) {
      const long double slope = (u[j] - u[j - 1]) / g.dt();
      const long double a = std::pow(static_cast<long double>(g[n] - g[j - 1]), 1.0L - alpha);
      const long double b = std::pow(static_cast<long double>(g[n] - g[j]), 1.0L - alpha);
      exact += slope * (a - b);
    }
    exact /= std::tgamma(2.0L - alpha);
    CHECK_THAT(d[n], WithinAbs(static_cast<Real>(exact), 1e-13));
  }
}

TEST_CASE("tempered derivative of a constant vanishes", "[kernel][tempered]") {
  const TimeGrid g(0.1, 30);
  const std::vector<Real> u(g.size(), 4.2);
  for (Real v : tempered_derivative(u, FractionalParams(0.6, 2.0), g)) CHECK(v == 0.0);
}

TEST_CASE("tempered derivative with eta = 0 is the L1 derivative bit for bit", "[kernel][tempered]") {
  const TimeGrid g(0.01, 300);
  const auto u = sample(g, [](Real t) { return std::exp(-t) * std::cos(3.0 * t); });
  for (Real alpha : {0.2, 0.5, 0.8}) {
    const auto a = tempered_derivative(u, FractionalParams(alpha, 0.0), g);
    const auto b = caputo_l1(u, alpha, g);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
}

TEST_CASE("tempered derivative of u = t, eta = 0, converges to 1/Gamma(1.5)", "[kernel][tempered]") {
  const TimeGrid g(1e-3, 1000);
  const auto u = sample(g, [](Real t) { return t; });
  CHECK_THAT(tempered_derivative(u, FractionalParams(0.5, 0.0), g).back(), WithinRel(2.0 / kSqrtPi, 1e-12));
}

TEST_CASE("tempered derivative of u = t, eta = 1, against closed form and quadrature", "[kernel][tempered]") {
  // Exact value: lower incomplete gamma(1/2, 1)/Gamma(1/2) = erf(1).
  constexpr Real kErf1 = 0.84270079294971486934;
  const Real alpha = 0.5, eta = 1.0;
  const TimeGrid g(1e-3, 1000);
  const auto u = sample(g, [](Real t) { return t; });
  const Real got = tempered_derivative(u, FractionalParams(alpha, eta), g).back();
  CHECK_THAT(got, WithinAbs(kErf1, 1e-5));

  // Independent oracle: e^{-eta t} D^a(e^{eta s} s)(t) - eta/Gamma(1-a) int (t-s)^{-a} e^{-eta(t-s)} s ds,
  // each integral evaluated with s = t - r^2 to remove the singularity.
  const Real t = 1.0;
  auto singular_integral = [&](auto f) {
    auto h = [&](Real r) { return 2.0 * f(t - r * r); };
    return quad::integrate(h, 0.0, std::sqrt(t), 1e-15, 1e-14).value;
  };
  const Real caputo = singular_integral([&](Real s) { return std::exp(eta * s) * (1.0 + eta * s); }) / kSqrtPi;
  const Real memory = singular_integral([&](Real s) { return std::exp(-eta * (t - s)) * s; }) / kSqrtPi;
  const Real oracle = std::exp(-eta * t) * caputo - eta * memory;
  CHECK_THAT(oracle, WithinAbs(kErf1, 1e-13));
  CHECK_THAT(got, WithinAbs(oracle, 1e-5));

  // The midpoint factor on the singular last subinterval limits the order to 2 - alpha.
  const TimeGrid g2(5e-4, 2000);
  const auto u2 = sample(g2, [](Real s) { return s; });
  const Real got2 = tempered_derivative(u2, FractionalParams(alpha, eta), g2).back();
  CHECK(std::log2(std::abs(got - kErf1) / std::abs(got2 - kErf1)) > 2.0 - alpha - 0.1);
}

TEST_CASE("derivative needs two samples", "[kernel][tempered]") {
  const TimeGrid g(0.1, 1);
  const std::vector<Real> one{1.0};
  CHECK_THROWS_AS(caputo_l1(one, 0.5, g), InsufficientDataError);
  CHECK_THROWS_AS(tempered_derivative(one, FractionalParams(0.5, 1.0), g), InsufficientDataError);
}

TEST_CASE("parameter validation", "[kernel][params]") {
  CHECK_THROWS_AS(FractionalParams(0.0), ParameterError);
  CHECK_THROWS_AS(FractionalParams(1.0), ParameterError);
  CHECK_THROWS_AS(FractionalParams(0.5, -0.1), ParameterError);
  CHECK_THROWS_AS(TimeGrid(0.0, 10), ParameterError);
  CHECK_THROWS_AS(TimeGrid(0.1, 0), ParameterError);
  const TimeGrid g(0.25, 8);
  CHECK(g.size() == 9);
  CHECK(g[0] == 0.0);
  CHECK(g.horizon() == 2.0);
}

TEST_CASE("starting exponents", "[kernel][starting]") {
  const auto e = starting_exponents(0.3);
  REQUIRE(e.size() == 4);
  CHECK(e[0] == 0.3);
  CHECK(e[2] == Catch::Approx(0.9));
  CHECK(e.back() == 1.0);
  CHECK(starting_exponents(0.5).size() == 2);
  CHECK(starting_exponents(0.05).size() == 6);
  CHECK(starting_exponents(0.5, 1) == std::vector<Real>{1.0});
}

TEST_CASE("corrected L1 derivative is exact on start-up powers", "[kernel][starting]") {
  for (Real alpha : {0.3, 0.5, 0.8}) {
    const std::size_t N = 200;
    const Real dt = 0.01;
    const TimeGrid grid(dt, N);
    const auto W = l1_starting_weights(alpha, N);
    const auto ex = starting_exponents(alpha);
    REQUIRE(static_cast<std::size_t>(W.cols()) == ex.size());
    for (Real g : ex) {
      std::vector<Real> u(N + 1);
      for (std::size_t k = 0; k <= N; ++k) u[k] = std::pow(grid[k], g);
      const auto d = caputo_l1(u, alpha, grid);
      const Real c = l1_leading_weight(alpha, dt);
      for (std::size_t n : {1u, 2u, 7u, 50u, 200u}) {
        Real corr = 0.0;
        for (Eigen::Index j = 0; j < W.cols(); ++j) corr += W(static_cast<Eigen::Index>(n), j) * (u[j + 1] - u[0]);
        const Real exact = std::tgamma(g + 1.0) / std::tgamma(g + 1.0 - alpha) * std::pow(grid[n], g - alpha);
        INFO("alpha = " << alpha << ", gamma = " << g << ", n = " << n);
        CHECK_THAT(d[n] + c * corr, WithinRel(exact, 1e-10));
      }
    }
  }
}

TEST_CASE("corrected product trapezoid is exact on start-up powers", "[kernel][starting]") {
  for (Real beta : {0.3, 0.5, 0.8}) {
    const std::size_t N = 200;
    const Real dt = 0.02;
    const TimeGrid grid(dt, N);
    const auto W = trapezoid_starting_weights(beta, N);
    const auto w = product_trapezoid_weights(beta, dt, N);
    for (Real g : starting_exponents(beta)) {
      std::vector<Real> f(N + 1);
      for (std::size_t k = 0; k <= N; ++k) f[k] = std::pow(grid[k], g);
      const auto q = convolve_kernel(beta, f, grid);
      for (std::size_t n : {1u, 3u, 40u, 200u}) {
        Real corr = 0.0;
        for (Eigen::Index j = 0; j < W.cols(); ++j) corr += W(static_cast<Eigen::Index>(n), j) * (f[j + 1] - f[0]);
        const Real exact = std::tgamma(g + 1.0) / std::tgamma(g + 1.0 + beta) * std::pow(grid[n], g + beta);
        INFO("beta = " << beta << ", gamma = " << g << ", n = " << n);
        CHECK_THAT(q[n] + w.scale * corr, WithinRel(exact, 1e-10));
      }
    }
  }
}
