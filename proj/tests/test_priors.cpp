#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>
#include <numbers>

#include "camp/priors.hpp"

using namespace camp;

namespace {

// Reference values computed offline with 40-digit arithmetic.
constexpr double kSignalMeanRef = 0.14629321062208455636;
constexpr double kSignalVarRef = 0.14927370891831438875;
constexpr double kGainMeanRef = 1.0443590077905975841;
constexpr double kGainVarRef = 0.0058488132019827360052;

// Midpoint rule on the prior support of M_D, independent of the library.
GainMoments riemann_gain_moments(const UniformGainPrior& prior, int P, double C2, double T,
                                 int n) {
  const double lo = prior.lower(), hi = prior.upper();
  const double h = (hi - lo) / n;
  double log_max = -INFINITY;
  std::vector<double> logw(n);
  for (int i = 0; i < n; ++i) {
    const double d = lo + (i + 0.5) * h;
    logw[i] = P * std::log(std::abs(d)) - (d - T) * (d - T) / (2 * C2);
    log_max = std::max(log_max, logw[i]);
  }
  double z = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double d = lo + (i + 0.5) * h;
    const double w = std::exp(logw[i] - log_max);
    z += w;
    m1 += w * d;
    m2 += w * d * d;
  }
  const double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

}  // namespace

TEST_CASE("signal moments: pure Gaussian prior is conjugate") {
  const GaussBernoulliPrior g{1.0, 0.0, 1.0};
  const auto p = signal_posterior_moments(g, 1.0, 2.0);
  CHECK(p.mean == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.variance == doctest::Approx(0.5).epsilon(1e-14));

  const auto sparse = signal_posterior_moments({0.3, 0.0, 1.0}, 0.7, 0.0);
  CHECK(std::abs(sparse.mean) < 1e-15);
}

TEST_CASE("signal moments match the high-precision reference") {
  const auto p = signal_posterior_moments({0.2, 0.0, 1.0}, 0.5, 1.0);
  CHECK(std::abs(p.mean - kSignalMeanRef) < 1e-13);
  CHECK(std::abs(p.variance - kSignalVarRef) < 1e-13);
}

TEST_CASE("quadrature oracle on textbook measures") {
  const auto gauss = quadrature_oracle([](double x) { return -0.5 * x * x; }, {-10.0, 10.0}, 100001);
  CHECK(std::abs(gauss.mean) < 1e-8);
  CHECK(std::abs(gauss.variance - 1.0) < 1e-6);
  CHECK(gauss.log_normalizer == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-8));

  const auto flat = quadrature_oracle([](double) { return 0.0; }, {2.0, 4.0}, 10001);
  CHECK(std::abs(flat.mean - 3.0) < 1e-10);
  CHECK(std::abs(flat.variance - 1.0 / 3.0) < 1e-6);

  const auto line = quadrature_oracle([](double x) { return -0.5 * (x - 1.0) * (x - 1.0) / 4.0; },
                                      Interval{}, 200001);
  CHECK(std::abs(line.mean - 1.0) < 1e-6);
  CHECK(std::abs(line.variance - 4.0) < 1e-5);

  CHECK_THROWS_AS(quadrature_oracle([](double) { return -INFINITY; }, {0.0, 1.0}, 101),
                  DegenerateMeasure);
}

TEST_CASE("signal moments agree with the oracle over a grid") {
  // 20 x 20 grid, sigma2 log-spaced on [1e-4, 10], R uniform on [-5, 5].
  // Spike at zero as an atom, slab integrated around its posterior peak.
  double worst = 0.0;
  for (double rho : {0.1, 0.5, 1.0})
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        const double sigma2 = std::pow(10.0, -4.0 + 5.0 * i / 19.0);
        const double R = -5.0 + 10.0 * j / 19.0;
        const double c = R / (1 + sigma2), w = 14.0 * std::sqrt(sigma2 / (1 + sigma2));
        const auto logw = [&](double x) {
          return std::log(rho) - 0.5 * std::log(2 * std::numbers::pi) - 0.5 * x * x -
                 (x - R) * (x - R) / (2 * sigma2);
        };
        const Atom spike{0.0, std::log1p(-rho) - R * R / (2 * sigma2)};
        const auto ref = quadrature_oracle(logw, {c - w, c + w}, 4001, std::span(&spike, 1));
        const auto got = signal_posterior_moments({rho, 0.0, 1.0}, sigma2, R);
        worst = std::max({worst, std::abs(got.mean - ref.mean), std::abs(got.variance - ref.variance)});
      }
  CHECK(worst <= 1e-8);
}

TEST_CASE("signal moments: bounds and monotone shrinkage") {
  const GaussBernoulliPrior prior{0.2, 0.0, 1.0};
  double prev = -INFINITY;
  for (double R = -5.0; R <= 5.0; R += 0.05) {
    const auto p = signal_posterior_moments(prior, 0.3, R);
    CHECK(p.variance >= 0.0);
    CHECK(p.variance <= std::max(0.3, prior.variance));
    CHECK(std::abs(p.mean) <= std::abs(R) + 1e-12);
    CHECK(p.mean >= prev);
    prev = p.mean;
  }
  for (double sigma2 : {1e-3, 0.5, 4.0}) {
    const auto p0 = signal_posterior_moments({1.0, 0.0, 1.0}, sigma2, 0.0);
    const auto p1 = signal_posterior_moments({1.0, 0.0, 1.0}, sigma2, 1.0);
    const auto p3 = signal_posterior_moments({1.0, 0.0, 1.0}, sigma2, 3.0);
    const double slope = p1.mean - p0.mean;
    CHECK(slope > 0.0);
    CHECK(slope < 1.0);
    CHECK(p3.mean - p0.mean == doctest::Approx(3 * slope).epsilon(1e-12));
  }
  // Weak field returns the prior moments.
  const auto weak = signal_posterior_moments(prior, 1e12, 0.3);
  CHECK(weak.mean == doctest::Approx(prior.mixture_mean()).epsilon(1e-6));
  CHECK(weak.variance == doctest::Approx(prior.mixture_variance()).epsilon(1e-6));

  CHECK_THROWS_AS(signal_posterior_moments(prior, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(signal_posterior_moments(prior, -1.0, 1.0), ConfigError);
}

TEST_CASE("gain moments: special cases") {
  const auto pm = gain_posterior_moments({1.0, 0.0}, 3, 0.2, 0.7);
  CHECK(pm.k == 1.0);
  CHECK(pm.l == 0.0);

  const UniformGainPrior prior{1.0, 0.01};
  const auto sharp = gain_posterior_moments(prior, 2, 1e-12, 1.0);
  CHECK(std::abs(sharp.k - 1.0) < 1e-6);
  CHECK(sharp.l < 1e-10);

  const auto flat = gain_posterior_moments(prior, 0, 1e12, 1.0);
  CHECK(std::abs(flat.k - 1.0) < 1e-6);
  CHECK(std::abs(flat.l - 0.01) < 1e-6);

  // Field far outside the support piles the mass on the nearest edge.
  const auto edge = gain_posterior_moments(prior, 2, 1e-6, 3.0);
  CHECK(edge.k <= prior.upper());
  CHECK(edge.k > prior.upper() - 1e-4);

  CHECK_THROWS_AS(gain_posterior_moments(prior, 2, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(gain_posterior_moments(prior, -1, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(gain_posterior_moments({1.0, 0.5}, 2, 0.1, 1.0), ConfigError);
}

TEST_CASE("gain moments match the high-precision reference and a Riemann sum") {
  const UniformGainPrior prior{1.0, 0.01};
  const auto g = gain_posterior_moments(prior, 2, 0.01, 1.05);
  CHECK(std::abs(g.k - kGainMeanRef) < 1e-10);
  CHECK(std::abs(g.l - kGainVarRef) < 1e-10);

  for (int P : {1, 2, 5})
    for (double C2 : {1e-4, 1e-2, 1.0})
      for (double T : {0.8, 1.0, 1.12}) {
        const auto got = gain_posterior_moments(prior, P, C2, T);
        const auto ref = riemann_gain_moments(prior, P, C2, T, 1000000);
        CAPTURE(P);
        CAPTURE(C2);
        CAPTURE(T);
        CHECK(std::abs(got.k - ref.k) <= 1e-8);
        CHECK(std::abs(got.l - ref.l) <= 1e-8);
      }
}

TEST_CASE("gain moments resolve peaks much narrower than the support") {
  const UniformGainPrior prior{1.0, 0.01};
  for (double C2 : {1e-8, 1e-10, 1e-12}) {
    const auto g = gain_posterior_moments(prior, 3, C2, 1.0123);
    const auto ref = riemann_gain_moments(prior, 3, C2, 1.0123, 2000000);
    CAPTURE(C2);
    CHECK(std::abs(g.k - ref.k) <= 1e-8);
    CHECK(std::abs(g.l - ref.l) <= 1e-3 * ref.l);
  }
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  const auto rule = gauss_legendre(16);
  REQUIRE(rule.nodes.size() == 16);
  double w = 0, x2 = 0, x30 = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    w += rule.weights[i];
    x2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    x30 += rule.weights[i] * std::pow(rule.nodes[i], 30);
  }
  CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(x30 == doctest::Approx(2.0 / 31.0).epsilon(1e-12));
}
