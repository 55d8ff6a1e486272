#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "camp/output_channel.hpp"

using namespace camp;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_CASE("product_eh worked examples") {
  const auto a = product_eh(row({1.0}), row({0.5}), row({0.5}), scalar(1.0), scalar(0.0), 0.0);
  CHECK(a.e(0, 0) == doctest::Approx(1.0));
  CHECK(a.h(0, 0) == doctest::Approx(2.0));

  const auto b = product_eh(row({2.0}), row({1.0}), row({1.0}), scalar(0.5), scalar(0.25), 1.0);
  // s = 2: e = (1 - 1) / 2, h = 1/2 - 0.25 * 4 / 4
  CHECK(b.e(0, 0) == doctest::Approx(0.0));
  CHECK(b.h(0, 0) == doctest::Approx(0.25));

  CHECK_THROWS_AS(product_eh(row({1.0}), row({0.0}), row({-1.0}), scalar(1.0), scalar(0.0), 0.5),
                  ChannelError);
  CHECK_THROWS_AS(product_eh(row({1.0}), row({0.0}), row({0.0}), scalar(1.0), scalar(0.0), 0.0),
                  ChannelError);
}

TEST_CASE("gain_CT worked examples") {
  const auto one = gain_CT(row({2.0}), row({3.0}), row({1.0}), 0.0);
  CHECK(one.C2(0) == doctest::Approx(0.25));
  CHECK(one.T(0) == doctest::Approx(1.5));

  const auto two = gain_CT(row({1.0, 1.0}), row({1.0, 3.0}), row({1.0, 1.0}), 0.0);
  CHECK(two.C2(0) == doctest::Approx(0.5));
  CHECK(two.T(0) == doctest::Approx(2.0));

  // Noiseless, omega = y d exactly: T recovers d.
  const auto exact = gain_CT(row({0.3, -1.2, 2.0}), row({0.3 * 1.1, -1.2 * 1.1, 2.0 * 1.1}),
                             row({0.1, 0.2, 0.3}), 0.0);
  CHECK(exact.T(0) == doctest::Approx(1.1).epsilon(1e-14));

  CHECK_THROWS_AS(gain_CT(row({0.0, 0.0}), row({1.0, 1.0}), row({1.0, 1.0}), 0.0),
                  UninformativeSensor);
  CHECK_THROWS_AS(gain_CT(row({1.0}), row({1.0}), row({-2.0}), 1.0), ChannelError);
}

TEST_CASE("gain_CT agrees with an extended-precision reference") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.01, 2.0);
  const Eigen::Index M = 50, P = 3;
  Matrix Y(M, P), omega(M, P), V(M, P);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index n = 0; n < P; ++n) {
      Y(i, n) = z(rng);
      omega(i, n) = z(rng);
      V(i, n) = u(rng);
    }
  const double delta = 1e-3;
  const auto got = gain_CT(Y, omega, V, delta);
  for (Eigen::Index i = 0; i < M; ++i) {
    long double prec = 0, field = 0;
    for (Eigen::Index n = 0; n < P; ++n) {
      const long double s = static_cast<long double>(V(i, n)) + delta;
      prec += static_cast<long double>(Y(i, n)) * Y(i, n) / s;
      field += static_cast<long double>(Y(i, n)) * omega(i, n) / s;
    }
    CHECK(got.C2(i) == doctest::Approx(static_cast<double>(1 / prec)).epsilon(1e-14));
    CHECK(got.T(i) == doctest::Approx(static_cast<double>(field / prec)).epsilon(1e-13));
  }
}

TEST_CASE("ProductChannel forwards to the closed forms") {
  const ProductChannel ch;
  const OutputChannel& base = ch;
  const Matrix Y = row({1.0, -0.5}), omega = row({0.2, 0.1}), V = row({0.3, 0.4});
  const auto m = base.messages(Y, omega, V, scalar(1.1), scalar(0.01), 1e-4);
  const auto ref = product_eh(Y, omega, V, scalar(1.1), scalar(0.01), 1e-4);
  CHECK(m.e == ref.e);
  CHECK(m.h == ref.h);
  const auto f = base.gain_field(Y, omega, V, 1e-4);
  CHECK(f.T == gain_CT(Y, omega, V, 1e-4).T);
}

TEST_CASE("numeric_G with a point mass at one") {
  const UniformGainPrior unit{1.0, 0.0};
  const std::vector<double> y{1.0, 2.0}, omega{0.5, 1.0}, V{0.5, 2.0};
  // -(0.5^2)/(2*0.5) - (1^2)/(2*2) = -0.25 - 0.25
  CHECK(numeric_G(y, omega, V, 0.0, unit, 0.0, 64) == doctest::Approx(-0.5).epsilon(1e-14));
  // theta shifts G by theta * d = theta
  CHECK(numeric_G(y, omega, V, 0.3, unit, 0.0, 64) == doctest::Approx(-0.2).epsilon(1e-14));
  const std::vector<double> short_row{1.0};
  CHECK_THROWS_AS(numeric_G(short_row, omega, V, 0.0, unit, 0.0, 64), ChannelError);
}

TEST_CASE("closed-form messages are derivatives of numeric_G") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> uv(0.05, 0.5);
  std::uniform_real_distribution<double> ud(0.9, 1.1);
  const UniformGainPrior prior{1.0, 0.01};
  const double delta = 1e-3;
  const int nodes = 2000;

  for (int trial = 0; trial < 20; ++trial) {
    const int P = 1 + trial % 3;
    std::vector<double> y(P), omega(P), V(P);
    const double d = ud(rng);
    for (int n = 0; n < P; ++n) {
      y[n] = z(rng);
      V[n] = uv(rng);
      omega[n] = y[n] * d + 0.3 * z(rng);
    }
    const Eigen::Map<const Matrix> Y(y.data(), 1, P), Om(omega.data(), 1, P), Vm(V.data(), 1, P);
    const auto field = gain_CT(Y, Om, Vm, delta);
    const auto g = gain_posterior_moments(prior, P, field.C2(0), field.T(0));
    const auto msg = product_eh(Y, Om, Vm, scalar(g.k), scalar(g.l), delta);

    const auto G = [&](double theta, const std::vector<double>& w) {
      return numeric_G(y, w, V, theta, prior, delta, nodes);
    };
    const double ht = 1e-3;
    const double g0 = G(0.0, omega);
    const double dk = (G(ht, omega) - G(-ht, omega)) / (2 * ht);
    const double dl = (G(ht, omega) - 2 * g0 + G(-ht, omega)) / (ht * ht);
    CAPTURE(trial);
    CHECK(std::abs(dk - g.k) <= 1e-6);
    CHECK(std::abs(dl - g.l) <= 1e-5);

    for (int n = 0; n < P; ++n) {
      const double hw = 1e-4;
      auto plus = omega, minus = omega;
      plus[n] += hw;
      minus[n] -= hw;
      const double gp = G(0.0, plus), gm = G(0.0, minus);
      const double de = (gp - gm) / (2 * hw);
      const double dh = -(gp - 2 * g0 + gm) / (hw * hw);
      CHECK(std::abs(de - msg.e(0, n)) <= 1e-6);
      CHECK(std::abs(dh - msg.h(0, n)) <= 1e-4);
    }
  }
}
