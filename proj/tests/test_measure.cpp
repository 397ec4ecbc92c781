#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "netcausal/measure.hpp"
#include "oracles.hpp"

using netcausal::BaseMeasure;
using netcausal::TiltParams;

TEST_CASE("rademacher closed forms") {
  auto mu = BaseMeasure::rademacher();
  // alpha(l1, l2) = l2/2 + log cosh l1; derivatives tanh and sech^2
  for (double l1 : {-3.0, -0.7, 0.0, 0.2, 1.0, 4.5}) {
    for (double l2 : {0.0, 0.5, 2.0}) {
      CHECK(mu.alpha({l1, l2}) ==
            doctest::Approx(0.5 * l2 + std::log(std::cosh(l1))).epsilon(1e-12));
      CHECK(mu.alpha_prime({l1, l2}) == doctest::Approx(std::tanh(l1)).epsilon(1e-12));
      double sech2 = 1.0 - std::tanh(l1) * std::tanh(l1);
      CHECK(mu.alpha_second({l1, l2}) == doctest::Approx(sech2).epsilon(1e-12));
    }
  }
  CHECK(mu.alpha({0.0, 0.0}) == 0.0);
  CHECK(mu.alpha_prime({0.0, 0.0}) == 0.0);
  CHECK(mu.alpha_second({0.0, 0.0}) == 1.0);
  CHECK(mu.symmetric());
}

TEST_CASE("uniform quadrature matches high-resolution oracle") {
  auto mu = BaseMeasure::uniform(64);
  auto fine = BaseMeasure::uniform(640);
  // log of the mean of exp(x^2/ ...) style integrals: spectral accuracy means
  // 64 and 640 nodes agree far below 1e-12
  for (auto lam : {TiltParams{0.0, 2.0}, TiltParams{1.0, 0.0},
                   TiltParams{-2.5, 1.5}, TiltParams{4.0, 3.0}}) {
    CHECK(mu.alpha(lam) == doctest::Approx(fine.alpha(lam)).epsilon(1e-13));
    CHECK(mu.alpha_prime(lam) == doctest::Approx(fine.alpha_prime(lam)).epsilon(1e-13));
    CHECK(mu.alpha_second(lam) == doctest::Approx(fine.alpha_second(lam)).epsilon(1e-13));
  }
  // untilted uniform: mean 0, variance 1/3
  CHECK(mu.alpha({0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(mu.alpha_prime({0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(mu.alpha_second({0.0, 0.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(mu.symmetric());
}

TEST_CASE("derivatives match finite differences on random tilts") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u1(-5.0, 5.0), u2(0.0, 4.0);
  for (const auto& mu : {BaseMeasure::rademacher(), BaseMeasure::uniform(64),
                         BaseMeasure::discrete({-1.0, -0.25, 0.5, 0.9},
                                               {0.1, 0.4, 0.3, 0.2})}) {
    for (int k = 0; k < 100; ++k) {
      double l1 = u1(rng), l2 = u2(rng);
      auto along_l1 = [&](double v) { return mu.alpha({v, l2}); };
      double fd1 = oracles::fdiff(along_l1, l1);
      double fd2 = oracles::fdiff2(along_l1, l1);
      CHECK(mu.alpha_prime({l1, l2}) == doctest::Approx(fd1).epsilon(1e-6));
      CHECK(mu.alpha_second({l1, l2}) ==
            doctest::Approx(fd2).epsilon(1e-5).scale(1.0));
      // d alpha / d l2 = (second moment)/2 of the tilted law; check via the
      // identity var + mean^2 = 2 * d alpha/d l2
      auto along_l2 = [&](double v) { return mu.alpha({l1, v}); };
      double m = mu.alpha_prime({l1, l2});
      double v = mu.alpha_second({l1, l2});
      CHECK(2.0 * oracles::fdiff(along_l2, l2) ==
            doctest::Approx(v + m * m).epsilon(1e-5));
    }
  }
}

TEST_CASE("range invariants over the tilt grid") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u1(-5.0, 5.0), u2(0.0, 4.0);
  for (const auto& mu : {BaseMeasure::rademacher(), BaseMeasure::uniform(64)}) {
    for (int k = 0; k < 200; ++k) {
      TiltParams lam{u1(rng), u2(rng)};
      double m = mu.alpha_prime(lam);
      double v = mu.alpha_second(lam);
      CHECK(m >= -1.0);
      CHECK(m <= 1.0);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("large tilts do not overflow") {
  auto rad = BaseMeasure::rademacher();
  CHECK(std::isfinite(rad.alpha({700.0, 0.0})));
  CHECK(rad.alpha_prime({700.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(rad.alpha({-700.0, 4.0})));
  CHECK(rad.alpha_prime({-700.0, 4.0}) == doctest::Approx(-1.0).epsilon(1e-12));
  auto uni = BaseMeasure::uniform(64);
  // tilted continuous uniform has mean coth(l) - 1/l ~= 1 - 1/l
  CHECK(std::isfinite(uni.alpha({700.0, 0.0})));
  CHECK(uni.alpha_prime({700.0, 0.0}) ==
        doctest::Approx(1.0 - 1.0 / 700.0).epsilon(1e-6));
  CHECK(std::isfinite(uni.alpha({-700.0, 4.0})));
  CHECK(uni.alpha_prime({-700.0, 4.0}) < -0.99);
}

TEST_CASE("alpha_prime is monotone in lambda1") {
  for (const auto& mu : {BaseMeasure::rademacher(), BaseMeasure::uniform(64),
                         BaseMeasure::discrete({-0.9, 0.1, 0.8},
                                               {0.3, 0.3, 0.4})}) {
    double prev = -2.0;
    for (double l1 = -6.0; l1 <= 6.0; l1 += 0.25) {
      double m = mu.alpha_prime({l1, 1.0});
      CHECK(m >= prev);
      prev = m;
    }
  }
}

TEST_CASE("tilted sampling matches tilted moments") {
  std::mt19937_64 rng(13);
  auto mu = BaseMeasure::discrete({-1.0, 0.0, 1.0}, {0.25, 0.5, 0.25});
  TiltParams lam{0.8, 1.2};
  const int n = 400000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = mu.sample_tilted(lam, rng);
    s += x;
    s2 += x * x;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  // 5 sigma bands on the Monte Carlo error
  double se_mean = std::sqrt(var / n);
  CHECK(std::abs(mean - mu.alpha_prime(lam)) < 5.0 * se_mean);
  CHECK(std::abs(var - mu.alpha_second(lam)) < 5e-3);
}

TEST_CASE("sampling is deterministic given the engine state") {
  auto mu = BaseMeasure::uniform(16);
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    double xa = mu.sample_tilted({0.3, 0.7}, a);
    double xb = mu.sample_tilted({0.3, 0.7}, b);
    CHECK(xa == xb);
  }
}

TEST_CASE("validation rejects bad measures and tilts") {
  CHECK_THROWS_AS(BaseMeasure::discrete({-1.5, 1.0}, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BaseMeasure::discrete({-1.0, 1.0}, {0.6, 0.6}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BaseMeasure::discrete({-1.0, 1.0}, {1.2, -0.2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BaseMeasure::discrete({0.5, 0.5}, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BaseMeasure::discrete({0.5}, {1.0}), std::invalid_argument);
  auto mu = BaseMeasure::rademacher();
  CHECK_THROWS_AS(mu.alpha({0.0, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(BaseMeasure::preset("cauchy"), std::invalid_argument);
}

TEST_CASE("json round trip") {
  auto mu = BaseMeasure::discrete({-1.0, 0.25, 1.0}, {0.2, 0.5, 0.3});
  auto back = BaseMeasure::from_json(mu.to_json());
  REQUIRE(back.size() == mu.size());
  for (int i = 0; i < mu.size(); ++i) {
    CHECK(back.locations()[i] == mu.locations()[i]);
    CHECK(back.weights()[i] == mu.weights()[i]);
  }
  CHECK(back.kind() == BaseMeasure::Kind::discrete);
  auto rad = BaseMeasure::from_json("\"rademacher\"");
  CHECK(rad.size() == 2);
  // uniform preset round-trips through quadrature kind
  auto uni = BaseMeasure::from_json(BaseMeasure::uniform(8).to_json());
  CHECK(uni.kind() == BaseMeasure::Kind::quadrature);
  CHECK(uni.alpha({1.0, 0.5}) ==
        doctest::Approx(BaseMeasure::uniform(8).alpha({1.0, 0.5})).epsilon(1e-15));
}

TEST_CASE("vectorized evaluation equals scalar evaluation") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& mu : {BaseMeasure::rademacher(), BaseMeasure::uniform(32)}) {
    Eigen::VectorXd lam(40);
    for (int i = 0; i < lam.size(); ++i) lam[i] = u(rng);
    Eigen::VectorXd mp = mu.alpha_prime(lam, 0.8);
    Eigen::VectorXd ms = mu.alpha_second(lam, 0.8);
    for (int i = 0; i < lam.size(); ++i) {
      CHECK(mp[i] == doctest::Approx(mu.alpha_prime({lam[i], 0.8})).epsilon(1e-15));
      CHECK(ms[i] == doctest::Approx(mu.alpha_second({lam[i], 0.8})).epsilon(1e-15));
    }
  }
}
