#include "doctest.h"

#include "pdecay/errors.hpp"
#include "pdecay/state_space.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace pdecay;

namespace {

SpacePtr uniform_space(int n) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  return std::make_shared<const ProbabilitySpace>(x, Eigen::VectorXd::Constant(n, 1.0 / n),
                                                  SpaceKind::grid);
}

SpacePtr weighted_space(std::vector<double> w) {
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  return std::make_shared<const ProbabilitySpace>(x, Eigen::Map<Eigen::VectorXd>(w.data(), n),
                                                  SpaceKind::grid);
}

Observable obs(const SpacePtr& s, std::vector<double> v) {
  return Observable(s, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

SpacePtr gaussian_grid(int n) {
  return build_grid_space([](double x) { return 0.5 * x * x; }, -8.0, 8.0, n);
}

Observable random_observable(const SpacePtr& s, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(s->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = z(rng);
  return Observable(s, v);
}

}  // namespace

TEST_CASE("grid space with zero potential is uniform") {
  const auto s = build_grid_space([](double) { return 0.0; }, 0.0, 1.0, 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(s->weights()[i] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s->kind() == SpaceKind::grid);
  CHECK(s->spacing() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("gaussian grid weights are symmetric with the mode at the center") {
  const auto s = gaussian_grid(5);
  const auto& w = s->weights();
  CHECK(w[0] == doctest::Approx(w[4]).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(w[3]).epsilon(1e-14));
  CHECK(w[2] == w.maxCoeff());
}

TEST_CASE("gaussian grid reproduces the second and fourth moments") {
  const auto s = gaussian_grid(401);
  CHECK(std::abs(s->weights().sum() - 1.0) < 1e-12);
  const Observable x = sample(s, [](double t) { return t; });
  CHECK(std::abs(variance(x) - 1.0) < 1e-3);
  CHECK(centered_norm(x, 4) == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-3));
}

TEST_CASE("space construction rejects broken inputs") {
  CHECK_THROWS_AS(build_grid_space([](double) { return 0.0; }, 0.0, 1.0, 2), ConstructionError);
  CHECK_THROWS_AS(build_grid_space([](double x) { return x > 0.4 ? std::numeric_limits<double>::infinity() : 0.0; },
                                   0.0, 1.0, 5),
                  ConstructionError);
  Eigen::VectorXd x(3), w(3);
  x << 0, 1, 1;
  w << 0.2, 0.3, 0.5;
  CHECK_THROWS(ProbabilitySpace(x, w, SpaceKind::grid));
  x << 0, 1, 2;
  w << 0.2, 0.3, 0.4;
  CHECK_THROWS(ProbabilitySpace(x, w, SpaceKind::grid));
  w << 0.0, 0.5, 0.5;
  CHECK_THROWS(ProbabilitySpace(x, w, SpaceKind::grid));
}

TEST_CASE("gauss-hermite nodes integrate gaussian moments") {
  const auto s = build_gauss_hermite_space(20);
  CHECK(s->kind() == SpaceKind::gauss_hermite);
  const Observable x = sample(s, [](double t) { return t; });
  CHECK(mean(x) == doctest::Approx(0.0).scale(1.0));
  CHECK(variance(x) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::pow(lp_norm(x, 6), 6) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("centered norm") {
  const auto s = uniform_space(6);
  CHECK(centered_norm(constant_observable(s, 3.5), 3.0) == 0.0);
  CHECK_THROWS_AS(centered_norm(constant_observable(s, 1.0), 0.5), DomainError);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Observable f = random_observable(gaussian_grid(41), rng);
    const double n2 = centered_norm(f, 2);
    CHECK(n2 * n2 == doctest::Approx(variance(f)).epsilon(1e-13));
    double prev = 0.0;
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0, 8.0}) {
      const double np = centered_norm(f, p);
      CHECK(np >= prev * (1.0 - 1e-12));
      prev = np;
    }
  }
}

TEST_CASE("weighted median uses the lower median") {
  CHECK(weighted_median(obs(uniform_space(4), {1, 2, 3, 4})) == 2.0);
  CHECK(weighted_median(obs(uniform_space(4), {4, 3, 2, 1})) == 2.0);
  CHECK(weighted_median(constant_observable(uniform_space(5), -1.25)) == -1.25);
  CHECK(weighted_median(obs(weighted_space({0.7, 0.2, 0.1}), {5, 9, 11})) == 5.0);
  CHECK(weighted_median(obs(weighted_space({0.1, 0.2, 0.7}), {5, 9, 11})) == 11.0);
}

TEST_CASE("weighted median satisfies both half-mass inequalities") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(9);
    double total = 0.0;
    for (auto& x : w) total += (x = u(rng));
    for (auto& x : w) x /= total;
    const auto s = weighted_space(w);
    const Observable f = random_observable(s, rng);
    const double m = weighted_median(f);
    double below = 0.0, above = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (f[i] < m) below += s->weights()[i];
      if (f[i] > m) above += s->weights()[i];
    }
    CHECK(below <= 0.5 + 1e-12);
    CHECK(above <= 0.5 + 1e-12);
  }
}

TEST_CASE("median centered norm") {
  CHECK(median_centered_norm(constant_observable(uniform_space(3), 2.0), 2.0) == 0.0);
  CHECK(median_centered_norm(obs(uniform_space(2), {0, 1}), 2.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(median_centered_norm(obs(uniform_space(2), {0, 1}), 0.9), DomainError);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    Observable f = random_observable(gaussian_grid(31), rng);
    if (trial % 2) f = signed_power(f, 3.0);
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0, 8.0}) {
      const double np = centered_norm(f, p);
      const double mp = median_centered_norm(f, p);
      CHECK(0.5 * np <= mp);
      CHECK(mp <= 3.0 * np);
    }
    CHECK(std::abs(mean(f) - weighted_median(f)) <= std::sqrt(2.0 * variance(f)));
  }
}

TEST_CASE("signed power") {
  const auto s = uniform_space(3);
  const Observable f = obs(s, {-4, 0, 9});
  CHECK(signed_power(f, 1.0).values() == f.values());
  const Observable g = signed_power(f, 0.5);
  CHECK(g[0] == doctest::Approx(-2.0));
  CHECK(g[1] == 0.0);
  CHECK(g[2] == doctest::Approx(3.0));
}

TEST_CASE("signed power keeps a zero median") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Observable raw = random_observable(gaussian_grid(25), rng);
    const Observable f = raw - weighted_median(raw);
    REQUIRE(weighted_median(f) == 0.0);
    for (double h : {0.25, 0.5, 2.0, 3.0}) CHECK(weighted_median(signed_power(f, h)) == 0.0);
  }
}

TEST_CASE("cutoff is zero inside, identity outside, linear between") {
  const double u = 0.5;
  const Observable f = obs(uniform_space(6), {-0.4, 0.3, 1.5, 0.75, -0.75, 3.0});
  const Observable g = cutoff_phi(f, u);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 1.5);
  CHECK(g[3] == doctest::Approx(0.5));
  CHECK(g[4] == doctest::Approx(-0.5));
  CHECK(g[5] == 3.0);
}

TEST_CASE("cutoff is 2-Lipschitz and keeps most of the mass") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const Observable raw = random_observable(gaussian_grid(51), rng);
    const Observable f = raw - mean(raw);
    for (double u : {0.05, 0.3, 1.0}) {
      const Observable g = cutoff_phi(f, u);
      for (Eigen::Index i = 0; i + 1 < f.size(); ++i) {
        CHECK(std::abs(g[i + 1] - g[i]) <= 2.0 * std::abs(f[i + 1] - f[i]) + 1e-14);
      }
      const double g2 = std::pow(lp_norm(g, 2), 2);
      const double f2 = std::pow(lp_norm(f, 2), 2);
      CHECK(g2 >= f2 - 4.0 * u * u - 1e-12);
      CHECK(std::abs(mean(g)) <= 4.0 * u + 1e-12);
    }
  }
}

TEST_CASE("truncated median test function") {
  const auto s = uniform_space(4);
  const Observable f = obs(s, {-4, 0, 0.5, 2});
  REQUIRE(weighted_median(f) == 0.0);
  const Observable g = truncated_median_test_function(f, 1.0, 4.0);
  CHECK(g[0] == doctest::Approx(-2.0));
  CHECK(g[1] == 0.0);
  CHECK(g[2] == doctest::Approx(0.5));
  CHECK(g[3] == doctest::Approx(std::sqrt(2.0)));
  CHECK(weighted_median(g) == 0.0);

  const Observable same = truncated_median_test_function(f, 0.7, 2.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(same[i] == doctest::Approx(f[i]));

  const Observable big = obs(uniform_space(3), {-9, 0, 4});
  const Observable root = truncated_median_test_function(big, 0.0001, 4.0);
  CHECK(root[0] == doctest::Approx(-3.0));
  CHECK(root[2] == doctest::Approx(2.0));

  CHECK_THROWS_AS(truncated_median_test_function(obs(s, {1, 2, 3, 4}), 1.0, 4.0), PreconditionError);
}

TEST_CASE("abs_pow maps zero to zero") {
  CHECK(abs_pow(0.0, 1.5) == 0.0);
  CHECK(abs_pow(-2.0, 3.0) == doctest::Approx(8.0));
  CHECK(abs_pow(-0.25, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("observable CSV round trip is exact") {
  const auto s = gaussian_grid(17);
  const Observable f = sample(s, [](double x) { return std::sin(x) / 3.0; });
  std::stringstream buf;
  write_observable_csv(buf, f);
  CHECK(buf.str().rfind("point,weight,value\n", 0) == 0);
  const Observable back = read_observable_csv(buf);
  CHECK(back.values() == f.values());
  CHECK(back.space()->points() == s->points());
  CHECK(back.space()->weights() == s->weights());
}

TEST_CASE("format_real prints 17 significant digits") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(2.0) == "2");
}
