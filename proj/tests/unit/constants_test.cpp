#include "doctest.h"

#include "pdecay/constants.hpp"
#include "pdecay/errors.hpp"

#include <algorithm>
#include <cmath>

using namespace pdecay;

namespace {

Rational r(long long n, long long d = 1) { return Rational(n, d); }

Rational pow2(int e) {
  Rational out(1);
  const Rational two(2);
  for (int i = 0; i < std::abs(e); ++i) out *= two;
  return e >= 0 ? out : Rational(1) / out;
}

const BigInt kD8("5820678160");
const BigInt kD16("26221204078962403348316224");
const BigInt kD32("8509267258549245426280857474770062401242310246751046467840");

}  // namespace

TEST_CASE("rational conversions are exact") {
  CHECK(to_rational(0.5) == r(1, 2));
  CHECK(to_rational(-3.0) == r(-3));
  CHECK(to_rational(0.1) != r(1, 10));
  CHECK(to_double(to_rational(0.1)) == 0.1);
  CHECK(to_double(r(1, 3)) == 1.0 / 3.0);
  CHECK(to_string(r(6, 4)) == "3/2");
  CHECK(to_string(r(7)) == "7");
}

TEST_CASE("bound sources round trip through their names") {
  for (BoundSource s : {BoundSource::thm_petit, BoundSource::thm_grand, BoundSource::thm_median,
                        BoundSource::dual, BoundSource::interpolated, BoundSource::spectral_exact,
                        BoundSource::probe}) {
    CHECK(bound_source_from_string(to_string(s)) == s);
  }
  CHECK(to_string(BoundSource::thm_grand) == "thm-grand");
  CHECK_THROWS(bound_source_from_string("nope"));
}

TEST_CASE("make_bound validates its constants") {
  CHECK_NOTHROW(make_bound(2, 1, 1, BoundSource::spectral_exact));
  CHECK_THROWS(make_bound(2, 0, 1, BoundSource::spectral_exact));
  CHECK_THROWS(make_bound(2, 1, 0.9, BoundSource::thm_grand));
  CHECK_NOTHROW(make_bound(4, 0.5, 0.9, BoundSource::probe));
  CHECK_THROWS(make_bound(4, 0.5, 0.0, BoundSource::probe));
  CHECK_THROWS(make_bound(0.5, 0.5, 1.0, BoundSource::probe));
}

TEST_CASE("recursion table") {
  const CRecursionTable t = c_recursion(1.0, 5);
  CHECK(t.entry(2).c_multiple == 1);
  CHECK(t.entry(4).c_multiple == 108);
  CHECK(t.entry(4).d_multiple == 324);
  CHECK(t.entry(8).d_multiple == Rational(kD8));
  CHECK(t.entry(8).c_multiple == Rational(kD8, 7));
  CHECK(t.entry(16).d_multiple == Rational(kD16));
  CHECK(t.entry(16).c_multiple == Rational(kD16, 15));
  CHECK(t.entry(32).d_multiple == Rational(kD32));
  CHECK(t.entry(32).c_multiple == Rational(kD32, 31));

  Rational prev(0);
  for (const auto& [p, e] : t.entries()) {
    CHECK(e.c_multiple > prev);
    CHECK(e.d_multiple == (p - 1) * e.c_multiple);
    prev = e.c_multiple;
  }
  CHECK_FALSE(t.contains(64));
  CHECK_THROWS(t.entry(64));
}

TEST_CASE("recursion scales with the poincare constant") {
  const CRecursionTable t = c_recursion(2.5, 3);
  CHECK(t.c(2) == 2.5);
  CHECK(t.c(4) == doctest::Approx(270.0));
  CHECK(t.d(4) == doctest::Approx(810.0));
  CHECK(t.c(8) == doctest::Approx(2.5 * 5820678160.0 / 7.0));
}

TEST_CASE("recursion guards its size budget") {
  CHECK_THROWS_AS(c_recursion(1.0, 40), ResourceError);
  CHECK_THROWS(c_recursion(1.0, 0));
}

TEST_CASE("small p bound with unit prefactor") {
  const PetitBound b4 = bound_thm_petit(4, 1.0);
  CHECK(b4.bound.K == 1.0);
  CHECK(b4.bound.lambda == doctest::Approx(1.0 / 108.0));
  REQUIRE(b4.bound.exact);
  CHECK(b4.bound.exact->rate_times_cp == r(1, 108));

  const PetitBound b8 = bound_thm_petit(8, 1.0);
  REQUIRE(b8.closed_form_rate_times_cp);
  CHECK(*b8.closed_form_rate_times_cp == pow2(-48));
  CHECK(b8.bound.exact->rate_times_cp == Rational(7) / Rational(kD8));
  CHECK(b8.bound.exact->rate_times_cp >= *b8.closed_form_rate_times_cp);

  const PetitBound b16 = bound_thm_petit(16, 1.0);
  CHECK(*b16.closed_form_rate_times_cp == pow2(-103));
  CHECK(b16.bound.exact->rate_times_cp >= *b16.closed_form_rate_times_cp);

  const PetitBound b5 = bound_thm_petit(5, 2.0);
  CHECK(b5.bound.K == 1.0);
  CHECK(b5.bound.lambda == doctest::Approx(7.0 / 5820678160.0 / 2.0));
  CHECK(b5.bound.lambda >= *b5.closed_form_lambda);
  CHECK_THROWS(bound_thm_petit(2.0, 1.0));
}

TEST_CASE("large p bound") {
  const DecayBound b4 = bound_thm_grand(4, 1.0);
  CHECK(b4.lambda == 0.5);
  CHECK(b4.K == 2.0);
  REQUIRE(b4.exact);
  CHECK(b4.exact->rate_times_cp == r(1, 2));
  CHECK(*b4.exact->log2_K == 1);

  const DecayBound b3 = bound_thm_grand(3, 1.0);
  CHECK(b3.lambda == doctest::Approx(1.0 / 3.0));
  CHECK(b3.K == doctest::Approx(std::pow(4.0, 2.0 / 3.0)));
  CHECK(b3.exact->rate_times_cp == r(1, 3));
  CHECK(*b3.exact->log2_K == r(4, 3));

  const DecayBound b2 = bound_thm_grand(2, 2.0);
  CHECK(b2.lambda == 0.5);
  CHECK(b2.K == 1.0);

  const DecayBound b16 = bound_thm_grand(16, 1.0);
  CHECK(b16.lambda == 0.125);
  CHECK(b16.K == doctest::Approx(std::pow(4.0, 7.0 / 8.0)));
}

TEST_CASE("delta factor") {
  CHECK(delta_fn(0.0) == 1.0);
  CHECK(delta_fn(0.5) == 1.0);
  CHECK(delta_fn(1.0) == 1.0);
  CHECK(delta_fn(3.0) == 4.0);
  CHECK(delta_exact(3) == 4);
  CHECK(delta_exact(0) == 1);
}

TEST_CASE("median bound") {
  const MedianBound m2 = bound_thm_median(2, 1.0);
  CHECK(m2.bound.lambda == doctest::Approx(1.0 / 36.0).epsilon(1e-14));
  CHECK(m2.bound.K * m2.bound.K == doctest::Approx(1.0 + 36.0 / 17.0).epsilon(1e-13));
  CHECK(m2.k_pow_p == doctest::Approx((m2.a_p + m2.b_p) / m2.a_p).epsilon(1e-13));
  CHECK(m2.bound.lambda == doctest::Approx(m2.gamma_p / 2.0));
  REQUIRE(m2.bound.exact);
  CHECK(m2.bound.exact->rate_times_cp == r(1, 36));

  for (double p : {3.0, 4.0, 6.0}) {
    const MedianBound m = bound_thm_median(p, 1.0);
    const double printed = 4.0 * (p - 1.0) /
                           (9.0 * p * p * std::max(1.0, std::pow(2.0, p - 3.0)) * std::pow(2.0, p));
    CHECK(m.bound.lambda == doctest::Approx(printed).epsilon(1e-12));
    CHECK(std::pow(m.bound.K, p) == doctest::Approx(m.k_pow_p).epsilon(1e-10));
    CHECK(m.a_p == 1.0);
  }
  CHECK(bound_thm_median(4, 2.0).bound.lambda == doctest::Approx(bound_thm_median(4, 1.0).bound.lambda / 2.0));
}

TEST_CASE("duality") {
  const DecayBound petit = bound_thm_petit(4, 1.0).bound;
  const DecayBound d = dualize(petit);
  CHECK(d.p == doctest::Approx(4.0 / 3.0));
  CHECK(d.K == 2.0);
  CHECK(d.lambda == petit.lambda);
  CHECK(d.source == BoundSource::dual);
  REQUIRE(d.exact);
  CHECK(d.exact->p == r(4, 3));
  CHECK(d.exact->rate_times_cp == r(1, 108));

  const DecayBound self = dualize(bound_thm_grand(2, 1.0));
  CHECK(self.p == 2.0);
  CHECK(self.K == 2.0);

  const DecayBound b3 = bound_thm_grand(3, 1.0);
  const DecayBound twice = dualize(dualize(b3));
  CHECK(twice.p == doctest::Approx(3.0));
  CHECK(twice.K == doctest::Approx(4.0 * b3.K));
}

TEST_CASE("interpolation") {
  CHECK(interpolation_theta(2, 4, 3) == doctest::Approx(2.0 / 3.0));
  const DecayBound b0 = make_bound(2, 1, 1, BoundSource::spectral_exact);
  const DecayBound b1 = make_bound(4, 0.5, 2, BoundSource::thm_grand);
  const DecayBound mid = riesz_thorin_interpolate(b0, b1, 3);
  CHECK(mid.K == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
  CHECK(mid.lambda == doctest::Approx(2.0 / 3.0));
  CHECK(mid.source == BoundSource::interpolated);

  const DecayBound same = riesz_thorin_interpolate(b0, b1, 2);
  CHECK(same.K == b0.K);
  CHECK(same.lambda == b0.lambda);

  const DecayBound ig = interpolated_grand(3, 1.0);
  CHECK(ig.K == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
  CHECK(ig.lambda == doctest::Approx(2.0 / 3.0));
  REQUIRE(ig.exact);
  CHECK(ig.exact->rate_times_cp == r(2, 3));
  CHECK(*ig.exact->log2_K == r(2, 3));
  CHECK(dominates(ig, bound_thm_grand(3, 1.0)));
  CHECK_FALSE(dominates(bound_thm_grand(3, 1.0), ig));
  CHECK_THROWS(riesz_thorin_interpolate(b0, b1, 5));
}

TEST_CASE("dominance compares only equal exponents") {
  CHECK_FALSE(dominates(bound_thm_grand(4, 1.0), bound_thm_grand(3, 1.0)));
  CHECK(dominates(bound_thm_grand(4, 1.0), bound_thm_grand(4, 1.0)));
}

TEST_CASE("kappa constants") {
  CHECK(kappa_lp(2, 1.7) == doctest::Approx(1.7));
  CHECK(kappa_lp(4, 108.0) == doctest::Approx(324.0 * 324.0));
  CHECK(kappa_propagate(2, 1.5, 4) == doctest::Approx(std::pow(12.0, 4) * 1.5 * 1.5));
  CHECK(kappa_propagate(3, 2.0, 3) == doctest::Approx(std::pow(6.0, 3) * 2.0));
}

TEST_CASE("median constant relation and sandwich") {
  CHECK(b_relation(1.3, 2) == doctest::Approx(1.3));
  CHECK(b_relation(1.0, 4) == 4.0);
  const Interval i = b_sandwich(1.0);
  CHECK(i.lo == 0.25);
  CHECK(i.hi == 9.0);
  const auto [lo, hi] = b_sandwich_exact(r(2, 3));
  CHECK(lo == r(1, 6));
  CHECK(hi == 6);
}

TEST_CASE("exact power inequality") {
  for (int k = 2; k <= 24; ++k) CHECK(gronwall_power_inequality(k));
  CHECK_THROWS(gronwall_power_inequality(1));
}

TEST_CASE("all bounds per exponent") {
  const auto sources = [](const std::vector<DecayBound>& bs) {
    std::vector<BoundSource> out;
    for (const auto& b : bs) out.push_back(b.source);
    return out;
  };
  const auto has = [](const std::vector<BoundSource>& v, BoundSource s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  const auto b4 = all_bounds(4, 1.0);
  const auto s4 = sources(b4);
  CHECK(has(s4, BoundSource::thm_petit));
  CHECK(has(s4, BoundSource::thm_grand));
  CHECK(has(s4, BoundSource::thm_median));
  CHECK_FALSE(has(s4, BoundSource::interpolated));

  const auto s3 = sources(all_bounds(3, 1.0));
  CHECK(has(s3, BoundSource::interpolated));

  const auto b43 = all_bounds(4.0 / 3.0, 1.0);
  bool found = false;
  for (const auto& b : b43) {
    CHECK(b.source == BoundSource::dual);
    CHECK(b.p == 4.0 / 3.0);
    if (b.K == 2.0 && std::abs(b.lambda - 1.0 / 108.0) < 1e-15) found = true;
  }
  CHECK(found);
  CHECK_THROWS(all_bounds(1.0, 1.0));
}

TEST_CASE("bound JSON") {
  const nlohmann::json j = to_json(bound_thm_grand(4, 1.0));
  CHECK(j["p"] == 4.0);
  CHECK(j["lambda"] == 0.5);
  CHECK(j["K"] == 2.0);
  CHECK(j["source"] == "thm-grand");
  CHECK(j["exact"]["lambda_times_C_P"] == "1/2");
  CHECK(j["exact"]["log2_K"] == "1");

  const nlohmann::json t = to_json(c_recursion(1.0, 2));
  CHECK(t["C_P"] == 1.0);
  CHECK(t["entries"].size() == 2);
  CHECK(t["entries"][1]["C_over_C_P"] == "108");
}
