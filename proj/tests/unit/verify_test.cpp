#include "doctest.h"

#include "pdecay/errors.hpp"
#include "pdecay/verify.hpp"

#include <cmath>
#include <sstream>

using namespace pdecay;

namespace {

struct Fixture {
  GeneratorRep ou = build_ou_hermite(16, 128);
  SpectralDecomposition s = decompose(ou);
  std::vector<double> times = uniform_time_grid(10.0, 40);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

TestFunction mode_sum(const SpectralDecomposition& s, std::initializer_list<int> modes, std::string id) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(s.size());
  for (int k : modes) c[k] = 1.0;
  return {std::move(id), s.synthesize(c)};
}

}  // namespace

TEST_CASE("check results") {
  const CheckResult ok = make_check("a", 1.0 + 1e-9, "w", 1e-8);
  CHECK(ok.passed);
  const CheckResult bad = make_check("a", 1.0 + 1e-7, "w", 1e-8);
  CHECK_FALSE(bad.passed);
  const CheckResult skip = inapplicable_check("c", "premise failed", 1e-8);
  CHECK(skip.inapplicable);
  CHECK(std::isnan(skip.worst_ratio));

  const std::vector<CheckResult> parts{ok, bad, skip};
  const CheckResult all = combine_checks("all", parts);
  CHECK_FALSE(all.passed);
  CHECK(all.witness == "a:w");
  const std::vector<CheckResult> only_skip{skip};
  CHECK(combine_checks("s", only_skip).inapplicable);
}

TEST_CASE("family kinds by name") {
  for (FamilyKind k : {FamilyKind::random_smooth, FamilyKind::eigen_mixtures, FamilyKind::polynomial,
                       FamilyKind::sign_balanced, FamilyKind::nonnegative}) {
    CHECK(family_kind_from_string(to_string(k)) == k);
  }
  CHECK(to_string(FamilyKind::eigen_mixtures) == "eigen-mixtures");
  CHECK_THROWS_AS(family_kind_from_string("gaussian-bumps"), PreconditionError);
}

TEST_CASE("families are reproducible from the seed") {
  const auto& s = fx().s;
  const TestFunctionFamily a(s, FamilyKind::random_smooth, 42, 20);
  const TestFunctionFamily b(s, FamilyKind::random_smooth, 42, 20);
  const TestFunctionFamily c(s, FamilyKind::random_smooth, 43, 20);
  REQUIRE(a.count() == 20);
  for (int i = 0; i < 20; ++i) {
    CHECK(a.members()[i].id == b.members()[i].id);
    CHECK(a.members()[i].f.values() == b.members()[i].f.values());
  }
  CHECK(a.members()[5].f.values() != c.members()[5].f.values());
}

TEST_CASE("family contents") {
  const auto& s = fx().s;
  CHECK(default_max_mode(s) == 7);
  const TestFunctionFamily mix(s, FamilyKind::eigen_mixtures, 1, 10);
  CHECK(mix.members()[0].id == "e1");
  CHECK(mix.members()[1].id == "e2");
  CHECK(mix.members()[2].id == "e1+e2");
  for (const auto& m : mix.members()) CHECK_NOTHROW(s.coefficients(product(m.f, m.f)));

  const TestFunctionFamily pos(s, FamilyKind::nonnegative, 1, 30);
  for (const auto& m : pos.members()) CHECK(m.f.values().minCoeff() > 0.0);

  const TestFunctionFamily bal(s, FamilyKind::sign_balanced, 1, 30);
  for (const auto& m : bal.members()) CHECK(std::abs(weighted_median(m.f)) < 1e-12);

  const TestFunctionFamily poly(s, FamilyKind::polynomial, 1, 30, 4);
  CHECK(poly.max_mode() == 4);
  for (const auto& m : poly.members()) {
    const Eigen::VectorXd c = s.coefficients(m.f);
    CHECK(c.tail(c.size() - 5).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + c.norm()));
  }
}

TEST_CASE("envelope checks") {
  const auto& [ou, s, times] = fx();
  const TestFunctionFamily family(s, FamilyKind::eigen_mixtures, 7, 60);
  const CheckResult exact = check_envelope(s, make_bound(2, 1.0, 1.0, BoundSource::spectral_exact),
                                           family, times, 1e-9);
  CHECK(exact.passed);
  CHECK(exact.worst_ratio == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(check_envelope(s, bound_thm_grand(4, 1.0), family, times, 1e-8).passed);

  const CheckResult inflated =
      check_envelope(s, make_bound(2, 2.0, 1.0, BoundSource::probe), family, times, 1e-8);
  CHECK_FALSE(inflated.passed);
  CHECK(inflated.witness.rfind("e1@", 0) == 0);

  const CheckResult small_k =
      check_envelope(s, make_bound(4, 0.5, 0.9, BoundSource::probe), family, times, 1e-8);
  CHECK_FALSE(small_k.passed);
  CHECK(small_k.worst_ratio == doctest::Approx(1.0 / 0.9).epsilon(1e-6));
}

TEST_CASE("single mode envelope ratio") {
  const auto& [ou, s, times] = fx();
  const TestFunctionFamily family(s, FamilyKind::eigen_mixtures, 7, 3);
  const double lambda = 0.4, k = 1.5;
  const CheckResult r = check_envelope(s, make_bound(2, lambda, k, BoundSource::probe), family, times, 0);
  CHECK(r.worst_ratio == doctest::Approx(1.0 / k).epsilon(1e-12));
  CHECK(r.passed);
}

TEST_CASE("log convexity check") {
  const auto& [ou, s, times] = fx();
  const std::vector<double> grid = uniform_time_grid(10.0, 101);
  const TestFunctionFamily modes(s, FamilyKind::eigen_mixtures, 1, 40);
  CHECK(check_log_convexity(s, modes, grid).passed);
  const auto ls = build_grid_space([](double x) { return 0.5 * x * x; }, -8, 8, 101);
  const SpectralDecomposition gs = decompose(build_grid_generator(ls));
  const TestFunctionFamily smooth(gs, FamilyKind::random_smooth, 2, 100);
  CHECK(check_log_convexity(gs, smooth, grid).passed);
}

TEST_CASE("pointwise inequalities on the exact backend") {
  const auto& [ou, s, times] = fx();
  const TestFunctionFamily family(s, FamilyKind::eigen_mixtures, 3, 80);
  CHECK(pointwise_constant(PointwiseInequality::lp_gradient, 4, 1.0) == doctest::Approx(324.0));
  CHECK(pointwise_constant(PointwiseInequality::median_lp, 2, 1.0) == doctest::Approx(9.0));
  CHECK(pointwise_constant(PointwiseInequality::lp_poincare, 2, 1.0) == doctest::Approx(1.0));

  PointwiseParams params;
  params.c_p = 1.0;
  params.p = 4;
  CHECK(check_pointwise_inequality(ou, family, PointwiseInequality::lp_gradient, params).passed);
  params.p = 2;
  const CheckResult poinc = check_pointwise_inequality(ou, family, PointwiseInequality::lp_poincare, params);
  CHECK(poinc.passed);
  CHECK(poinc.worst_ratio >= 1.0 - 1e-8);
  const TestFunctionFamily balanced(s, FamilyKind::sign_balanced, 3, 80);
  CHECK(check_pointwise_inequality(ou, balanced, PointwiseInequality::median_lp, params).passed);
  CHECK(check_pointwise_inequality(ou, family, PointwiseInequality::median_comparison, params).passed);

  params.constant = 0.5;
  CHECK_FALSE(check_pointwise_inequality(ou, family, PointwiseInequality::lp_poincare, params).passed);
}

TEST_CASE("wang inequality") {
  const auto& [ou, s, times] = fx();
  const TestFunctionFamily pos(s, FamilyKind::nonnegative, 5, 40);
  CHECK(check_wang(s, pos, 2.0, 1.0, times, 1e-8).passed);
  CHECK(check_wang(s, pos, 1.5, 1.0, times, 1e-8).passed);
  CHECK(wang_l2_discrepancy(s, pos, 1.0, times) < 1e-10);
  CHECK(power_jensen_gap(constant_observable(s.space(), 2.0), 1.5) == doctest::Approx(0.0).scale(1.0));
  CHECK(power_jensen_gap(pos.members()[0].f, 1.5) > 0.0);
}

TEST_CASE("gronwall recursion") {
  const auto& [ou, s, times] = fx();
  const std::vector<double> fine = uniform_time_grid(2.0, 2001);
  const GronwallReport r = check_gronwall_recursion(s, mode_sum(s, {1, 2}, "e1+e2"), 1.0, 3, fine);
  CHECK(r.recursion.passed);
  CHECK(r.envelope.passed);
  CHECK(r.power_inequality.passed);
  CHECK(r.cauchy_schwarz.passed);
  CHECK(r.combined("g").passed);

  const GronwallReport single = check_gronwall_recursion(s, mode_sum(s, {1}, "e1"), 1.0, 2, fine);
  CHECK(single.combined("g").passed);
  CHECK_THROWS(check_gronwall_recursion(s, mode_sum(s, {0, 1}, "c+e1"), 1.0, 2, fine));
}

TEST_CASE("entropy functional replay") {
  const auto& [ou, s, times] = fx();
  CHECK(replay_entropy_functional(s, mode_sum(s, {1}, "e1"), 4.0, 1.0, times, 1e-8).combined("e").passed);
  CHECK(replay_entropy_functional(s, mode_sum(s, {1, 3}, "e1+e3"), 2.0, 1.0, times, 1e-8).combined("e").passed);
}

TEST_CASE("best constant estimates") {
  const auto& [ou, s, times] = fx();
  const TestFunctionFamily family(s, FamilyKind::random_smooth, 9, 40);
  const BestConstantEstimate poinc = estimate_best_constant(ou, s, RatioKind::poincare, 2, family, 10);
  CHECK(poinc.value >= 1.0 - 1e-6);
  CHECK(poinc.value <= 1.0 + 1e-8);
  const Eigen::VectorXd c = s.coefficients(poinc.witness - mean(poinc.witness));
  CHECK(std::abs(c[1]) / c.norm() > 0.999);

  const BestConstantEstimate b2 = estimate_best_constant(ou, s, RatioKind::median_lp, 2, family, 10);
  CHECK(b2.value >= 0.25 * 0.95);
  CHECK(b2.value <= 9.0);

  const auto x = sample(s.space(), [](double t) { return t; });
  CHECK(inequality_ratio(ou, RatioKind::poincare, 2, x).value() == doctest::Approx(1.0));
  CHECK_FALSE(inequality_ratio(ou, RatioKind::poincare, 2, constant_observable(s.space(), 1.0)));
}

TEST_CASE("verification report serialization") {
  VerificationReport report;
  CHECK_THROWS_AS(report.finalize(), PreconditionError);
  report.backend = {{"kind", "ou"}};
  report.c_p = 1.0;
  report.checks.push_back(make_check("zeta", 0.5, "e1@t=0", 1e-8));
  report.checks.push_back(inapplicable_check("alpha", "none", 1e-8));
  report.finalize();
  CHECK(report.checks.front().name == "alpha");
  CHECK(report.all_passed());

  const nlohmann::json j = to_json(report);
  CHECK(j["all_passed"] == true);
  CHECK(j["checks"][0]["worst_ratio"].is_null());
  CHECK(j["checks"][1]["witness"] == "e1@t=0");

  std::ostringstream csv;
  write_report_csv(csv, report);
  CHECK(csv.str().rfind("name,passed,inapplicable,worst_ratio,witness,tolerance\n", 0) == 0);

  report.checks.push_back(make_check("beta", 2.0, "", 1e-8));
  CHECK_FALSE(report.all_passed());
}

TEST_CASE("sweeps") {
  const std::vector<int> ns{41, 81};
  const auto rows = sweep_grid_resolution([](double) { return 0.0; }, 0.0, 1.0, ns,
                                          M_PI * M_PI);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].axis == 41);
  CHECK(std::abs(rows[1].lambda_observed / (M_PI * M_PI) - 1.0) <
        std::abs(rows[0].lambda_observed / (M_PI * M_PI) - 1.0));

  const auto& [ou, s, times] = fx();
  const TestFunctionFamily family(s, FamilyKind::eigen_mixtures, 1, 20);
  const std::vector<double> ps{2, 4, 8};
  const auto prow = sweep_exponent(s, family, ps, times);
  REQUIRE(prow.size() == 3);
  for (const auto& row : prow) {
    CHECK(row.lambda_observed >= row.lambda_bound);
    CHECK(row.worst_ratio <= 1.0 + 1e-8);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, prow);
  CHECK(csv.str().rfind("quantity,axis,p,lambda_observed,lambda_bound,K_bound,worst_ratio\n", 0) == 0);
}
