#pragma once

#include "pdecay/constants.hpp"
#include "pdecay/semigroup.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdecay {

/// Outcome of one inequality check over a family and a time grid.
///
/// worst_ratio is the largest LHS/RHS seen. Additive checks (convexity,
/// differential inequalities) report 1 + normalized violation instead, so
/// passed <=> worst_ratio <= 1 + tolerance holds for every check.
struct CheckResult {
  std::string name;
  bool passed = false;
  double worst_ratio = 0.0;
  /// "<member id>@t=<time>" of the worst case, or the member id alone.
  std::string witness;
  double tolerance = 0.0;
  /// The check's premise failed on the data; neither pass nor failure.
  bool inapplicable = false;
  std::vector<std::string> notes;
};

CheckResult make_check(std::string name, double worst_ratio, std::string witness, double tolerance);
CheckResult inapplicable_check(std::string name, std::string reason, double tolerance);

/// Folds sub-checks into one: worst ratio wins, inapplicable parts are
/// ignored unless everything is inapplicable.
CheckResult combine_checks(std::string name, std::span<const CheckResult> parts);

enum class FamilyKind { random_smooth, eigen_mixtures, polynomial, sign_balanced, nonnegative };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

struct TestFunction {
  std::string id;
  Observable f;
};

/// Seeded family of smooth test functions built from low eigenmodes.
///
/// On incomplete (diagonal) decompositions the modes are capped at
/// floor((size - 1) / 2) so that pairwise products stay inside the span;
/// on complete ones at min(size - 1, 12).
///   eigen-mixtures: e1, e2, e1+e2, then random sparse and dense mixtures.
///   random-smooth:  N(0,1)/k coefficients plus a random constant.
///   polynomial:     random polynomials of the standardized coordinate.
///   sign-balanced:  random-smooth members shifted to median zero.
///   nonnegative:    1 + eps e1 and squares g^2 + delta of low-mode mixtures.
class TestFunctionFamily {
 public:
  TestFunctionFamily(const SpectralDecomposition& s, FamilyKind kind, std::uint64_t seed,
                     int count, int max_mode = 0);

  FamilyKind kind() const noexcept { return kind_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int count() const noexcept { return static_cast<int>(members_.size()); }
  int max_mode() const noexcept { return max_mode_; }
  const SpacePtr& space() const noexcept { return space_; }
  const std::vector<TestFunction>& members() const noexcept { return members_; }

 private:
  FamilyKind kind_;
  std::uint64_t seed_;
  int max_mode_;
  SpacePtr space_;
  std::vector<TestFunction> members_;
};

/// Default mode cap used by TestFunctionFamily.
int default_max_mode(const SpectralDecomposition& s);

/// N_p(P_t f) <= K exp(-lambda t) N_p(f) (1 + slack) for every member and time.
CheckResult check_envelope(const SpectralDecomposition& s, const DecayBound& b,
                           const TestFunctionFamily& family, std::span<const double> times,
                           double slack);

/// Second differences of log N_2(P_t f) over a uniform grid must stay >= -1e-9.
CheckResult check_log_convexity(const SpectralDecomposition& s, const TestFunctionFamily& family,
                                std::span<const double> times);

inline constexpr double kConvexityTolerance = 1e-9;

enum class PointwiseInequality {
  /// N_p^p(f) <= D(p) int |f - mu(f)|^{p-2} Gamma(f, f).
  lp_gradient,
  /// N_p^p(f) <= kappa(p) int Gamma(f, f)^{p/2}.
  lp_poincare,
  /// M_p^p(f) <= B int |f - m(f)|^{p-2} Gamma(f, f) with B = (p^2/4) 9 C_P.
  median_lp,
  /// (1/2) N_q <= M_q <= 3 N_q for q in {1, 1.5, 2, 3, 4, 8} and
  /// |mu(f) - m(f)| <= sqrt(2) Var(f)^{1/2}.
  median_comparison,
};

std::string to_string(PointwiseInequality which);

struct PointwiseParams {
  double p = 2.0;
  double c_p = 1.0;
  /// Overrides the default constant of the inequality.
  std::optional<double> constant;
  double slack = 1e-8;
};

/// Default constant: D(p) and kappa(p) from the C(p) table (p a power of
/// two), (p^2/4) 9 C_P for the median form.
double pointwise_constant(PointwiseInequality which, double p, double c_p);

CheckResult check_pointwise_inequality(const GeneratorRep& g, const TestFunctionFamily& family,
                                       PointwiseInequality which, const PointwiseParams& params);

/// int (P_t f)^p - (int f)^p <= exp(-4(p-1)t/(p C_P)) (int f^p - (int f)^p)
/// for nonnegative f and 1 < p <= 2.
CheckResult check_wang(const SpectralDecomposition& s, const TestFunctionFamily& nonnegative,
                       double p, double c_p, std::span<const double> times, double slack);

/// Largest |wang ratio at p = 2 - (L2 envelope ratio with K = 1, lambda = 1/C_P)^2|.
double wang_l2_discrepancy(const SpectralDecomposition& s, const TestFunctionFamily& family,
                           double c_p, std::span<const double> times);

/// int phi(g) - phi(int g) for phi(x) = x^p, computed without cancellation.
double power_jensen_gap(const Observable& g, double p);

struct GronwallReport {
  /// U_k' <= -(3/C_P) U_k + (3/C_P) U_{k-1}^2 for 2 <= k <= k_max, U_k = N_{2^k}^{2^k}.
  CheckResult recursion;
  /// U_k(t) <= 4^{2^k - 2} exp(-2t/C_P) U_k(0) for 1 <= k <= k_max.
  CheckResult envelope;
  /// 4^{2^k-2} >= 1 + 3 * 4^{2^k-4}, exact integers.
  CheckResult power_inequality;
  /// U_{k-1}(0)^2 <= U_k(0) evaluated exactly on the discrete measure.
  CheckResult cauchy_schwarz;
  /// Largest step that would make the derivative error acceptable, when the
  /// given grid was too coarse.
  std::optional<double> required_step;

  CheckResult combined(const std::string& name) const;
};

/// Requires mean-zero f, k_max >= 2 and a uniform time grid. `slack` is
/// added to the recursion and envelope tolerances (non-diffusion backends).
GronwallReport check_gronwall_recursion(const SpectralDecomposition& s, const TestFunction& f,
                                        double c_p, int k_max, std::span<const double> times,
                                        double slack = 0.0);

struct EntropyReplay {
  /// E_p(P_t f) <= exp(-gamma_p t) E_p(f), E_p = a_p N_p^p + b_p Var^{p/2}.
  CheckResult functional;
  /// N_p^p(P_t f) <= ((a_p + b_p)/a_p) exp(-gamma_p t) N_p^p(f).
  CheckResult envelope;

  CheckResult combined(const std::string& name) const;
};

/// Requires mean-zero f and p >= 2.
EntropyReplay replay_entropy_functional(const SpectralDecomposition& s, const TestFunction& f,
                                        double p, double c_p, std::span<const double> times,
                                        double slack);

enum class RatioKind {
  /// Var(f) / E(f, f).
  poincare,
  /// N_p^p(f) / int |f - mu(f)|^{p-2} Gamma(f, f).
  lp_gradient,
  /// M_p^p(f) / int |f - m(f)|^{p-2} Gamma(f, f).
  median_lp,
};

std::string to_string(RatioKind kind);

/// The ratio above; nullopt when the denominator vanishes.
std::optional<double> inequality_ratio(const GeneratorRep& g, RatioKind kind, double p,
                                       const Observable& f);

struct BestConstantEstimate {
  double value = 0.0;
  std::string witness_id;
  Observable witness;
};

/// Maximum of the ratio over the family, then coordinate ascent on the
/// coefficients of the first max_mode eigenmodes for `budget` sweeps.
BestConstantEstimate estimate_best_constant(const GeneratorRep& g, const SpectralDecomposition& s,
                                            RatioKind kind, double p,
                                            const TestFunctionFamily& family, int budget);

/// ratio_p(signed_power(w, 2/p)) / ratio_2(w) for the median form, which
/// equals p^2/4 whenever the chain rule holds.
double transport_ratio(const GeneratorRep& g, const Observable& witness, double p);

struct VerificationReport {
  nlohmann::json backend;
  double c_p = 0.0;
  std::vector<CheckResult> checks;
  std::string timestamp;

  bool all_passed() const;
  /// Sorts checks by name; throws PreconditionError when empty.
  void finalize();
};

nlohmann::json to_json(const CheckResult& c);
nlohmann::json to_json(const VerificationReport& r);
/// `name,passed,inapplicable,worst_ratio,witness,tolerance`.
void write_report_csv(std::ostream& out, const VerificationReport& r);

struct SuiteOptions {
  std::uint64_t seed = 20240101;
  int count = 200;
  /// Relative slack for inequality checks; 1e-8 suits exact backends.
  double slack = 1e-8;
  /// Envelope grid: 40 points ending at t_end (0 means 10 / gap).
  int time_points = 40;
  double t_end = 0.0;
  /// Additional bounds to test, e.g. deliberately inflated ones.
  std::vector<DecayBound> extra_bounds;
};

/// Runs every check of the module on one backend and returns the sorted report.
VerificationReport run_verification_suite(const GeneratorRep& g, const SuiteOptions& options,
                                          nlohmann::json backend_descriptor);

struct SweepRow {
  std::string quantity;
  double axis = 0.0;
  double p = 2.0;
  double lambda_observed = 0.0;
  double lambda_bound = 0.0;
  double k_bound = 1.0;
  double worst_ratio = 0.0;
};

/// Gap of the grid generator at each n. lambda_bound is the continuum gap
/// when known (NaN otherwise) and worst_ratio = C_P(n) * continuum gap.
std::vector<SweepRow> sweep_grid_resolution(const std::function<double(double)>& potential,
                                            double a, double b, std::span<const int> ns,
                                            std::optional<double> continuum_gap);

/// Observed per-norm rate min_f -log(N_p(P_T f)/N_p(f)) / T against the
/// power-of-two / generic thm-grand bound at each p; worst_ratio is the
/// envelope ratio of that bound.
std::vector<SweepRow> sweep_exponent(const SpectralDecomposition& s,
                                     const TestFunctionFamily& family, std::span<const double> ps,
                                     std::span<const double> times);

/// `quantity,axis,p,lambda_observed,lambda_bound,K_bound,worst_ratio`.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace pdecay
