#pragma once

#include "json.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdecay {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Exact value of a finite double.
Rational to_rational(double x);
double to_double(const Rational& r);
/// "num/den" (or "num" for integers).
std::string to_string(const Rational& r);

enum class BoundSource {
  thm_petit,
  thm_grand,
  thm_median,
  dual,
  interpolated,
  spectral_exact,
  /// User-supplied bound used to probe the verifier; may have K < 1.
  probe,
};

std::string to_string(BoundSource s);
BoundSource bound_source_from_string(const std::string& name);

/// Exact companion of a bound whose constants are rational (rate) and
/// powers of two (prefactor).
struct ExactBound {
  Rational p;
  /// lambda * C_P.
  Rational rate_times_cp;
  /// K = 2^log2_K when known in closed form.
  std::optional<Rational> log2_K;
};

/// The claim N_p(P_t f) <= K exp(-lambda t) N_p(f), always per-norm.
struct DecayBound {
  double p = 2.0;
  double lambda = 0.0;
  double K = 1.0;
  BoundSource source = BoundSource::spectral_exact;
  std::optional<ExactBound> exact;
};

/// Validates lambda > 0 and K >= 1 (K > 0 for probes).
DecayBound make_bound(double p, double lambda, double K, BoundSource source,
                      std::optional<ExactBound> exact = std::nullopt);

/// a is at least as strong as b: same p, K_a <= K_b and lambda_a >= lambda_b.
bool dominates(const DecayBound& a, const DecayBound& b);

/// C(p) for p = 2, 4, ..., 2^k_max, stored as exact multiples of C_P.
///
/// D(p) = (p - 1) C(p) is the full coefficient in
///   N_p^p(f) <= D(p) * int |f|^{p-2} Gamma(f, f) dmu.
class CRecursionTable {
 public:
  struct Entry {
    Rational c_multiple;
    Rational d_multiple;
  };

  CRecursionTable(double c_p, std::map<int, Entry> entries)
      : c_p_(c_p), entries_(std::move(entries)) {}

  double poincare_constant() const noexcept { return c_p_; }
  const std::map<int, Entry>& entries() const noexcept { return entries_; }
  bool contains(int p) const { return entries_.count(p) != 0; }
  const Entry& entry(int p) const;
  /// C(p) in the units of the generator.
  double c(int p) const;
  /// D(p) = (p - 1) C(p).
  double d(int p) const;

 private:
  double c_p_;
  std::map<int, Entry> entries_;
};

/// Upper bound on the bit length of any exact value the recursion may build.
inline constexpr std::size_t kRecursionBitBudget = 1u << 20;

/// C(2) = C_P, D(4) = 324 C_P, then
///   D(2p) = 4 (2^{2p-1} + 2^{4p-5}) (2^p + 2^{3p-1}) D(p) + p^2 C_P,
///   C(2p) = D(2p) / (2p - 1).
CRecursionTable c_recursion(double c_p, int k_max);

struct PetitBound {
  DecayBound bound;
  /// Closed-form floor 2^{k+6} / (2^{7 * 2^{k+1}} C_P) for 2^k < p <= 2^{k+1}, k > 1.
  std::optional<double> closed_form_lambda;
  std::optional<Rational> closed_form_rate_times_cp;
};

/// K = 1 and lambda = 1 / C(2^ceil(log2 p)).
PetitBound bound_thm_petit(double p, double c_p);

/// lambda = 1/(p C_P), K = 4^{1-1/p}; at powers of two lambda = 2/(p C_P),
/// K = 4^{1-2/p}. p = 2 gives the exact L2 bound.
DecayBound bound_thm_grand(double p, double c_p);

struct MedianBound {
  DecayBound bound;
  /// Entropy functional weights, normalized with a_p = 1.
  double a_p = 1.0;
  double b_p = 0.0;
  /// Decay rate of the entropy functional; lambda = gamma_p / p.
  double gamma_p = 0.0;
  /// K^p from the closed-form expression (equals (a_p + b_p) / a_p).
  double k_pow_p = 1.0;
};

MedianBound bound_thm_median(double p, double c_p);

/// max(1, 2^{p-1}).
double delta_fn(double p);
Rational delta_exact(int p);

/// Bound at q mapped to the conjugate exponent p = q/(q-1): K doubles,
/// lambda is kept.
DecayBound dualize(const DecayBound& b);

/// Interpolated operator bound at p0 <= p <= p1 with
/// 1/p = (1 - theta)/p0 + theta/p1: K = K0^{1-theta} K1^theta and
/// lambda = (1 - theta) lambda0 + theta lambda1.
DecayBound riesz_thorin_interpolate(const DecayBound& b0, const DecayBound& b1, double p);

/// theta for the interpolation above.
double interpolation_theta(double p0, double p1, double p);

/// Interpolation of the two power-of-two thm-grand bounds around p.
DecayBound interpolated_grand(double p, double c_p);

/// kappa(p) = (C(p) (p - 1))^{p/2}.
double kappa_lp(double p, double c_of_p);
/// (6p/p0)^p kappa0^{p/p0}.
double kappa_propagate(double p0, double kappa0, double p);

/// (p^2 / 4) B(2).
double b_relation(double b2, double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Admissible range [C_P/4, 9 C_P] for B(2).
Interval b_sandwich(double c_p);
std::pair<Rational, Rational> b_sandwich_exact(const Rational& c_p);

/// 4^{2^k - 2} >= 1 + 3 * 4^{2^k - 4}, evaluated exactly (k >= 2).
bool gronwall_power_inequality(int k);

/// Every applicable bound at p: direct bounds for p >= 2, duals for 1 < p < 2.
std::vector<DecayBound> all_bounds(double p, double c_p);

nlohmann::json to_json(const DecayBound& b);
nlohmann::json to_json(const CRecursionTable& t);

}  // namespace pdecay
